//! Any closure can stand in for the line detector; here a fixed band
//! splitter is plugged into the assessment pipeline.

use diqa::assess::{assess_document, PoolingStrategy};
use diqa::detect::{BoundingBox, DetectedLine};
use diqa::predict::AnalyticPredictor;
use diqa::synth::{random_page, LabelFnConfig, LineSynthesizer, PageLayout, SynthConfig};
use diqa::GrayImage;

fn main() -> diqa::Result<()> {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let page = random_page(&synth, &PageLayout::default(), 1.8, 21)?;
    // Treats the ground-truth boxes as a perfect detector.
    let boxes: Vec<BoundingBox> = page.lines.iter().map(|l| l.bbox).collect();
    let oracle = move |img: &GrayImage| -> diqa::Result<Vec<DetectedLine>> {
        boxes
            .iter()
            .map(|&b| {
                Ok(DetectedLine {
                    bbox: b,
                    crop: img.crop(b.x, b.y, b.w, b.h)?,
                    source_segment: None,
                })
            })
            .collect()
    };
    let predictor = AnalyticPredictor::new(LabelFnConfig::default());
    let r = assess_document(&page.image, &oracle, &predictor, PoolingStrategy::Median, None)?;
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
    println!("ground truth {:.3}", page.ground_truth_quality().unwrap_or(0.0));
    Ok(())
}
