//! Full pipeline on synthetic pages: detect, score each line, pool.

use diqa::assess::{assess_document, PoolingStrategy};
use diqa::detect::BaselineDetector;
use diqa::eval::{pearson_lcc, spearman_srocc};
use diqa::imgproc::GridSpec;
use diqa::predict::AnalyticPredictor;
use diqa::synth::{random_page, LabelFnConfig, LineSynthesizer, PageLayout, SynthConfig};

fn main() -> diqa::Result<()> {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let detector = BaselineDetector::default();
    let predictor = AnalyticPredictor::new(LabelFnConfig::default());
    let (mut truth, mut wp, mut med) = (Vec::new(), Vec::new(), Vec::new());
    println!("{:>6} {:>6} {:>7} {:>7} {:>7}", "sigma", "lines", "truth", "wp", "median");
    for i in 0..12 {
        let sigma = 0.5 + 4.0 * i as f64 / 11.0;
        let page = random_page(&synth, &PageLayout::default(), sigma, 300 + i)?;
        let r = assess_document(&page.image, &detector, &predictor, PoolingStrategy::WeightedPool, Some(GridSpec::new(4, 6)))?;
        let gt = page.ground_truth_quality().unwrap_or(0.0);
        let (a, b) = (r.overall_wp.unwrap_or(0.0), r.overall_median.unwrap_or(0.0));
        println!("{sigma:>6.2} {:>6} {gt:>7.3} {a:>7.3} {b:>7.3}", r.lines.len());
        truth.push(gt);
        wp.push(a);
        med.push(b);
    }
    println!("weighted pool: LCC {:.3} SROCC {:.3}", pearson_lcc(&wp, &truth)?, spearman_srocc(&wp, &truth)?);
    println!("median pool:   LCC {:.3} SROCC {:.3}", pearson_lcc(&med, &truth)?, spearman_srocc(&med, &truth)?);
    Ok(())
}
