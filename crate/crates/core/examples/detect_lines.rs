//! Detects text lines on a synthetic page, whole and divided into a 4x6 grid,
//! and writes annotated overlays next to the page.

use diqa::detect::{detect, detect_with_dividing, draw_boxes, DetectorParams};
use diqa::imgproc::{write_pgm, GridSpec};
use diqa::synth::{random_page, LabelFnConfig, LineSynthesizer, PageLayout, SynthConfig};

fn main() -> diqa::Result<()> {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let page = random_page(&synth, &PageLayout::default(), 1.0, 7)?;
    let params = DetectorParams::default();
    let whole = detect(&page.image, &params)?;
    let divided = detect_with_dividing(&page.image, GridSpec::new(4, 6), &params)?;
    println!("{} ground-truth lines", page.lines.len());
    for l in &page.lines {
        let best = whole.iter().map(|d| d.bbox.iou(&l.bbox)).fold(0.0, f64::max);
        println!("  {:?}  best IoU {best:.2}", l.bbox);
    }
    println!("whole page: {} boxes; 4x6 grid: {} pieces", whole.len(), divided.len());

    let dir = std::env::temp_dir();
    let boxes = |v: &[diqa::detect::DetectedLine]| v.iter().map(|d| d.bbox).collect::<Vec<_>>();
    write_pgm(dir.join("diqa-page.pgm"), &page.image)?;
    write_pgm(dir.join("diqa-whole.pgm"), &draw_boxes(&page.image, &boxes(&whole)))?;
    write_pgm(dir.join("diqa-divided.pgm"), &draw_boxes(&page.image, &boxes(&divided)))?;
    println!("overlays written to {}", dir.display());
    Ok(())
}
