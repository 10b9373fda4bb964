use diqa::detect::{detect, detect_resized, detect_with_dividing, BoundingBox, DetectorParams};
use diqa::imgproc::{gaussian_blur, BlurSpec, GridSpec};
use diqa::synth::{compose_page, random_page, LabelFnConfig, LineSynthesizer, PageLayout, PageLineSpec, SynthConfig};
use diqa::GrayImage;

fn white_lines() -> LineSynthesizer {
    let cfg = SynthConfig {
        backgrounds: vec![255],
        underfill_probability: 0.0,
        ..SynthConfig::default()
    };
    LineSynthesizer::new(cfg, LabelFnConfig::default()).unwrap()
}

/// Bounding box of pixels darker than the midpoint of the image's range.
fn ink_box(img: &GrayImage) -> BoundingBox {
    let (lo, hi) = img.min_max();
    let t = ((lo as u16 + hi as u16) / 2) as u8;
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if img.get(x, y) < t {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
}

fn offset(b: BoundingBox, dx: usize, dy: usize) -> BoundingBox {
    BoundingBox::new(b.x + dx, b.y + dy, b.w, b.h)
}

#[test]
fn stacked_lines_are_found_one_each() {
    let synth = white_lines();
    for trial in 0..4u64 {
        let mut page = GrayImage::new(500, 40 + 5 * 60, 255);
        let mut truth = Vec::new();
        for i in 0..5 {
            let line = synth.render_with_sigma(trial * 10 + i, 0.8).unwrap().image;
            let (x, y) = (40, 20 + i as usize * 60);
            page.paste(&line, x as i64, y as i64);
            truth.push(offset(ink_box(&line), x, y));
        }
        let found = detect(&page, &DetectorParams::default()).unwrap();
        assert_eq!(found.len(), 5, "trial {trial}: {:?}", found.iter().map(|d| d.bbox).collect::<Vec<_>>());
        for (d, t) in found.iter().zip(&truth) {
            assert!(d.bbox.iou(t) >= 0.7, "trial {trial}: {:?} vs {t:?}", d.bbox);
            assert_eq!((d.crop.width(), d.crop.height()), (d.bbox.w, d.bbox.h));
        }
        let one = detect_with_dividing(&page, GridSpec::new(1, 1), &DetectorParams::default()).unwrap();
        assert_eq!(one.iter().map(|d| d.bbox).collect::<Vec<_>>(), found.iter().map(|d| d.bbox).collect::<Vec<_>>());
    }
}

#[test]
fn pasted_line_gives_one_box() {
    let synth = white_lines();
    let line = synth.render_with_sigma(3, 1.0).unwrap().image;
    let mut page = GrayImage::new(600, 300, 255);
    page.paste(&line, 50, 100);
    let found = detect(&page, &DetectorParams::default()).unwrap();
    assert_eq!(found.len(), 1);
    assert!(found[0].bbox.iou(&BoundingBox::new(50, 100, 400, 40)) >= 0.7, "{:?}", found[0].bbox);
}

#[test]
fn line_across_a_segment_border_is_covered_in_pieces() {
    let synth = white_lines();
    // A 1200x1800 page splits into 300x300 segments; the line spans three columns.
    let spec = PageLineSpec {
        x: 150,
        y: 340,
        font: 0,
        font_size: 36,
        text: "quality assessment of captured document images depends on text".into(),
        ink: 20,
        sigma: 0.8,
    };
    let page = compose_page(&synth, 1200, 1800, 255, &[spec]).unwrap();
    let truth = page.lines[0].bbox;
    let pieces = detect_with_dividing(&page.image, GridSpec::new(4, 6), &DetectorParams::default()).unwrap();
    assert!(pieces.len() >= 2);
    let covered: usize = (truth.y..truth.bottom())
        .map(|y| {
            (truth.x..truth.right())
                .filter(|&x| pieces.iter().any(|p| p.bbox.intersection(&BoundingBox::new(x, y, 1, 1)) == 1))
                .count()
        })
        .sum();
    assert!(covered as f64 >= 0.9 * truth.area() as f64, "{covered} of {}", truth.area());
}

#[test]
fn undersampling_loses_tiny_text() {
    let synth = white_lines();
    let specs: Vec<PageLineSpec> = (0..3)
        .map(|i| PageLineSpec {
            x: 60,
            y: 80 + 200 * i,
            font: 0,
            font_size: 9,
            text: "small print that only survives at full resolution".into(),
            ink: 10,
            sigma: 0.5,
        })
        .collect();
    let page = compose_page(&synth, 900, 700, 255, &specs).unwrap();
    assert!(page.lines.iter().all(|l| l.bbox.h <= 9));
    let params = DetectorParams {
        min_height_px: 5,
        ..DetectorParams::default()
    };
    let native = detect(&page.image, &params).unwrap();
    let shrunk = detect_resized(&page.image, (300, 233), &params).unwrap();
    let found = |v: &[diqa::detect::DetectedLine]| {
        page.lines
            .iter()
            .filter(|l| v.iter().any(|d| d.bbox.iou(&l.bbox) >= 0.5))
            .count()
    };
    assert_eq!(found(&native), 3);
    assert_eq!(found(&shrunk), 0);
    assert_eq!(
        detect_resized(&page.image, (900, 700), &params).unwrap().iter().map(|d| d.bbox).collect::<Vec<_>>(),
        native.iter().map(|d| d.bbox).collect::<Vec<_>>()
    );
}

#[test]
fn random_pages_reach_recall_and_precision() {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default()).unwrap();
    let params = DetectorParams::default();
    let (mut truth_n, mut found_n, mut hit_truth, mut hit_found) = (0, 0, 0, 0);
    for i in 0..50u64 {
        let sigma = 0.5 + 4.0 * i as f64 / 49.0;
        let page = random_page(&synth, &PageLayout::default(), sigma, 800 + i).unwrap();
        let found = detect(&page.image, &params).unwrap();
        for d in &found {
            assert!(d.bbox.fits_in(page.image.width(), page.image.height()));
        }
        truth_n += page.lines.len();
        found_n += found.len();
        hit_truth += page.lines.iter().filter(|l| found.iter().any(|d| d.bbox.iou(&l.bbox) >= 0.5)).count();
        hit_found += found.iter().filter(|d| page.lines.iter().any(|l| d.bbox.iou(&l.bbox) >= 0.5)).count();
    }
    let recall = hit_truth as f64 / truth_n as f64;
    let precision = hit_found as f64 / found_n as f64;
    assert!(recall >= 0.9 && precision >= 0.9, "recall {recall:.3} precision {precision:.3}");
}

#[test]
fn detection_is_deterministic_and_blur_tolerant() {
    let synth = white_lines();
    let line = synth.render_with_sigma(5, 0.5).unwrap().image;
    let mut page = GrayImage::new(520, 200, 255);
    page.paste(&line, 60, 80);
    let blurred = gaussian_blur(&page, &BlurSpec::new(3.0)).unwrap();
    let a = detect(&blurred, &DetectorParams::default()).unwrap();
    let b = detect(&blurred, &DetectorParams::default()).unwrap();
    assert_eq!(a.iter().map(|d| d.bbox).collect::<Vec<_>>(), b.iter().map(|d| d.bbox).collect::<Vec<_>>());
    assert_eq!(a.len(), 1);
}
