//! Stage one: text-line localisation.
//!
//! Any detector implementing [`TextLineDetector`] can drive the pipeline. The
//! bundled [`BaselineDetector`] binarizes, smears short horizontal background
//! runs so characters fuse into line-shaped blobs, and keeps connected
//! components whose boxes look like text lines.

mod binarize;
mod components;

pub use binarize::{adaptive_mean_threshold, otsu_threshold, Binarization};
pub use components::{connected_components, smear_horizontal};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{divide, resize_bilinear, GrayImage, GridSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        BoundingBox { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn intersection(&self, other: &BoundingBox) -> usize {
        let w = self.right().min(other.right()).saturating_sub(self.x.max(other.x));
        let h = self.bottom().min(other.bottom()).saturating_sub(self.y.max(other.y));
        w * h
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other) as f64;
        let union = (self.area() + other.area()) as f64 - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }
}

#[derive(Clone, Debug)]
pub struct DetectedLine {
    pub bbox: BoundingBox,
    pub crop: GrayImage,
    pub source_segment: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub binarization: Binarization,
    pub smear_gap_px: usize,
    pub min_height_px: usize,
    pub max_height_px: usize,
    pub min_width_px: usize,
    pub min_fill_ratio: f64,
    /// Side-by-side components are joined when they overlap vertically by
    /// half the shorter height and the gap is at most this times the taller
    /// height. Zero disables grouping.
    #[serde(default = "default_group_gap_ratio")]
    pub group_gap_ratio: f64,
    /// Images whose intensity range is below this are treated as blank.
    pub min_contrast: u8,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            binarization: Binarization::Otsu,
            smear_gap_px: 12,
            min_height_px: 8,
            max_height_px: 120,
            min_width_px: 16,
            min_fill_ratio: 0.05,
            group_gap_ratio: default_group_gap_ratio(),
            min_contrast: 32,
        }
    }
}

fn default_group_gap_ratio() -> f64 {
    1.0
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.smear_gap_px == 0 || self.min_height_px == 0 || self.min_width_px == 0 {
            return Err(Error::param("detector thresholds must be positive"));
        }
        if self.min_height_px >= self.max_height_px {
            return Err(Error::param("min_height_px must be below max_height_px"));
        }
        if !(self.min_fill_ratio > 0.0 && self.min_fill_ratio <= 1.0) {
            return Err(Error::param("min_fill_ratio must lie in (0, 1]"));
        }
        if !(self.group_gap_ratio >= 0.0 && self.group_gap_ratio.is_finite()) {
            return Err(Error::param("group_gap_ratio must be finite and non-negative"));
        }
        if let Binarization::AdaptiveMean { window, .. } = self.binarization {
            if window == 0 {
                return Err(Error::param("adaptive window must be positive"));
            }
        }
        Ok(())
    }
}

/// Anything that maps an image to text-line boxes.
pub trait TextLineDetector: Send + Sync {
    fn detect(&self, img: &GrayImage) -> Result<Vec<DetectedLine>>;
}

impl<F> TextLineDetector for F
where
    F: Fn(&GrayImage) -> Result<Vec<DetectedLine>> + Send + Sync,
{
    fn detect(&self, img: &GrayImage) -> Result<Vec<DetectedLine>> {
        self(img)
    }
}

/// Binarize, smear, label, filter.
#[derive(Clone, Debug, Default)]
pub struct BaselineDetector {
    pub params: DetectorParams,
}

impl BaselineDetector {
    pub fn new(params: DetectorParams) -> Result<Self> {
        params.validate()?;
        Ok(BaselineDetector { params })
    }
}

impl TextLineDetector for BaselineDetector {
    fn detect(&self, img: &GrayImage) -> Result<Vec<DetectedLine>> {
        detect(img, &self.params)
    }
}

/// Detection on each grid segment, boxes translated back to page coordinates.
#[derive(Clone, Debug)]
pub struct DividingDetector<D> {
    pub inner: D,
    pub grid: GridSpec,
}

impl<D: TextLineDetector> TextLineDetector for DividingDetector<D> {
    fn detect(&self, img: &GrayImage) -> Result<Vec<DetectedLine>> {
        detect_divided_with(&self.inner, img, self.grid)
    }
}

/// Detection on a resampled copy, boxes scaled back to page coordinates.
#[derive(Clone, Debug)]
pub struct ResizingDetector<D> {
    pub inner: D,
    pub target: (usize, usize),
}

impl<D: TextLineDetector> TextLineDetector for ResizingDetector<D> {
    fn detect(&self, img: &GrayImage) -> Result<Vec<DetectedLine>> {
        detect_resized_with(&self.inner, img, self.target)
    }
}

/// Runs the baseline detector on the whole image.
pub fn detect(img: &GrayImage, params: &DetectorParams) -> Result<Vec<DetectedLine>> {
    params.validate()?;
    let (lo, hi) = img.min_max();
    if hi - lo < params.min_contrast {
        return Ok(Vec::new());
    }
    let (w, h) = (img.width(), img.height());
    let mask = params.binarization.apply(img);
    let smeared = smear_horizontal(&mask, w, h, params.smear_gap_px);
    let mut boxes: Vec<BoundingBox> = group_fragments(connected_components(&smeared, w, h), params.group_gap_ratio)
        .into_iter()
        .filter(|b| {
            b.h >= params.min_height_px && b.h <= params.max_height_px && b.w >= params.min_width_px
        })
        .filter(|b| {
            let mut ink = 0usize;
            for y in b.y..b.bottom() {
                ink += mask[y * w + b.x..y * w + b.right()].iter().filter(|&&m| m).count();
            }
            ink as f64 / b.area() as f64 >= params.min_fill_ratio
        })
        .collect();
    boxes.sort_by_key(|b| (b.y, b.x, b.h, b.w));
    boxes
        .into_iter()
        .map(|b| {
            Ok(DetectedLine {
                bbox: b,
                crop: img.crop(b.x, b.y, b.w, b.h)?,
                source_segment: None,
            })
        })
        .collect()
}

fn union(a: &BoundingBox, b: &BoundingBox) -> BoundingBox {
    let (x, y) = (a.x.min(b.x), a.y.min(b.y));
    BoundingBox::new(x, y, a.right().max(b.right()) - x, a.bottom().max(b.bottom()) - y)
}

/// Joins word-level pieces of one line that smearing left apart.
pub fn group_fragments(mut boxes: Vec<BoundingBox>, gap_ratio: f64) -> Vec<BoundingBox> {
    if gap_ratio <= 0.0 {
        return boxes;
    }
    let joinable = |a: &BoundingBox, b: &BoundingBox| {
        let overlap = a.bottom().min(b.bottom()).saturating_sub(a.y.max(b.y));
        let gap = b.x.saturating_sub(a.right()).max(a.x.saturating_sub(b.right()));
        2 * overlap >= a.h.min(b.h) && gap as f64 <= gap_ratio * a.h.max(b.h) as f64
    };
    loop {
        let mut merged = false;
        let mut i = 0;
        while i < boxes.len() {
            let mut j = i + 1;
            while j < boxes.len() {
                if joinable(&boxes[i], &boxes[j]) {
                    boxes[i] = union(&boxes[i], &boxes[j]);
                    boxes.swap_remove(j);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        if !merged {
            return boxes;
        }
    }
}

/// Runs any detector per grid segment; boxes come back in page coordinates,
/// grouped by segment in row-major order.
pub fn detect_divided_with<D: TextLineDetector + ?Sized>(
    detector: &D,
    img: &GrayImage,
    grid: GridSpec,
) -> Result<Vec<DetectedLine>> {
    let segments = divide(img, grid)?;
    let per_segment: Vec<Result<Vec<DetectedLine>>> = segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let (ox, oy) = seg.offset;
            Ok(detector
                .detect(&seg.image)?
                .into_iter()
                .map(|mut d| {
                    d.bbox.x += ox;
                    d.bbox.y += oy;
                    d.source_segment = Some(i);
                    d
                })
                .collect())
        })
        .collect();
    let mut out = Vec::new();
    for lines in per_segment {
        out.extend(lines?);
    }
    Ok(out)
}

/// Divide-and-conquer detection: no box merging across segment borders.
pub fn detect_with_dividing(
    img: &GrayImage,
    grid: GridSpec,
    params: &DetectorParams,
) -> Result<Vec<DetectedLine>> {
    params.validate()?;
    detect_divided_with(&BaselineDetector::new(params.clone())?, img, grid)
}

pub fn detect_resized_with<D: TextLineDetector + ?Sized>(
    detector: &D,
    img: &GrayImage,
    target: (usize, usize),
) -> Result<Vec<DetectedLine>> {
    let (tw, th) = target;
    if tw == 0 || th == 0 {
        return Err(Error::param("resize target must be positive"));
    }
    let (w, h) = (img.width(), img.height());
    if (tw, th) == (w, h) {
        return detector.detect(img);
    }
    let small = resize_bilinear(img, tw, th)?;
    let sx = w as f64 / tw as f64;
    let sy = h as f64 / th as f64;
    detector
        .detect(&small)?
        .into_iter()
        .map(|d| {
            let b = d.bbox;
            let x0 = ((b.x as f64 * sx).floor() as usize).min(w - 1);
            let y0 = ((b.y as f64 * sy).floor() as usize).min(h - 1);
            let x1 = ((b.right() as f64 * sx).ceil() as usize).clamp(x0 + 1, w);
            let y1 = ((b.bottom() as f64 * sy).ceil() as usize).clamp(y0 + 1, h);
            let bbox = BoundingBox::new(x0, y0, x1 - x0, y1 - y0);
            Ok(DetectedLine {
                bbox,
                crop: img.crop(bbox.x, bbox.y, bbox.w, bbox.h)?,
                source_segment: None,
            })
        })
        .collect()
}

/// Detects on a copy resampled to `target` and maps boxes back.
pub fn detect_resized(
    img: &GrayImage,
    target: (usize, usize),
    params: &DetectorParams,
) -> Result<Vec<DetectedLine>> {
    detect_resized_with(&BaselineDetector::new(params.clone())?, img, target)
}

/// Copy of `img` with a dark 2-pixel outline around every box.
pub fn draw_boxes(img: &GrayImage, boxes: &[BoundingBox]) -> GrayImage {
    let mut out = img.clone();
    let (w, h) = (img.width(), img.height());
    for b in boxes {
        for t in 0..2 {
            for x in b.x..b.right().min(w) {
                for y in [b.y + t, b.bottom().saturating_sub(1 + t)] {
                    if y < h {
                        out.set(x, y, 0);
                    }
                }
            }
            for y in b.y..b.bottom().min(h) {
                for x in [b.x + t, b.right().saturating_sub(1 + t)] {
                    if x < w {
                        out.set(x, y, 0);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_basics() {
        let a = BoundingBox::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&BoundingBox::new(20, 20, 5, 5)), 0.0);
        let b = BoundingBox::new(5, 0, 10, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn blank_images_yield_nothing() {
        let img = GrayImage::new(400, 600, 255);
        let p = DetectorParams::default();
        assert!(detect(&img, &p).unwrap().is_empty());
        assert!(detect_with_dividing(&img, GridSpec::default(), &p).unwrap().is_empty());
        assert!(detect_resized(&img, (200, 300), &p).unwrap().is_empty());
    }

    #[test]
    fn filled_bar_is_one_line() {
        let mut img = GrayImage::new(300, 100, 250);
        for y in 40..60 {
            for x in 30..230 {
                // Dashed bar: gaps shorter than the smear threshold.
                if x % 10 < 7 {
                    img.set(x, y, 10);
                }
            }
        }
        let lines = detect(&img, &DetectorParams::default()).unwrap();
        assert_eq!(lines.len(), 1);
        let b = lines[0].bbox;
        assert_eq!((b.x, b.y, b.h), (30, 40, 20));
        assert!(b.w >= 196 && b.w <= 200);
        assert_eq!((lines[0].crop.width(), lines[0].crop.height()), (b.w, b.h));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = DetectorParams {
            min_height_px: 200,
            ..DetectorParams::default()
        };
        assert!(detect(&GrayImage::new(10, 10, 0), &p).is_err());
    }

    #[test]
    fn grouping_joins_words_but_not_lines() {
        let words = vec![
            BoundingBox::new(10, 10, 50, 20),
            BoundingBox::new(75, 12, 40, 18),
            BoundingBox::new(300, 10, 30, 20),
            BoundingBox::new(10, 60, 80, 20),
        ];
        let mut g = group_fragments(words.clone(), 1.0);
        g.sort_by_key(|b| (b.y, b.x));
        assert_eq!(
            g,
            vec![
                BoundingBox::new(10, 10, 105, 20),
                BoundingBox::new(300, 10, 30, 20),
                BoundingBox::new(10, 60, 80, 20),
            ]
        );
        assert_eq!(group_fragments(words.clone(), 0.0), words);
    }

    #[test]
    fn closures_are_detectors() {
        let none = |_: &GrayImage| -> Result<Vec<DetectedLine>> { Ok(Vec::new()) };
        assert!(none.detect(&GrayImage::new(3, 3, 0)).unwrap().is_empty());
    }
}
