use serde::{Deserialize, Serialize};

use crate::imgproc::GrayImage;

/// How ink is separated from background. Foreground means dark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Binarization {
    Otsu,
    /// Foreground where a pixel is darker than its local mean by more than `offset`.
    AdaptiveMean { window: usize, offset: f64 },
}

impl Binarization {
    pub fn apply(&self, img: &GrayImage) -> Vec<bool> {
        match *self {
            Binarization::Otsu => {
                let t = otsu_threshold(img);
                img.pixels().iter().map(|&p| p <= t).collect()
            }
            Binarization::AdaptiveMean { window, offset } => {
                adaptive_mean_threshold(img, window, offset)
            }
        }
    }
}

/// Threshold maximizing between-class variance; pixels `<= t` are the dark class.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_t, mut best_var) = (0u8, -1.0);
    for (t, &c) in hist.iter().enumerate() {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

pub fn adaptive_mean_threshold(img: &GrayImage, window: usize, offset: f64) -> Vec<bool> {
    let (w, h) = (img.width(), img.height());
    // Integral image with a zero row and column.
    let mut integral = vec![0u64; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        for x in 0..w {
            row += u64::from(img.get(x, y));
            integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
        }
    }
    let r = window / 2;
    let mut out = vec![false; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let s = integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0];
            let mean = s as f64 / ((x1 - x0) * (y1 - y0)) as f64;
            out[y * w + x] = f64::from(img.get(x, y)) < mean - offset;
        }
    }
    out
}
