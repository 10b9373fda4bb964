use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// Window length of the degradation kernel used throughout the toolkit.
pub const DEFAULT_KERNEL_SIZE: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurSpec {
    pub sigma: f64,
    pub kernel_size: usize,
}

impl BlurSpec {
    pub fn new(sigma: f64) -> Self {
        BlurSpec {
            sigma,
            kernel_size: DEFAULT_KERNEL_SIZE,
        }
    }

    pub fn with_kernel_size(sigma: f64, kernel_size: usize) -> Self {
        BlurSpec { sigma, kernel_size }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::param(format!(
                "kernel size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param(format!(
                "blur sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Truncated 1-D Gaussian of the given odd length, renormalized to sum 1.
pub fn gaussian_kernel(spec: &BlurSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let r = (spec.kernel_size / 2) as f64;
    let two_var = 2.0 * spec.sigma * spec.sigma;
    let mut k: Vec<f64> = (0..spec.kernel_size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / two_var).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    Ok(k)
}

/// Separable convolution of a real-valued image with replicated borders.
///
/// `kernel` is applied along rows and then along columns.
pub fn blur_real(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), width * height);
    let r = (kernel.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; width * height];
    for y in 0..height {
        let row = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp(x as isize + t as isize - r, width)];
            }
            tmp[y * width + x] = acc;
        }
    }

    let mut out = vec![0.0; width * height];
    for y in 0..height {
        for (t, &kv) in kernel.iter().enumerate() {
            let src = clamp(y as isize + t as isize - r, height);
            let src_row = &tmp[src * width..(src + 1) * width];
            let dst_row = &mut out[y * width..(y + 1) * width];
            for (d, &s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Gaussian blur by separable convolution with a truncated, renormalized kernel.
pub fn gaussian_blur(img: &GrayImage, spec: &BlurSpec) -> Result<GrayImage> {
    let kernel = gaussian_kernel(spec)?;
    let out = blur_real(&img.to_real(), img.width(), img.height(), &kernel);
    GrayImage::from_real(img.width(), img.height(), &out)
}
