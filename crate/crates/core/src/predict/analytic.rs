//! Blur-level estimation for the model-free predictor.
//!
//! Both estimators use the exact truncated kernels of the synthesizer rather
//! than ideal Gaussians, since an 11-tap window changes the kernel noticeably
//! beyond σ ≈ 2.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::model::QualityScore;
use crate::error::{Error, Result};
use crate::imgproc::{blur_real, gaussian_kernel, gradient_energy_real, BlurSpec, GrayImage};
use crate::synth::{quality_label, LabelFnConfig, SIGMA_MAX, SIGMA_MIN};

/// Minimum intensity range for a crop to carry a usable blur signal.
pub const MIN_CONTRAST: u8 = 5;

const GRID_LO: f64 = 0.3;
const GRID_HI: f64 = 4.6;
const GRID_STEP: f64 = 0.01;
const MIN_FREQ: f64 = 0.05;
/// Power-law exponent of the sharp-text spectrum (piecewise-constant rows).
const CONTENT_SLOPE: f64 = 2.0;
const REFERENCE_SIGMA: f64 = 2.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaEstimator {
    /// Least-squares fit of the row power spectrum to
    /// `c·ω⁻²·|H_σ(ω)|² + quantization noise`.
    #[default]
    Spectral,
    /// Gradient energy after versus before one extra reference blur, inverted
    /// through a table built from a blurred step edge.
    GradientRatio,
}

/// Model-free line score: estimated σ mapped through the label function.
pub fn analytic_predict(crop: &GrayImage, label_fn: &LabelFnConfig) -> Result<QualityScore> {
    predict_with(crop, label_fn, SigmaEstimator::default())
}

pub(crate) fn predict_with(
    crop: &GrayImage,
    label_fn: &LabelFnConfig,
    estimator: SigmaEstimator,
) -> Result<QualityScore> {
    let sigma = estimate_sigma(crop, estimator)?;
    Ok(QualityScore::from_raw(quality_label(sigma, label_fn)?))
}

/// Estimated blur σ, clamped to the synthesis range.
pub fn estimate_sigma(crop: &GrayImage, estimator: SigmaEstimator) -> Result<f64> {
    let (lo, hi) = crop.min_max();
    if hi - lo < MIN_CONTRAST {
        return Err(Error::NoSignal(format!(
            "intensity range {} is below {MIN_CONTRAST}",
            hi - lo
        )));
    }
    let sigma = match estimator {
        SigmaEstimator::Spectral => spectral_sigma(crop)?,
        SigmaEstimator::GradientRatio => gradient_ratio_sigma(crop)?,
    };
    Ok(sigma.clamp(SIGMA_MIN, SIGMA_MAX))
}

fn sigma_grid() -> impl Iterator<Item = f64> {
    let n = ((GRID_HI - GRID_LO) / GRID_STEP).round() as usize;
    (0..=n).map(|i| GRID_LO + i as f64 * GRID_STEP)
}

/// Squared magnitude of a symmetric kernel's frequency response.
fn kernel_power(kernel: &[f64], omega: f64) -> f64 {
    let r = (kernel.len() / 2) as f64;
    let h: f64 = kernel
        .iter()
        .enumerate()
        .map(|(i, &k)| k * ((i as f64 - r) * omega).cos())
        .sum();
    h * h
}

/// Row-averaged power spectrum of the Hann-windowed, mean-removed rows, for
/// frequencies `2πk/W`, `k = 1..=W/2`. Also returns the expected power of
/// rounding noise under the same window.
fn row_spectrum(img: &GrayImage) -> (Vec<f64>, Vec<f64>, f64) {
    let w = img.width();
    let window: Vec<f64> = (0..w)
        .map(|i| {
            if w == 1 {
                1.0
            } else {
                0.5 - 0.5 * (2.0 * PI * i as f64 / (w - 1) as f64).cos()
            }
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(w);
    let half = w / 2;
    let mut power = vec![0.0; half];
    let mut buf = vec![Complex::new(0.0, 0.0); w];
    for y in 0..img.height() {
        let row = &img.pixels()[y * w..(y + 1) * w];
        let mean = row.iter().map(|&p| f64::from(p)).sum::<f64>() / w as f64;
        for ((b, &p), &win) in buf.iter_mut().zip(row).zip(&window) {
            *b = Complex::new((f64::from(p) - mean) * win, 0.0);
        }
        fft.process(&mut buf);
        for (acc, c) in power.iter_mut().zip(&buf[1..=half]) {
            *acc += c.norm_sqr();
        }
    }
    let rows = img.height() as f64;
    power.iter_mut().for_each(|p| *p /= rows);
    let omega = (1..=half).map(|k| 2.0 * PI * k as f64 / w as f64).collect();
    let noise = window.iter().map(|v| v * v).sum::<f64>() / 12.0;
    (omega, power, noise)
}

fn spectral_sigma(crop: &GrayImage) -> Result<f64> {
    let (omega, power, noise) = row_spectrum(crop);
    let (omega, log_power): (Vec<f64>, Vec<f64>) = omega
        .iter()
        .zip(&power)
        .filter(|(&o, _)| o > MIN_FREQ)
        .map(|(&o, &p)| (o, p.max(1e-9).ln()))
        .unzip();
    if omega.len() < 4 {
        return Err(Error::NoSignal(format!(
            "crop width {} is too narrow for blur estimation",
            crop.width()
        )));
    }
    let content: Vec<f64> = omega.iter().map(|o| -CONTENT_SLOPE * o.ln()).collect();

    let mut best = (f64::INFINITY, f64::NAN);
    let mut shape = vec![0.0; omega.len()];
    let mut diff = vec![0.0; omega.len()];
    for sigma in sigma_grid() {
        let kernel = truncated_kernel(sigma);
        for ((s, &o), &c) in shape.iter_mut().zip(&omega).zip(&content) {
            *s = c + (kernel_power(&kernel, o) + 1e-12).ln();
        }
        for ((d, &y), &s) in diff.iter_mut().zip(&log_power).zip(&shape) {
            *d = y - s;
        }
        let mut level = median(&mut diff.clone());
        // A few Gauss-Newton steps on the log-scale once the noise floor is added.
        for _ in 0..3 {
            let (mut num, mut den) = (0.0, 0.0);
            for (&y, &s) in log_power.iter().zip(&shape) {
                let e = (level + s).exp();
                let d = e / (e + noise);
                num += (y - (e + noise).ln()) * d;
                den += d * d;
            }
            level += num / den.max(1e-9);
        }
        let resid: f64 = log_power
            .iter()
            .zip(&shape)
            .map(|(&y, &s)| (y - ((level + s).exp() + noise).ln()).powi(2))
            .sum();
        if resid < best.0 {
            best = (resid, sigma);
        }
    }
    Ok(best.1)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn truncated_kernel(sigma: f64) -> Vec<f64> {
    gaussian_kernel(&BlurSpec::new(sigma)).expect("grid sigmas are positive")
}

/// On a single row the vertical pass of the separable blur is the identity.
fn blur_1d(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    blur_real(signal, signal.len(), 1, kernel)
}

fn diff_energy(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
}

/// Gradient-energy ratio of a pixel-area-sampled step edge blurred at `sigma`,
/// averaged over four sub-pixel edge phases.
pub(crate) fn step_edge_ratio(sigma: f64) -> f64 {
    let kernel = truncated_kernel(sigma);
    let reference = truncated_kernel(REFERENCE_SIGMA);
    let n = 64;
    let mut total = 0.0;
    for phase in [0.0, 0.25, 0.5, 0.75] {
        let edge = n as f64 / 2.0 + phase;
        let step: Vec<f64> = (0..n)
            .map(|i| (i as f64 + 1.0 - edge).clamp(0.0, 1.0))
            .collect();
        let once = blur_1d(&step, &kernel);
        let twice = blur_1d(&once, &reference);
        total += diff_energy(&twice) / diff_energy(&once);
    }
    total / 4.0
}

/// (σ, ratio) pairs with the ratio made non-decreasing in σ.
fn ratio_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut running = f64::NEG_INFINITY;
        sigma_grid()
            .map(|s| {
                running = running.max(step_edge_ratio(s));
                (s, running)
            })
            .collect()
    })
}

fn gradient_ratio_sigma(crop: &GrayImage) -> Result<f64> {
    let (w, h) = (crop.width(), crop.height());
    let real = crop.to_real();
    let e0 = gradient_energy_real(&real, w, h);
    if e0 <= 0.0 {
        return Err(Error::NoSignal("zero gradient energy".into()));
    }
    let reference = truncated_kernel(REFERENCE_SIGMA);
    let e1 = gradient_energy_real(&blur_real(&real, w, h, &reference), w, h);
    let rho = e1 / e0;
    let table = ratio_table();
    let pos = table.partition_point(|&(_, r)| r < rho);
    Ok(match pos {
        0 => table[0].0,
        p if p == table.len() => table[p - 1].0,
        p => {
            let (s0, r0) = table[p - 1];
            let (s1, r1) = table[p];
            if r1 > r0 {
                s0 + (s1 - s0) * (rho - r0) / (r1 - r0)
            } else {
                s0
            }
        }
    })
}
