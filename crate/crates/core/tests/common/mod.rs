//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use diqa::predict::{net, ArchDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct-loop evaluation of the block CNN, with parameter offsets derived
/// independently of the library's layout code.
pub fn oracle_forward(arch: &ArchDescriptor, params: &[f64], input: &[f64]) -> f64 {
    let (mut c, mut h, mut w) = (arch.channels, arch.height, arch.width);
    let mut x: Vec<f64> = input.to_vec();
    if arch.standardize_input {
        // Two-pass mean and population variance with the library's variance floor.
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = (var + net::STANDARDIZE_EPS).sqrt();
        x.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    }
    let mut off = 0;
    for &out in &arch.blocks {
        let weights = &params[off..off + out * c * 9];
        off += out * c * 9;
        let bias = &params[off..off + out];
        off += out;
        let mut conv = vec![0.0; out * h * w];
        for co in 0..out {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = bias[co];
                    for ci in 0..c {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let sy = y as i64 + ky as i64 - 1;
                                let sx = xx as i64 + kx as i64 - 1;
                                if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                                    continue;
                                }
                                acc += weights[((co * c + ci) * 3 + ky) * 3 + kx]
                                    * x[(ci * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    conv[(co * h + y) * w + xx] = acc.max(0.0);
                }
            }
        }
        let (ph, pw) = (h / 2, w / 2);
        let mut pooled = vec![0.0; out * ph * pw];
        for co in 0..out {
            for y in 0..ph {
                for xx in 0..pw {
                    let at = |dy: usize, dx: usize| conv[(co * h + 2 * y + dy) * w + 2 * xx + dx];
                    pooled[(co * ph + y) * pw + xx] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
                }
            }
        }
        x = pooled;
        c = out;
        h = ph;
        w = pw;
    }
    let mut y = params[off + c];
    for ci in 0..c {
        let mean = x[ci * h * w..(ci + 1) * h * w].iter().sum::<f64>() / (h * w) as f64;
        y += params[off + ci] * mean;
    }
    y
}

pub struct GradProblem {
    pub arch: ArchDescriptor,
    pub params: Vec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

pub fn random_problem(arch: ArchDescriptor, batch: usize, seed: u64) -> GradProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = (0..arch.param_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let inputs = (0..batch)
        .map(|_| (0..arch.input_len()).map(|_| rng.random::<f64>()).collect())
        .collect();
    let targets = (0..batch).map(|_| rng.random::<f64>()).collect();
    GradProblem {
        arch,
        params,
        inputs,
        targets,
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter.
pub fn max_gradient_error(p: &GradProblem, weight_decay: f64, step: f64) -> f64 {
    let inputs: Vec<&[f64]> = p.inputs.iter().map(|x| x.as_slice()).collect();
    let analytic = net::batch_gradients(&p.arch, &p.params, &inputs, &p.targets, weight_decay)
        .unwrap()
        .grad;
    let objective = |params: &[f64]| {
        net::objective(&p.arch, params, &inputs, &p.targets, weight_decay).unwrap()
    };
    let mut worst: f64 = 0.0;
    let mut params = p.params.clone();
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + step;
        let up = objective(&params);
        params[i] = orig - step;
        let down = objective(&params);
        params[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

pub fn gradient_check_archs() -> Vec<ArchDescriptor> {
    vec![
        ArchDescriptor::new(1, 4, 4, vec![2, 3]).unwrap(),
        ArchDescriptor::new(2, 6, 8, vec![3, 2]).unwrap(),
        ArchDescriptor::new(1, 8, 10, vec![2, 3, 2]).unwrap(),
        ArchDescriptor::new(1, 6, 12, vec![3, 2])
            .unwrap()
            .with_standardized_input(true),
    ]
}

/// Brute-force Pearson via the covariance formula.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Average ranks by counting, O(n^2).
pub fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_oracle(&rank_oracle(x), &rank_oracle(y))
}
