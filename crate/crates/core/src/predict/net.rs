//! Forward and backward passes of the block CNN, generic over `f32` (training
//! and inference) and `f64` (gradient checking).

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use rayon::prelude::*;

use super::arch::{ArchDescriptor, ParamLayout};
use crate::error::{Error, Result};

pub trait Scalar: Float + Sum + Default + Debug + Send + Sync + 'static {
    /// `c = alpha * a * b + beta * c` on strided row/column-major views.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    );

    fn from_f64_lossy(v: f64) -> Self;
}

fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) as isize * rs + (cols - 1) as isize * cs;
    assert!(
        rs >= 0 && cs >= 0 && (last as usize) < len,
        "gemm operand out of bounds"
    );
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                beta: Self,
                c: (&mut [Self], isize, isize),
            ) {
                check_extent(a.0.len(), m, k, a.1, a.2);
                check_extent(b.0.len(), k, n, b.1, b.2);
                check_extent(c.0.len(), m, n, c.1, c.2);
                // SAFETY: every operand's extent was bounds-checked above.
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        1.0,
                        a.0.as_ptr(),
                        a.1,
                        a.2,
                        b.0.as_ptr(),
                        b.1,
                        b.2,
                        beta,
                        c.0.as_mut_ptr(),
                        c.1,
                        c.2,
                    )
                }
            }

            fn from_f64_lossy(v: f64) -> Self {
                v as $t
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Scratch buffers for one forward/backward pass. Reusing a workspace across
/// samples avoids reallocating the large im2col matrices.
pub struct Workspace<T> {
    layout: ParamLayout,
    standardize: bool,
    input: Vec<T>,
    cols: Vec<Vec<T>>,
    act: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    pooled: Vec<Vec<T>>,
    features: Vec<T>,
    d_act: Vec<T>,
    d_cols: Vec<T>,
    d_pooled: Vec<T>,
    d_input: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub fn new(arch: &ArchDescriptor) -> Self {
        let layout = arch.layout();
        let mut ws = Workspace {
            cols: Vec::new(),
            act: Vec::new(),
            argmax: Vec::new(),
            pooled: Vec::new(),
            features: vec![T::zero(); arch.feature_len()],
            d_act: Vec::new(),
            d_cols: Vec::new(),
            d_pooled: Vec::new(),
            d_input: Vec::new(),
            standardize: arch.standardize_input,
            input: Vec::new(),
            layout: layout.clone(),
        };
        for l in &layout.convs {
            let hw = l.height * l.width;
            let pooled = l.out_channels * l.pooled_height() * l.pooled_width();
            ws.cols.push(vec![T::zero(); l.fan_in() * hw]);
            ws.act.push(vec![T::zero(); l.out_channels * hw]);
            ws.argmax.push(vec![0; pooled]);
            ws.pooled.push(vec![T::zero(); pooled]);
        }
        ws
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Global-average-pooled features from the latest forward pass.
    pub fn features(&self) -> &[T] {
        &self.features
    }
}

/// Unrolls 3x3 zero-padded neighbourhoods: row `c*9 + ky*3 + kx`, column `y*w + x`.
fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the input.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
    let hw = h * w;
    out[..c * hw].fill(T::zero());
    for ci in 0..c {
        let plane = &mut out[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1]
                            .iter_mut()
                            .zip(&src[1..])
                            .for_each(|(d, &s)| *d = *d + s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s),
                        _ => dst[1..]
                            .iter_mut()
                            .zip(&src[..w - 1])
                            .for_each(|(d, &s)| *d = *d + s),
                    }
                }
            }
        }
    }
}

/// Zero mean, unit variance; a constant input maps to zeros.
pub fn standardize<T: Scalar>(input: &[T], out: &mut Vec<T>) {
    let n = T::from_f64_lossy(input.len() as f64);
    let mean = input.iter().copied().sum::<T>() / n;
    let var = input.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    let scale = T::one() / (var + T::from_f64_lossy(STANDARDIZE_EPS)).sqrt();
    out.clear();
    out.extend(input.iter().map(|&v| (v - mean) * scale));
}

/// Variance floor for input standardization, in squared [0, 1] intensity units.
pub const STANDARDIZE_EPS: f64 = 1e-4;

/// Raw (unclamped) network output for one input.
pub fn forward<T: Scalar>(params: &[T], input: &[T], ws: &mut Workspace<T>) -> T {
    if ws.standardize {
        let mut buf = std::mem::take(&mut ws.input);
        standardize(input, &mut buf);
        let out = forward_raw(params, &buf, ws);
        ws.input = buf;
        out
    } else {
        forward_raw(params, input, ws)
    }
}

fn forward_raw<T: Scalar>(params: &[T], input: &[T], ws: &mut Workspace<T>) -> T {
    let layout = &ws.layout;
    assert_eq!(params.len(), layout.total, "parameter vector length");
    for (i, l) in layout.convs.iter().enumerate() {
        let hw = l.height * l.width;
        let k = l.fan_in();
        {
            let src: &[T] = if i == 0 { input } else { &ws.pooled[i - 1] };
            assert_eq!(src.len(), l.in_channels * hw, "block input length");
            im2col(src, l.in_channels, l.height, l.width, &mut ws.cols[i]);
        }
        let weights = &params[l.weight_offset..l.weight_offset + l.weight_len()];
        let act = &mut ws.act[i];
        T::gemm(
            l.out_channels,
            k,
            hw,
            (weights, k as isize, 1),
            (&ws.cols[i], hw as isize, 1),
            T::zero(),
            (act, hw as isize, 1),
        );
        for (co, plane) in act.chunks_exact_mut(hw).enumerate() {
            let b = params[l.bias_offset + co];
            plane.iter_mut().for_each(|v| *v = (*v + b).max(T::zero()));
        }
        let (ph, pw) = (l.pooled_height(), l.pooled_width());
        let pooled = &mut ws.pooled[i];
        let argmax = &mut ws.argmax[i];
        for co in 0..l.out_channels {
            for py in 0..ph {
                for px in 0..pw {
                    let base = co * hw + 2 * py * l.width + 2 * px;
                    let mut best = base;
                    for cand in [base + 1, base + l.width, base + l.width + 1] {
                        if act[cand] > act[best] {
                            best = cand;
                        }
                    }
                    let o = (co * ph + py) * pw + px;
                    pooled[o] = act[best];
                    argmax[o] = best as u32;
                }
            }
        }
    }
    let last = ws.pooled.last().expect("at least one block");
    let n = T::from_f64_lossy((last.len() / ws.features.len()) as f64);
    let per = last.len() / ws.features.len();
    for (f, plane) in ws.features.iter_mut().zip(last.chunks_exact(per)) {
        *f = plane.iter().copied().sum::<T>() / n;
    }
    let head = &params[layout.head_weight_offset..layout.head_bias_offset];
    head.iter()
        .zip(&ws.features)
        .map(|(&w, &f)| w * f)
        .sum::<T>()
        + params[layout.head_bias_offset]
}

/// Accumulates `d_out * d(output)/d(params)` into `grad`, using the
/// activations cached by the preceding [`forward`] call on `ws`.
pub fn backward<T: Scalar>(params: &[T], d_out: T, ws: &mut Workspace<T>, grad: &mut [T]) {
    let layout = ws.layout.clone();
    let hw_off = layout.head_weight_offset;
    for (c, &f) in ws.features.iter().enumerate() {
        grad[hw_off + c] = grad[hw_off + c] + d_out * f;
    }
    grad[layout.head_bias_offset] = grad[layout.head_bias_offset] + d_out;

    let last = layout.convs.last().expect("at least one block");
    let per = last.pooled_height() * last.pooled_width();
    let inv = T::one() / T::from_f64_lossy(per as f64);
    ws.d_pooled.clear();
    for c in 0..ws.features.len() {
        let g = d_out * params[hw_off + c] * inv;
        ws.d_pooled.extend(std::iter::repeat_n(g, per));
    }

    for (i, l) in layout.convs.iter().enumerate().rev() {
        let hw = l.height * l.width;
        let k = l.fan_in();
        ws.d_act.clear();
        ws.d_act.resize(l.out_channels * hw, T::zero());
        for (&g, &idx) in ws.d_pooled.iter().zip(&ws.argmax[i]) {
            let idx = idx as usize;
            if ws.act[i][idx] > T::zero() {
                ws.d_act[idx] = ws.d_act[idx] + g;
            }
        }
        for (co, plane) in ws.d_act.chunks_exact(hw).enumerate() {
            let b = l.bias_offset + co;
            grad[b] = grad[b] + plane.iter().copied().sum::<T>();
        }
        let gw = &mut grad[l.weight_offset..l.weight_offset + l.weight_len()];
        T::gemm(
            l.out_channels,
            hw,
            k,
            (&ws.d_act, hw as isize, 1),
            (&ws.cols[i], 1, hw as isize),
            T::one(),
            (gw, k as isize, 1),
        );
        if i == 0 {
            break;
        }
        let weights = &params[l.weight_offset..l.weight_offset + l.weight_len()];
        ws.d_cols.resize(k * hw, T::zero());
        T::gemm(
            k,
            l.out_channels,
            hw,
            (weights, 1, k as isize),
            (&ws.d_act, hw as isize, 1),
            T::zero(),
            (&mut ws.d_cols, hw as isize, 1),
        );
        ws.d_input.resize(l.in_channels * hw, T::zero());
        col2im(&ws.d_cols, l.in_channels, l.height, l.width, &mut ws.d_input);
        std::mem::swap(&mut ws.d_pooled, &mut ws.d_input);
        ws.d_pooled.truncate(l.in_channels * hw);
    }
}

/// Mean squared error over a batch.
pub fn loss_batch<T: Scalar>(preds: &[T], targets: &[T]) -> Result<T> {
    if preds.len() != targets.len() {
        return Err(Error::param(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::param("empty batch"));
    }
    let n = T::from_f64_lossy(preds.len() as f64);
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        / n)
}

/// Batch loss plus `weight_decay / 2 * |params|^2`: the objective whose
/// gradient [`batch_gradients`] returns.
pub fn objective<T: Scalar>(
    arch: &ArchDescriptor,
    params: &[T],
    inputs: &[&[T]],
    targets: &[T],
    weight_decay: T,
) -> Result<T> {
    let mut ws = Workspace::new(arch);
    let preds: Vec<T> = inputs.iter().map(|x| forward(params, x, &mut ws)).collect();
    let half = T::from_f64_lossy(0.5);
    let l2 = params.iter().map(|&p| p * p).sum::<T>();
    Ok(loss_batch(&preds, targets)? + half * weight_decay * l2)
}

pub struct BatchGradient<T> {
    /// Mean squared error of the batch, without the decay term.
    pub loss: T,
    pub grad: Vec<T>,
}

/// Exact gradient of [`objective`].
///
/// Per-sample gradients are computed in parallel and summed in sample order,
/// so the result does not depend on the thread count.
pub fn batch_gradients<T: Scalar>(
    arch: &ArchDescriptor,
    params: &[T],
    inputs: &[&[T]],
    targets: &[T],
    weight_decay: T,
) -> Result<BatchGradient<T>> {
    if inputs.is_empty() {
        return Err(Error::param("empty batch"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::param(format!(
            "{} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let want = arch.input_len();
    if let Some(bad) = inputs.iter().position(|x| x.len() != want) {
        return Err(Error::param(format!(
            "input {bad} has {} values, architecture expects {want}",
            inputs[bad].len()
        )));
    }
    let n = T::from_f64_lossy(inputs.len() as f64);
    let two = T::from_f64_lossy(2.0);
    let per_sample: Vec<(T, Vec<T>)> = inputs
        .par_iter()
        .zip(targets.par_iter())
        .map_init(
            || Workspace::new(arch),
            |ws, (x, &t)| {
                let pred = forward(params, x, ws);
                let mut g = vec![T::zero(); params.len()];
                backward(params, two * (pred - t) / n, ws, &mut g);
                (pred, g)
            },
        )
        .collect();

    let mut grad: Vec<T> = params.iter().map(|&p| weight_decay * p).collect();
    let mut sq = T::zero();
    for ((pred, g), &t) in per_sample.iter().zip(targets) {
        if !pred.is_finite() {
            return Err(Error::Training(format!(
                "non-finite network output {pred:?} for target {t:?}"
            )));
        }
        sq = sq + (*pred - t) * (*pred - t);
        grad.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b);
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Training(format!("non-finite gradient at parameter {i}")));
    }
    Ok(BatchGradient { loss: sq / n, grad })
}
