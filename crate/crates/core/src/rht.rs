//! Randomized Hadamard transform for incoherence preprocessing.
//!
//! Conjugating `W` and `H` by `H_L = (1/√n)·Had·diag(s_L)` and
//! `H_R = (1/√d)·Had·diag(s_R)` equalizes entry magnitudes before
//! quantization while leaving the calibration-weighted objective unchanged.
//! Non-power-of-two shapes are zero-padded up front and cropped on the way
//! back out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::mix;

/// Sign vectors and padding bookkeeping for one transform pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhtContext {
    pub seed: u64,
    left_signs: Vec<f64>,
    right_signs: Vec<f64>,
    original_shape: (usize, usize),
    padded_shape: (usize, usize),
}

fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

fn rademacher(seed: u64, tag: u64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| if mix(seed, tag, i as u64) & 1 == 0 { 1.0 } else { -1.0 })
        .collect()
}

impl RhtContext {
    pub fn new(n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::shape("rht context requires positive dimensions"));
        }
        let (np, dp) = (next_pow2(n), next_pow2(d));
        Ok(Self {
            seed,
            left_signs: rademacher(seed, 0x11, np),
            right_signs: rademacher(seed, 0x22, dp),
            original_shape: (n, d),
            padded_shape: (np, dp),
        })
    }

    pub fn original_shape(&self) -> (usize, usize) {
        self.original_shape
    }

    pub fn padded_shape(&self) -> (usize, usize) {
        self.padded_shape
    }

    pub fn left_signs(&self) -> &[f64] {
        &self.left_signs
    }

    pub fn right_signs(&self) -> &[f64] {
        &self.right_signs
    }
}

/// In-place fast Walsh-Hadamard transform; `data.len()` must be a power of two.
fn fwht(data: &mut [f64]) {
    let n = data.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let a = data[j];
                let b = data[j + h];
                data[j] = a + b;
                data[j + h] = a - b;
            }
            i += h * 2;
        }
        h *= 2;
    }
}

fn zero_pad(w: &Matrix, shape: (usize, usize)) -> Matrix {
    let mut out = Matrix::zeros(shape.0, shape.1);
    out.view_mut((0, 0), (w.nrows(), w.ncols())).copy_from(w);
    out
}

/// Apply `v ← (1/√n)·Had·diag(signs)·v` to every column (`transpose = false`)
/// or `v ← diag(signs)·Had·v/√n` (`transpose = true`) — the two orders are
/// the transform and its transpose.
fn apply_columns(w: &mut Matrix, signs: &[f64], transpose: bool) {
    let n = w.nrows();
    let scale = 1.0 / (n as f64).sqrt();
    let mut buf = vec![0.0; n];
    for j in 0..w.ncols() {
        for i in 0..n {
            buf[i] = if transpose { w[(i, j)] } else { w[(i, j)] * signs[i] };
        }
        fwht(&mut buf);
        for i in 0..n {
            w[(i, j)] = if transpose {
                buf[i] * scale * signs[i]
            } else {
                buf[i] * scale
            };
        }
    }
}

/// `W̃ = H_Lᵀ·W_pad·H_R`.
pub fn rht_forward(w: &Matrix, ctx: &RhtContext) -> Result<Matrix> {
    if w.nrows() != ctx.original_shape.0 || w.ncols() != ctx.original_shape.1 {
        return Err(Error::shape(format!(
            "rht_forward expected {:?}, got {}x{}",
            ctx.original_shape,
            w.nrows(),
            w.ncols()
        )));
    }
    let mut p = zero_pad(w, ctx.padded_shape);
    // H_Lᵀ·P: columns through diag(s_L) then Hadamard.
    apply_columns(&mut p, &ctx.left_signs, true);
    // P·H_R = (H_Rᵀ·Pᵀ)ᵀ.
    let mut pt = p.transpose();
    apply_columns(&mut pt, &ctx.right_signs, true);
    Ok(pt.transpose())
}

/// Inverse of `rht_forward`, cropped back to the original shape.
pub fn rht_inverse(wt: &Matrix, ctx: &RhtContext) -> Result<Matrix> {
    if wt.nrows() != ctx.padded_shape.0 || wt.ncols() != ctx.padded_shape.1 {
        return Err(Error::shape(format!(
            "rht_inverse expected {:?}, got {}x{}",
            ctx.padded_shape,
            wt.nrows(),
            wt.ncols()
        )));
    }
    let mut p = wt.clone();
    // H_L·P: columns through Hadamard then diag(s_L).
    apply_columns(&mut p, &ctx.left_signs, false);
    let mut pt = p.transpose();
    apply_columns(&mut pt, &ctx.right_signs, false);
    let full = pt.transpose();
    Ok(full
        .view((0, 0), ctx.original_shape)
        .into_owned())
}

/// `H̃ = H_Rᵀ·H_pad·H_R`, padding the new diagonal block with `pad_diag`
/// so positive definiteness survives the embedding.
pub fn rht_forward_hessian(h: &Matrix, ctx: &RhtContext, pad_diag: f64) -> Result<Matrix> {
    let d = ctx.original_shape.1;
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::shape(format!(
            "rht_forward_hessian expected {d}x{d}, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let dp = ctx.padded_shape.1;
    let mut p = zero_pad(h, (dp, dp));
    for i in d..dp {
        p[(i, i)] = pad_diag;
    }
    apply_columns(&mut p, &ctx.right_signs, true);
    let mut pt = p.transpose();
    apply_columns(&mut pt, &ctx.right_signs, true);
    let out = pt.transpose();
    // Symmetrize away roundoff so downstream factorizations stay clean.
    Ok((&out + out.transpose()) * 0.5)
}
