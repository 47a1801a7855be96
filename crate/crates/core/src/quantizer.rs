//! Uniformly dithered scalar quantization with saturation accounting.
//!
//! A `B`-bit quantizer with dynamic range `R` places `2^B` points
//! `q_j = -R + (j-1)·Δ`, `Δ = 2R/(2^B - 1)`. An in-range input lands on one
//! of its two neighboring points, choosing the upper one with probability
//! `(x - q_k)/Δ`, which makes the quantization error zero-mean with variance
//! at most `Δ²/4`. Inputs beyond the range clamp to the nearest endpoint and
//! are flagged as saturated, since clamping voids the unbiased-error model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::entry_uniform;

/// Bit budgets above this would push the resolution into denormal territory
/// on pathological ranges; the analysis never needs more than 16 bits.
pub const MAX_BITS: u32 = 24;

/// A scalar quantizer: bit budget, symmetric dynamic range, derived
/// resolution, and the implied codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    bits: u32,
    range: f64,
    resolution: f64,
}

/// Result of quantizing one scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizeOutcome {
    /// A codebook point, bit-exact.
    pub value: f64,
    /// True iff the input magnitude exceeded the dynamic range before clamping.
    pub saturated: bool,
}

impl QuantizerSpec {
    /// Build a quantizer from a bit budget and a positive dynamic range.
    pub fn new(bits: u32, range: f64) -> Result<Self> {
        if !(1..=MAX_BITS).contains(&bits) {
            return Err(Error::domain(format!("bits must be in 1..={MAX_BITS}, got {bits}")));
        }
        if !range.is_finite() || range <= 0.0 {
            return Err(Error::domain(format!("range must be positive, got {range}")));
        }
        let levels = (1u64 << bits) as f64;
        Ok(Self {
            bits,
            range,
            resolution: 2.0 * range / (levels - 1.0),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Step between adjacent codebook points, Δ = 2R/(2^B − 1).
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Number of codebook points, 2^B.
    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    /// The `idx`-th codebook point (0-based). Endpoints are exactly ±range;
    /// interior points are laid out symmetrically so outputs stay bit-exact.
    #[inline]
    pub fn point(&self, idx: u64) -> f64 {
        let m = self.levels();
        debug_assert!(idx < m);
        if idx <= (m - 1) / 2 {
            -self.range + idx as f64 * self.resolution
        } else {
            self.range - (m - 1 - idx) as f64 * self.resolution
        }
    }

    /// Materialize the full codebook. Intended for small bit budgets; the
    /// quantization path itself never allocates this.
    pub fn codebook(&self) -> Vec<f64> {
        (0..self.levels()).map(|j| self.point(j)).collect()
    }

    /// Quantize one scalar, drawing the dither from `rng`.
    pub fn quantize_scalar<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<QuantizeOutcome> {
        let u: f64 = rng.random();
        self.quantize_with_uniform(x, u)
    }

    /// Quantization kernel against an externally supplied uniform in `[0, 1)`.
    pub fn quantize_with_uniform(&self, x: f64, u: f64) -> Result<QuantizeOutcome> {
        if !x.is_finite() {
            return Err(Error::NonFinite("quantizer input"));
        }
        if x > self.range {
            return Ok(QuantizeOutcome {
                value: self.point(self.levels() - 1),
                saturated: true,
            });
        }
        if x < -self.range {
            return Ok(QuantizeOutcome {
                value: self.point(0),
                saturated: true,
            });
        }
        let m = self.levels();
        let t = (x + self.range) / self.resolution;
        let idx = (t.floor() as i64).clamp(0, m as i64 - 2) as u64;
        let lo = self.point(idx);
        let hi = self.point(idx + 1);
        let r = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let value = if u < r { hi } else { lo };
        Ok(QuantizeOutcome { value, saturated: false })
    }

    /// Quantize every entry independently. The draw for entry `(i, j)` is
    /// keyed by `(seed, i, j)`, so the result is reproducible and independent
    /// of traversal order. Returns the quantized matrix and the number of
    /// saturated entries.
    pub fn quantize_matrix(&self, a: &Matrix, seed: u64) -> Result<(Matrix, usize)> {
        crate::linalg::ensure_finite(a, "quantizer input matrix")?;
        let mut out = Matrix::zeros(a.nrows(), a.ncols());
        let mut saturated = 0usize;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                let o = self.quantize_with_uniform(a[(i, j)], entry_uniform(seed, i, j))?;
                out[(i, j)] = o.value;
                saturated += o.saturated as usize;
            }
        }
        Ok((out, saturated))
    }
}
