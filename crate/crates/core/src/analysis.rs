//! Closed-form error bounds, range/bit prescriptions, and storage accounting.
//!
//! Everything here is a direct evaluation of the decomposition's error
//! analysis: the trace bound for plain feedback quantization, its trailing
//! eigensum refinement, the asymptotic Marchenko-Pastur form, the dynamic
//! ranges and bit budgets under which the factor quantizers stay in their
//! modeled regime, and bits-per-parameter bookkeeping for whole models.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen_sorted, weighted_gram_trace, Matrix};

/// trace(η·diag(D)·ηᵀ) — the error budget of feedback quantization alone.
pub fn quip_trace_bound(eta: &Matrix, d_vec: &DVector<f64>) -> Result<f64> {
    weighted_gram_trace(eta, d_vec)
}

/// Σ_{i>k} λ_i(η·diag(D)·ηᵀ) with eigenvalues sorted descending: the part
/// of the budget a rank-`k` correction cannot remove.
pub fn trailing_eigensum(eta: &Matrix, d_vec: &DVector<f64>, k: usize) -> Result<f64> {
    if eta.ncols() != d_vec.len() {
        return Err(Error::shape(format!(
            "eta has {} columns, weight vector has {}",
            eta.ncols(),
            d_vec.len()
        )));
    }
    if k >= eta.nrows() {
        return Ok(0.0);
    }
    let gram = eta * Matrix::from_diagonal(d_vec) * eta.transpose();
    let (vals, _) = sym_eigen_sorted(&gram);
    Ok(vals.iter().skip(k).map(|v| v.max(0.0)).sum())
}

/// Asymptotic decomposition-error bound
/// `4·m·d·λ_max·R² / (π·(2^B_Q − 1)²) · (1 − k/n)·(n − k/2) + ε`.
#[allow(clippy::too_many_arguments)]
pub fn mp_caldera_bound(
    n: usize,
    d: usize,
    m: usize,
    k: usize,
    lambda_max: f64,
    range: f64,
    b_q: u32,
    epsilon: f64,
) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::domain(format!("need 0 ≤ k ≤ n, got k={k}, n={n}")));
    }
    if b_q < 1 {
        return Err(Error::domain("b_q must be at least 1"));
    }
    if !(lambda_max >= 0.0 && range >= 0.0 && epsilon >= 0.0) {
        return Err(Error::domain("lambda_max, range, epsilon must be nonnegative"));
    }
    let levels = (1u64 << b_q) as f64 - 1.0;
    let lead = 4.0 * (m * d) as f64 * lambda_max * range * range
        / (std::f64::consts::PI * levels * levels);
    let kf = k as f64;
    let nf = n as f64;
    Ok(lead * (1.0 - kf / nf) * (nf - kf / 2.0) + epsilon)
}

/// Per-entry-normalized variant with the squared `(1 − k/2n)` profile.
/// Kept as a labeled alternative; `mp_caldera_bound` is the primary form.
pub fn mp_caldera_bound_informal(
    n: usize,
    d: usize,
    k: usize,
    lambda_max: f64,
    range: f64,
    b_q: u32,
    epsilon: f64,
) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::domain(format!("need 0 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let levels = (1u64 << b_q) as f64 - 1.0;
    let lead =
        4.0 * d as f64 * lambda_max * range * range / (std::f64::consts::PI * levels * levels);
    let prof = 1.0 - k as f64 / (2.0 * n as f64);
    Ok(lead * prof * prof + epsilon)
}

/// Dynamic ranges under which the factor quantizers stay unsaturated:
/// `R_L = 2σ₁/(σ_k·√(m·λ_min))` for the least-squares factor and
/// `R_R = σ₁` for the singular-triplet factor.
pub fn recommended_ranges(
    sigma1: f64,
    sigmak: f64,
    m: usize,
    lambda_min: f64,
) -> Result<(f64, f64)> {
    if !(sigma1 >= sigmak && sigmak > 0.0) {
        return Err(Error::domain(format!(
            "need sigma1 ≥ sigmak > 0, got sigma1={sigma1}, sigmak={sigmak}"
        )));
    }
    if lambda_min <= 0.0 || m == 0 {
        return Err(Error::domain(format!(
            "need lambda_min > 0 and m ≥ 1, got lambda_min={lambda_min}, m={m}"
        )));
    }
    let r_l = 2.0 * sigma1 / (sigmak * (m as f64 * lambda_min).sqrt());
    Ok((r_l, sigma1))
}

/// Inputs for the bit-budget prescriptions.
#[derive(Debug, Clone, Copy)]
pub struct BitBudgetInputs {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub sigma1: f64,
    pub sigmak: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub epsilon: f64,
    /// Σ_i σ_i² of the weighted target (enters the tail-probability term).
    pub sum_sigma_sq: f64,
    /// Absolute constant of the spectral-norm tail bound; 1 by default.
    pub c: f64,
}

/// Bit budgets guaranteeing the factor-quantization overhead stays below ε:
/// `B_L = ⌈log₂(4·(σ₁²/σ_k)·√((n·k/ε)·(λ_max/λ_min)) + 1)⌉` and
/// `B_R = ⌈max(B₁, B₂)⌉` with
/// `B₁ = log₂(2σ₁·√((k·d/ε)·(λ_max/λ_min)) + 1)` and
/// `B₂ = log₂((4Cσ₁/(σ_k·ln2))·(√d + √k + √(ln(8·Σσ²/ε))))`.
pub fn recommended_bits(inp: &BitBudgetInputs) -> Result<(u32, u32)> {
    let BitBudgetInputs {
        n,
        d,
        k,
        m,
        sigma1,
        sigmak,
        lambda_max,
        lambda_min,
        epsilon,
        sum_sigma_sq,
        c,
    } = *inp;
    if !(sigma1 >= sigmak && sigmak > 0.0 && lambda_min > 0.0 && lambda_max >= lambda_min) {
        return Err(Error::domain("spectrum inputs out of order"));
    }
    if k == 0 || n == 0 || d == 0 || m == 0 {
        return Err(Error::domain("dimensions must be positive"));
    }
    let eps_max = 4.0 * (m * k) as f64 * lambda_max * lambda_max / lambda_min * sigma1;
    if !(epsilon > 0.0 && epsilon <= eps_max) {
        return Err(Error::Regime(format!(
            "epsilon {epsilon} outside admissible window (0, {eps_max:.6e}]"
        )));
    }
    let kappa_sq = lambda_max / lambda_min;
    let b_l = (4.0 * sigma1 * sigma1 / sigmak
        * ((n * k) as f64 / epsilon * kappa_sq).sqrt()
        + 1.0)
        .log2();
    let b1 = (2.0 * sigma1 * ((k * d) as f64 / epsilon * kappa_sq).sqrt() + 1.0).log2();
    let b2 = (4.0 * c * sigma1 / (sigmak * std::f64::consts::LN_2)
        * ((d as f64).sqrt()
            + (k as f64).sqrt()
            + (8.0 * sum_sigma_sq / epsilon).ln().max(0.0).sqrt()))
    .log2();
    let ceil_bits = |v: f64| -> u32 { (v.ceil().max(1.0)) as u32 };
    Ok((ceil_bits(b_l), ceil_bits(b1.max(b2))))
}

/// Two-sided feasibility window for the target rank:
/// `λ_min^{1/2}/(4·m·σ₁·λ_max^{3/2}) · Σ_{i>k}σ_i² ≤ k ≤ m`.
pub fn rank_feasible(
    k: usize,
    m: usize,
    sigma1: f64,
    trailing_sq: f64,
    lambda_max: f64,
    lambda_min: f64,
) -> bool {
    if k > m {
        return false;
    }
    let lower = lambda_min.sqrt() / (4.0 * m as f64 * sigma1 * lambda_max.powf(1.5)) * trailing_sq;
    lower <= k as f64
}

/// Average stored bits per original parameter across a set of layer shapes:
/// `Σ_i [B_Q·n_i·d_i + (k − r_ft)·B_LR·(n_i + d_i) + 16·r_ft·(n_i + d_i)] / Σ_i n_i·d_i`.
pub fn bits_per_param(
    layer_dims: &[(usize, usize)],
    b_q: u32,
    b_lr: u32,
    k: usize,
    r_ft: usize,
) -> Result<f64> {
    if layer_dims.is_empty() {
        return Err(Error::domain("layer_dims must be non-empty"));
    }
    if r_ft > k {
        return Err(Error::domain(format!("r_ft={r_ft} exceeds k={k}")));
    }
    let mut stored = 0.0;
    let mut params = 0.0;
    for &(n, d) in layer_dims {
        let nd = (n * d) as f64;
        let npd = (n + d) as f64;
        stored += b_q as f64 * nd
            + (k - r_ft) as f64 * b_lr as f64 * npd
            + 16.0 * r_ft as f64 * npd;
        params += nd;
    }
    Ok(stored / params)
}

/// Backbone bits making the full bound collapse to 2ε at fixed small rank:
/// `log₂(2R·(πε)^{-1/2}·√(n·m·d·λ_max) + 1)`.
pub fn regime_min_backbone_bits(
    n: usize,
    d: usize,
    m: usize,
    lambda_max: f64,
    range: f64,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 || range <= 0.0 || lambda_max <= 0.0 {
        return Err(Error::domain("epsilon, range, lambda_max must be positive"));
    }
    let inner = 2.0 * range / (std::f64::consts::PI * epsilon).sqrt()
        * ((n * m * d) as f64 * lambda_max).sqrt();
    Ok((inner + 1.0).log2())
}

/// Rank making the full bound collapse to 2ε at fixed backbone bits:
/// `2n − (2^B_Q − 1)·R⁻¹·(πε)^{1/2}·(m·d·λ_max)^{-1/2}·√n`.
pub fn regime_min_rank(
    n: usize,
    d: usize,
    m: usize,
    lambda_max: f64,
    range: f64,
    b_q: u32,
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 || range <= 0.0 || lambda_max <= 0.0 || b_q < 1 {
        return Err(Error::domain("epsilon, range, lambda_max, b_q must be positive"));
    }
    let levels = (1u64 << b_q) as f64 - 1.0;
    let term = levels / range * (std::f64::consts::PI * epsilon).sqrt()
        / ((m * d) as f64 * lambda_max).sqrt()
        * (n as f64).sqrt();
    Ok(2.0 * n as f64 - term)
}

/// Evaluated bounds and prescriptions for one decomposition run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// trace(η·D·ηᵀ) from the measured quantization error.
    pub quip_trace_bound: f64,
    /// m·Σ_{i>k} λ_i(η·D·ηᵀ) + ε from the measured quantization error.
    pub caldera_bound_exact: f64,
    /// Closed-form asymptotic bound at the same parameters.
    pub caldera_bound_mp: f64,
    pub epsilon: f64,
    pub recommended_range_l: f64,
    pub recommended_range_r: f64,
    pub recommended_bits_l: u32,
    pub recommended_bits_r: u32,
    pub rank_feasible: bool,
    /// Mean of the recommended factor bit budgets.
    pub avg_bits_factors: f64,
    /// Storage cost of this layer's decomposition, bits per original entry.
    pub bits_per_param: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::standard_normal;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn trace_bound_basics() {
        let eta = Matrix::zeros(4, 5);
        let d = DVector::from_element(5, 2.0);
        assert_eq!(quip_trace_bound(&eta, &d).unwrap(), 0.0);

        let mut rng = stream_rng(1);
        let eta = Matrix::from_fn(4, 5, |_, _| standard_normal(&mut rng));
        let ones = DVector::from_element(5, 1.0);
        assert_relative_eq!(
            quip_trace_bound(&eta, &ones).unwrap(),
            crate::linalg::fro_sq(&eta),
            max_relative = 1e-12
        );
    }

    #[test]
    fn trace_equals_eigensum() {
        let mut rng = stream_rng(2);
        let eta = Matrix::from_fn(6, 6, |_, _| standard_normal(&mut rng));
        let d = DVector::from_fn(6, |_, _| 0.5 + rng.random::<f64>());
        let tr = quip_trace_bound(&eta, &d).unwrap();
        let full = trailing_eigensum(&eta, &d, 0).unwrap();
        assert_relative_eq!(tr, full, max_relative = 1e-8);
        assert_eq!(trailing_eigensum(&eta, &d, 6).unwrap(), 0.0);
    }

    #[test]
    fn trailing_is_trace_minus_leading() {
        let mut rng = stream_rng(3);
        let eta = Matrix::from_fn(5, 7, |_, _| standard_normal(&mut rng));
        let d = DVector::from_fn(7, |_, _| 0.2 + rng.random::<f64>());
        let gram = &eta * Matrix::from_diagonal(&d) * eta.transpose();
        let (vals, _) = sym_eigen_sorted(&gram);
        let k = 2;
        let lead: f64 = vals.iter().take(k).sum();
        let tr = quip_trace_bound(&eta, &d).unwrap();
        assert_relative_eq!(
            trailing_eigensum(&eta, &d, k).unwrap(),
            tr - lead,
            max_relative = 1e-8
        );
        // ordering: trailing never exceeds the full trace
        for kk in 0..5 {
            assert!(trailing_eigensum(&eta, &d, kk).unwrap() <= tr * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mp_bound_substitutions() {
        // k = n kills the leading term
        let b = mp_caldera_bound(16, 8, 4, 16, 2.0, 1.5, 2, 0.25).unwrap();
        assert_relative_eq!(b, 0.25, max_relative = 1e-12);

        // k = 0 leaves lead · n
        let lead = 4.0 * (4 * 8) as f64 * 2.0 * 1.5 * 1.5 / (std::f64::consts::PI * 9.0);
        let b0 = mp_caldera_bound(16, 8, 4, 0, 2.0, 1.5, 2, 0.25).unwrap();
        assert_relative_eq!(b0, lead * 16.0 + 0.25, max_relative = 1e-12);

        // doubling the bit budget from 2 to 3 shrinks the lead by 9/49
        let b2 = mp_caldera_bound(16, 8, 4, 4, 2.0, 1.5, 2, 0.0).unwrap();
        let b3 = mp_caldera_bound(16, 8, 4, 4, 2.0, 1.5, 3, 0.0).unwrap();
        assert_relative_eq!(b3 / b2, 9.0 / 49.0, max_relative = 1e-12);
    }

    #[test]
    fn informal_variant_squares_the_profile() {
        let v = mp_caldera_bound_informal(10, 10, 10, 1.0, 1.0, 2, 0.0).unwrap();
        let lead = 4.0 * 10.0 / (std::f64::consts::PI * 9.0);
        assert_relative_eq!(v, lead * 0.25, max_relative = 1e-12);
    }

    #[test]
    fn ranges_match_formulas() {
        let (rl, rr) = recommended_ranges(10.0, 2.0, 25, 1.0).unwrap();
        assert_relative_eq!(rl, 2.0, max_relative = 1e-12);
        assert_relative_eq!(rr, 10.0, max_relative = 1e-12);

        // σ1 = σk = 1 with m·λ_min = 4 collapses R_L to σ1
        let (rl, rr) = recommended_ranges(1.0, 1.0, 4, 1.0).unwrap();
        assert_relative_eq!(rl, 1.0, max_relative = 1e-12);
        assert_relative_eq!(rr, 1.0, max_relative = 1e-12);

        assert!(recommended_ranges(1.0, 2.0, 4, 1.0).is_err());
        assert!(recommended_ranges(1.0, 0.5, 4, 0.0).is_err());
    }

    #[test]
    fn bit_formulas_substitute() {
        // all ratios 1 and nk/ε = 1 gives B_L = ⌈log₂ 5⌉ = 3
        let base = BitBudgetInputs {
            n: 1,
            d: 1,
            k: 1,
            m: 1,
            sigma1: 1.0,
            sigmak: 1.0,
            lambda_max: 1.0,
            lambda_min: 1.0,
            epsilon: 1.0,
            sum_sigma_sq: 1.0,
            c: 1.0,
        };
        let (b_l, _) = recommended_bits(&base).unwrap();
        assert_eq!(b_l, 3);

        // shrinking ε by 4 raises B_L by exactly one here
        let (b_l4, _) = recommended_bits(&BitBudgetInputs {
            epsilon: 0.25,
            ..base
        })
        .unwrap();
        assert_eq!(b_l4, 4);

        // ε outside the admissible window is a regime error
        let eps_max = 4.0 * 1.0 * 1.0 / 1.0 * 1.0;
        assert!(matches!(
            recommended_bits(&BitBudgetInputs {
                epsilon: eps_max * 1.01,
                ..base
            }),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn rank_feasibility_window() {
        assert!(rank_feasible(1, 8, 1.0, 0.0, 1.0, 0.5));
        assert!(rank_feasible(8, 8, 1.0, 0.0, 1.0, 0.5));
        assert!(!rank_feasible(9, 8, 1.0, 0.0, 1.0, 0.5));
        // direct re-evaluation on a random spectrum
        let mut rng = stream_rng(4);
        for _ in 0..20 {
            let sigma1 = 1.0 + rng.random::<f64>() * 4.0;
            let trailing = rng.random::<f64>() * 50.0;
            let lmax = 1.0 + rng.random::<f64>();
            let lmin = lmax * (0.1 + 0.8 * rng.random::<f64>());
            let m = 8;
            for k in 1..=m {
                let lower = lmin.sqrt() / (4.0 * m as f64 * sigma1 * lmax.powf(1.5)) * trailing;
                assert_eq!(
                    rank_feasible(k, m, sigma1, trailing, lmax, lmin),
                    lower <= k as f64 && k <= m
                );
            }
        }
    }

    #[test]
    fn bits_per_param_anchors() {
        // seven-matrix transformer block layout in two budget settings
        let dims = [
            (4096, 4096),
            (4096, 4096),
            (4096, 4096),
            (4096, 4096),
            (11008, 4096),
            (11008, 4096),
            (4096, 11008),
        ];
        let a = bits_per_param(&dims, 2, 16, 64, 0).unwrap();
        assert!((a - 2.4).abs() <= 0.01, "got {a}");
        let b = bits_per_param(&dims, 2, 4, 256, 0).unwrap();
        assert!((b - 2.4).abs() <= 0.05, "got {b}");
        // no factors means exactly the backbone budget
        assert_relative_eq!(bits_per_param(&dims, 2, 4, 0, 0).unwrap(), 2.0);
    }

    #[test]
    fn bits_per_param_rejects_bad_inputs() {
        assert!(bits_per_param(&[], 2, 4, 1, 0).is_err());
        assert!(bits_per_param(&[(4, 4)], 2, 4, 1, 2).is_err());
    }

    #[test]
    fn regime_helpers_substitute() {
        // B_Q threshold: inner = 2R(πε)^{-1/2}√(nmd·λmax)
        let v = regime_min_backbone_bits(4, 9, 1, 1.0, 0.5, 1.0 / std::f64::consts::PI).unwrap();
        // inner = 2·0.5·(π·(1/π))^{-1/2}·√36 = 6
        assert_relative_eq!(v, (7.0f64).log2(), max_relative = 1e-12);

        let r = regime_min_rank(16, 4, 4, 1.0, 1.0, 2, 1.0 / std::f64::consts::PI).unwrap();
        // term = 3·1·√(π·1/π)/√16·√16 = 3
        assert_relative_eq!(r, 32.0 - 3.0, max_relative = 1e-12);
    }
}
