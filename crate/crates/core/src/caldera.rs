//! Outer loop alternating backbone quantization and factor refitting.
//!
//! Each round re-quantizes the backbone on `W − L·R` and refits the factor
//! pair on `W − Q`, tracking the best triple under the calibration-weighted
//! objective. Optional pieces: incoherence preprocessing of `(W, H)`, and a
//! Hessian deflation heuristic that removes the factor subspace from the
//! feedback model used by the backbone quantizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::HessianContext;
use crate::ldlq::ldlq_quantize;
use crate::linalg::{max_abs, svd_sorted, Matrix, SV_CUTOFF};
use crate::lplr::{calibrated_singular_values, lplr_factorize, LplrOptions};
use crate::quantizer::QuantizerSpec;
use crate::rht::{rht_forward, rht_forward_hessian, RhtContext};
use crate::rng::{derive_seed, Phase};

/// Which half of the round runs first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    QFirst,
    LrFirst,
}

/// Full parameterization of one decomposition run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    /// Target rank; 0 disables the low-rank factors entirely.
    pub k: usize,
    pub b_q: u32,
    pub b_l: u32,
    pub b_r: u32,
    /// Dynamic ranges; `None` selects the built-in prescriptions.
    pub range_q: Option<f64>,
    pub range_l: Option<f64>,
    pub range_r: Option<f64>,
    pub t_out: usize,
    pub t_in: usize,
    pub seed: u64,
    pub use_rht: bool,
    pub use_hessian_update: bool,
    pub update_order: UpdateOrder,
    pub strict_fallback: bool,
    /// Relative-improvement early stop; `None` runs all `t_out` rounds.
    pub early_stop: Option<f64>,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            k: 0,
            b_q: 2,
            b_l: 4,
            b_r: 4,
            range_q: None,
            range_l: None,
            range_r: None,
            t_out: 15,
            t_in: 10,
            seed: 0,
            use_rht: false,
            use_hessian_update: false,
            update_order: UpdateOrder::QFirst,
            strict_fallback: false,
            early_stop: None,
        }
    }
}

/// Saturation totals across all rounds.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct SaturationSummary {
    pub backbone: usize,
    pub factor_left: usize,
    pub factor_right: usize,
}

/// Wall-clock seconds per phase (zero on targets without a monotonic clock).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub backbone_secs: f64,
    pub factor_secs: f64,
    pub total_secs: f64,
}

/// Best triple found plus the full per-round error trace.
#[derive(Debug, Clone)]
pub struct CalderaResult {
    pub q: Matrix,
    pub l: Matrix,
    pub r: Matrix,
    /// ‖(Q + L·R − W)·Xᵀ‖²_F of the returned triple.
    pub best_error: f64,
    /// Raw per-round errors (length = rounds actually run).
    pub error_trace: Vec<f64>,
    pub saturation: SaturationSummary,
    pub fallback_events: usize,
    pub timings: PhaseTimings,
    pub config: DecompositionConfig,
    /// Present when incoherence preprocessing was applied; the stored
    /// triple lives in transformed coordinates.
    pub rht: Option<RhtContext>,
}

impl CalderaResult {
    /// `Q + L·R` in the coordinates the decomposition ran in.
    pub fn approximation(&self) -> Matrix {
        if self.l.ncols() == 0 {
            self.q.clone()
        } else {
            &self.q + &self.l * &self.r
        }
    }

    /// The approximation mapped back to the original coordinates.
    pub fn approximation_original(&self) -> Result<Matrix> {
        match &self.rht {
            None => Ok(self.approximation()),
            Some(ctx) => crate::rht::rht_inverse(&self.approximation(), ctx),
        }
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn now() -> Option<std::time::Instant> {
    Some(std::time::Instant::now())
}

#[cfg(target_arch = "wasm32")]
fn now() -> Option<std::time::Instant> {
    None
}

fn elapsed(start: &Option<std::time::Instant>) -> f64 {
    start.map(|s| s.elapsed().as_secs_f64()).unwrap_or(0.0)
}

/// Deflate the feedback Hessian by the row space of `L·R`: with
/// `H = M_c·M_cᵀ` and `L·R·M_c = U·Σ·Vᵀ`, returns `H − M_c·V·Vᵀ·M_cᵀ`.
pub fn hessian_update_matrix(h: &Matrix, l: &Matrix, r: &Matrix) -> Result<Matrix> {
    let d = h.nrows();
    if l.ncols() != r.nrows() || r.ncols() != d {
        return Err(Error::shape(format!(
            "factor product must be ?x{d}, got {}x{} · {}x{}",
            l.nrows(),
            l.ncols(),
            r.nrows(),
            r.ncols()
        )));
    }
    let chol = h
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
    let m_c = chol.l();
    if l.ncols() == 0 || max_abs(l) == 0.0 || max_abs(r) == 0.0 {
        return Ok(h.clone());
    }
    let p = l * r * &m_c; // n×d
    let (_, s, vt) = svd_sorted(&p);
    let tol = SV_CUTOFF * s[0].max(f64::MIN_POSITIVE);
    let mut proj = Matrix::zeros(d, d);
    for i in 0..s.len() {
        if s[i] > tol {
            let v = vt.row(i).transpose();
            proj += &v * v.transpose();
        }
    }
    let deflated = h - &m_c * proj * m_c.transpose();
    Ok((&deflated + deflated.transpose()) * 0.5)
}

/// `hessian_update_matrix` wrapped back into a usable context. The deflated
/// matrix is singular by construction, so the context's regularization is
/// re-applied before factoring; eigenvalue extremes are recomputed.
pub fn hessian_update(ctx: &HessianContext, l: &Matrix, r: &Matrix) -> Result<HessianContext> {
    let deflated = hessian_update_matrix(ctx.h(), l, r)?;
    let delta = if ctx.delta() > 0.0 {
        ctx.delta()
    } else {
        1e-10 * deflated.trace() / deflated.nrows() as f64
    };
    let mut shifted = deflated;
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += delta;
    }
    HessianContext::from_hessian(&shifted, ctx.rows(), delta)
}

/// Build the factor quantizer pair for a given residual, honoring explicit
/// range overrides and falling back to the closed-form prescriptions.
fn factor_specs(
    a: &Matrix,
    ctx: &HessianContext,
    cfg: &DecompositionConfig,
) -> Result<(QuantizerSpec, QuantizerSpec)> {
    let (range_l, range_r) = match (cfg.range_l, cfg.range_r) {
        (Some(rl), Some(rr)) => (rl, rr),
        _ => {
            let sv = calibrated_singular_values(a, ctx)?;
            let sigma1 = sv[0];
            let sigmak = sv[cfg.k.min(sv.len()) - 1];
            let (rl, rr) = if sigmak > SV_CUTOFF * sigma1 && ctx.lambda_min() > 0.0 {
                crate::analysis::recommended_ranges(sigma1, sigmak, ctx.rows(), ctx.lambda_min())?
            } else {
                // degenerate residual spectrum: fall back to its top scale
                log::warn!("degenerate residual spectrum; using sigma1 for both factor ranges");
                (sigma1.max(f64::MIN_POSITIVE), sigma1.max(f64::MIN_POSITIVE))
            };
            (cfg.range_l.unwrap_or(rl), cfg.range_r.unwrap_or(rr))
        }
    };
    Ok((
        QuantizerSpec::new(cfg.b_l, range_l)?,
        QuantizerSpec::new(cfg.b_r, range_r)?,
    ))
}

/// Evaluate the closed-form bound suite for a configuration against one
/// probe backbone-quantization of `W` (same draws as the first round of
/// `caldera_decompose` with the same seed). The singular-value inputs to the
/// prescriptions come from the calibrated spectrum of the probe residual
/// `W − Q`, and `ε` is pinned to 5% of its trailing mass past rank `k`.
pub fn evaluate_bounds(
    w: &Matrix,
    ctx: &HessianContext,
    cfg: &DecompositionConfig,
) -> Result<crate::analysis::BoundReport> {
    use crate::analysis;

    let (n, d) = (w.nrows(), w.ncols());
    let range_q = cfg.range_q.unwrap_or_else(|| max_abs(w)).max(f64::MIN_POSITIVE);
    let spec_q = QuantizerSpec::new(cfg.b_q, range_q)?;
    let probe = ldlq_quantize(w, ctx, &spec_q, derive_seed(cfg.seed, 1, Phase::Backbone))?;

    let k_eff = cfg.k.max(1).min(n.min(d));
    let quip = analysis::quip_trace_bound(&probe.eta, ctx.d_vec())?;
    let trailing_eig = analysis::trailing_eigensum(&probe.eta, ctx.d_vec(), cfg.k.min(n))?;

    let residual = w - &probe.q;
    let sv = calibrated_singular_values(&residual, ctx)?;
    let sigma1 = sv[0];
    let sigmak = sv[(k_eff - 1).min(sv.len() - 1)];
    let trailing_sv: f64 = (k_eff..sv.len()).map(|i| sv[i] * sv[i]).sum();
    let epsilon = 0.05 * trailing_sv;

    let m = ctx.rows();
    let mp = analysis::mp_caldera_bound(n, d, m, cfg.k.min(n), ctx.lambda_max(), range_q, cfg.b_q, epsilon)?;

    let feasible = analysis::rank_feasible(k_eff, m, sigma1, trailing_sv, ctx.lambda_max(), ctx.lambda_min());
    let (range_l, range_r) = if sigmak > SV_CUTOFF * sigma1 && ctx.lambda_min() > 0.0 {
        analysis::recommended_ranges(sigma1, sigmak, m, ctx.lambda_min())?
    } else {
        (sigma1, sigma1)
    };
    let bits = analysis::recommended_bits(&analysis::BitBudgetInputs {
        n,
        d,
        k: k_eff,
        m,
        sigma1,
        sigmak: sigmak.max(SV_CUTOFF * sigma1).max(f64::MIN_POSITIVE),
        lambda_max: ctx.lambda_max(),
        lambda_min: ctx.lambda_min().max(f64::MIN_POSITIVE),
        epsilon: epsilon.max(f64::MIN_POSITIVE),
        sum_sigma_sq: sv.iter().map(|s| s * s).sum(),
        c: 1.0,
    });
    let (bits_l, bits_r) = bits.unwrap_or((1, 1));

    let stored = cfg.b_q as f64 * (n * d) as f64
        + cfg.k as f64 * (cfg.b_l as f64 * n as f64 + cfg.b_r as f64 * d as f64);
    Ok(crate::analysis::BoundReport {
        quip_trace_bound: quip,
        caldera_bound_exact: m as f64 * trailing_eig + epsilon,
        caldera_bound_mp: mp,
        epsilon,
        recommended_range_l: range_l,
        recommended_range_r: range_r,
        recommended_bits_l: bits_l,
        recommended_bits_r: bits_r,
        rank_feasible: feasible,
        avg_bits_factors: (bits_l + bits_r) as f64 / 2.0,
        bits_per_param: stored / (n * d) as f64,
    })
}

/// Run the full decomposition `W ≈ Q + L·R`.
///
/// With `cfg.use_rht` the inputs are moved into transformed coordinates
/// internally and the returned triple stays there; `CalderaResult::rht`
/// carries what is needed to map back.
pub fn caldera_decompose(
    w: &Matrix,
    ctx: &HessianContext,
    cfg: &DecompositionConfig,
) -> Result<CalderaResult> {
    crate::linalg::ensure_finite(w, "weight matrix")?;
    if w.ncols() != ctx.dim() {
        return Err(Error::shape(format!(
            "W has {} columns, hessian dimension is {}",
            w.ncols(),
            ctx.dim()
        )));
    }
    if cfg.t_out < 1 {
        return Err(Error::domain("t_out must be at least 1"));
    }
    if cfg.k > 0 && cfg.k > w.nrows().min(w.ncols()) {
        return Err(Error::domain(format!(
            "rank k={} exceeds min(n, d) = {}",
            cfg.k,
            w.nrows().min(w.ncols())
        )));
    }

    let total_start = now();

    // Optional incoherence preprocessing.
    let (w_work, ctx_work, rht) = if cfg.use_rht {
        let rht_ctx = RhtContext::new(w.nrows(), w.ncols(), derive_seed(cfg.seed, 0, Phase::Backbone))?;
        let w_t = rht_forward(w, &rht_ctx)?;
        // Any positive pad value preserves the objective on the original
        // support; matching the smallest existing eigenvalue keeps the
        // padded spectrum's floor (and with it the factor-range
        // prescriptions) identical to the unpadded problem.
        let pad = ctx.delta().max(ctx.lambda_min()).max(1e-12 * ctx.lambda_max());
        let h_t = rht_forward_hessian(ctx.h(), &rht_ctx, pad)?;
        let ctx_t = HessianContext::from_hessian(&h_t, ctx.rows(), ctx.delta())?;
        (w_t, ctx_t, Some(rht_ctx))
    } else {
        (w.clone(), ctx.clone(), None)
    };

    let (n, d) = (w_work.nrows(), w_work.ncols());
    let range_q = cfg.range_q.unwrap_or_else(|| max_abs(&w_work));
    let spec_q = QuantizerSpec::new(cfg.b_q, range_q.max(f64::MIN_POSITIVE))?;
    let lplr_opts = LplrOptions {
        strict_fallback: cfg.strict_fallback,
        ..LplrOptions::default()
    };

    let mut l = Matrix::zeros(n, cfg.k);
    let mut r = Matrix::zeros(cfg.k, d);
    let mut q = Matrix::zeros(n, d);

    let mut best: Option<(f64, Matrix, Matrix, Matrix)> = None;
    let mut error_trace = Vec::with_capacity(cfg.t_out);
    let mut saturation = SaturationSummary::default();
    let mut fallback_events = 0usize;
    let mut timings = PhaseTimings::default();
    // Context used by the backbone quantizer; deflated by the heuristic.
    let mut backbone_ctx = ctx_work.clone();

    for t in 1..=cfg.t_out {
        let seed_q = derive_seed(cfg.seed, t as u64, Phase::Backbone);
        let seed_lr = derive_seed(cfg.seed, t as u64, Phase::Factors);

        let run_backbone = |l: &Matrix, r: &Matrix, q: &mut Matrix, sat: &mut SaturationSummary, tm: &mut PhaseTimings, bctx: &HessianContext| -> Result<()> {
            let started = now();
            let residual = if cfg.k == 0 { w_work.clone() } else { &w_work - l * r };
            let out = ldlq_quantize(&residual, bctx, &spec_q, seed_q)?;
            *q = out.q;
            sat.backbone += out.saturation_count;
            tm.backbone_secs += elapsed(&started);
            Ok(())
        };
        let run_factors = |q: &Matrix, l: &mut Matrix, r: &mut Matrix, sat: &mut SaturationSummary, tm: &mut PhaseTimings, fb: &mut usize| -> Result<()> {
            if cfg.k == 0 {
                return Ok(());
            }
            let started = now();
            let residual = &w_work - q;
            let (spec_l, spec_r) = factor_specs(&residual, &ctx_work, cfg)?;
            let out = lplr_factorize(
                &residual, cfg.k, &ctx_work, &spec_l, &spec_r, cfg.t_in, seed_lr, &lplr_opts,
            )?;
            *l = out.l;
            *r = out.r;
            sat.factor_left += out.saturation.left_saturated;
            sat.factor_right += out.saturation.right_saturated;
            *fb += out.fallback_used as usize;
            tm.factor_secs += elapsed(&started);
            Ok(())
        };

        match cfg.update_order {
            UpdateOrder::QFirst => {
                run_backbone(&l, &r, &mut q, &mut saturation, &mut timings, &backbone_ctx)?;
                run_factors(&q, &mut l, &mut r, &mut saturation, &mut timings, &mut fallback_events)?;
            }
            UpdateOrder::LrFirst => {
                run_factors(&q, &mut l, &mut r, &mut saturation, &mut timings, &mut fallback_events)?;
                run_backbone(&l, &r, &mut q, &mut saturation, &mut timings, &backbone_ctx)?;
            }
        }

        let err = if cfg.k == 0 {
            ctx_work.proxy_error(&(&q - &w_work))?
        } else {
            ctx_work.proxy_error(&(&q + &l * &r - &w_work))?
        };
        error_trace.push(err);

        let improved = best.as_ref().map(|(b, ..)| err < *b).unwrap_or(true);
        if improved {
            best = Some((err, q.clone(), l.clone(), r.clone()));
        }

        if cfg.use_hessian_update && cfg.k > 0 {
            backbone_ctx = hessian_update(&ctx_work, &l, &r)?;
        }

        if let Some(tol) = cfg.early_stop {
            if t >= 2 {
                let prev = error_trace[t - 2];
                if prev > 0.0 && (prev - err) / prev < tol {
                    break;
                }
            }
        }
    }

    let (best_error, q, l, r) = best.expect("t_out >= 1 guarantees one round");
    timings.total_secs = elapsed(&total_start);

    Ok(CalderaResult {
        q,
        l,
        r,
        best_error,
        error_trace,
        saturation,
        fallback_events,
        timings,
        config: cfg.clone(),
        rht,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_sq, random_orthogonal, standard_normal, sym_eigen_sorted};
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed);
        Matrix::from_fn(n, d, |_, _| standard_normal(&mut rng))
    }

    fn conditioned_context(d: usize, seed: u64) -> HessianContext {
        let mut rng = stream_rng(seed);
        let q1 = random_orthogonal(d, &mut rng);
        let q2 = random_orthogonal(d, &mut rng);
        let mut s = Matrix::zeros(d, d);
        for i in 0..d {
            s[(i, i)] = 1.0 + i as f64 / (d - 1) as f64;
        }
        let x = q1 * s * q2.transpose();
        HessianContext::from_activations(&x, 0.0).unwrap()
    }

    #[test]
    fn rank_zero_matches_plain_backbone_quantization() {
        let w = gaussian(12, 12, 1);
        let ctx = conditioned_context(12, 2);
        let cfg = DecompositionConfig {
            k: 0,
            t_out: 1,
            seed: 9,
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg).unwrap();
        let spec = QuantizerSpec::new(cfg.b_q, max_abs(&w)).unwrap();
        let direct = ldlq_quantize(&w, &ctx, &spec, derive_seed(9, 1, Phase::Backbone)).unwrap();
        assert_eq!(res.q, direct.q);
        assert_eq!(res.l.ncols(), 0);
        assert_relative_eq!(res.best_error, direct.proxy_error, max_relative = 1e-12);
    }

    #[test]
    fn single_round_composes_the_two_phases() {
        let w = gaussian(10, 10, 3);
        let ctx = conditioned_context(10, 4);
        let cfg = DecompositionConfig {
            k: 2,
            b_l: 8,
            b_r: 8,
            t_out: 1,
            t_in: 2,
            seed: 5,
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg).unwrap();

        let spec_q = QuantizerSpec::new(cfg.b_q, max_abs(&w)).unwrap();
        let q = ldlq_quantize(&w, &ctx, &spec_q, derive_seed(5, 1, Phase::Backbone)).unwrap();
        assert_eq!(res.q, q.q);

        let residual = &w - &q.q;
        let (spec_l, spec_r) = factor_specs(&residual, &ctx, &cfg).unwrap();
        let lr = lplr_factorize(
            &residual,
            2,
            &ctx,
            &spec_l,
            &spec_r,
            2,
            derive_seed(5, 1, Phase::Factors),
            &LplrOptions::default(),
        )
        .unwrap();
        assert_eq!(res.l, lr.l);
        assert_eq!(res.r, lr.r);
    }

    #[test]
    fn best_error_matches_recomputation_and_trace_minimum() {
        let w = gaussian(16, 16, 6);
        let ctx = conditioned_context(16, 7);
        let cfg = DecompositionConfig {
            k: 4,
            b_l: 8,
            b_r: 8,
            t_out: 5,
            t_in: 2,
            seed: 11,
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg).unwrap();
        assert_eq!(res.error_trace.len(), 5);
        let min = res.error_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(res.best_error, min, max_relative = 1e-12);
        let recomputed = ctx.proxy_error(&(res.approximation() - &w)).unwrap();
        assert_relative_eq!(res.best_error, recomputed, max_relative = 1e-6);
    }

    #[test]
    fn best_error_is_monotone_in_t_out() {
        let w = gaussian(12, 12, 8);
        let ctx = conditioned_context(12, 9);
        let mut prev = f64::INFINITY;
        for t_out in [1usize, 2, 4, 7] {
            let cfg = DecompositionConfig {
                k: 3,
                b_l: 6,
                b_r: 6,
                t_out,
                t_in: 1,
                seed: 13,
                ..DecompositionConfig::default()
            };
            let res = caldera_decompose(&w, &ctx, &cfg).unwrap();
            assert!(res.best_error <= prev + 1e-12, "t_out {t_out}");
            prev = res.best_error;
        }
    }

    #[test]
    fn update_order_swap_still_tracks_best() {
        let w = gaussian(10, 10, 14);
        let ctx = conditioned_context(10, 15);
        let cfg = DecompositionConfig {
            k: 2,
            b_l: 8,
            b_r: 8,
            t_out: 3,
            t_in: 1,
            seed: 17,
            update_order: UpdateOrder::LrFirst,
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg).unwrap();
        let recomputed = ctx.proxy_error(&(res.approximation() - &w)).unwrap();
        assert_relative_eq!(res.best_error, recomputed, max_relative = 1e-6);
    }

    #[test]
    fn hessian_deflation_identity_on_zero_factors() {
        let ctx = conditioned_context(8, 18);
        let l = Matrix::zeros(8, 2);
        let r = Matrix::zeros(2, 8);
        let h2 = hessian_update_matrix(ctx.h(), &l, &r).unwrap();
        assert_relative_eq!(&h2, ctx.h(), epsilon = 1e-12);
    }

    #[test]
    fn hessian_deflation_is_psd_and_low_rank() {
        let ctx = conditioned_context(10, 19);
        let l = gaussian(10, 3, 20);
        let r = gaussian(3, 10, 21);
        let h2 = hessian_update_matrix(ctx.h(), &l, &r).unwrap();
        let (vals, _) = sym_eigen_sorted(&h2);
        let lmax = ctx.lambda_max();
        assert!(vals[vals.len() - 1] >= -1e-8 * lmax);
        // H − H̃ has rank ≤ k
        let diff = ctx.h() - &h2;
        let (dv, _) = sym_eigen_sorted(&diff);
        let significant = dv.iter().filter(|&&v| v.abs() > 1e-8 * lmax).count();
        assert!(significant <= 3, "rank {significant}");
    }

    #[test]
    fn hessian_update_context_is_usable() {
        let ctx = conditioned_context(8, 22);
        let l = gaussian(8, 2, 23);
        let r = gaussian(2, 8, 24);
        let updated = hessian_update(&ctx, &l, &r).unwrap();
        assert!(updated.lambda_min() > 0.0);
        assert_eq!(updated.rows(), ctx.rows());
    }

    #[test]
    fn rht_preprocessing_preserves_the_objective() {
        let w = gaussian(16, 16, 25);
        let ctx = {
            let x = gaussian(16, 16, 26);
            let delta = HessianContext::default_delta(&x);
            HessianContext::from_activations(&x, delta).unwrap()
        };
        let cfg = DecompositionConfig {
            k: 3,
            b_l: 8,
            b_r: 8,
            t_out: 2,
            t_in: 1,
            seed: 27,
            use_rht: true,
            ..DecompositionConfig::default()
        };
        let res = caldera_decompose(&w, &ctx, &cfg).unwrap();
        assert!(res.rht.is_some());
        // proxy error in original coordinates matches the transformed one
        let approx_orig = res.approximation_original().unwrap();
        let direct = ctx.proxy_error(&(&approx_orig - &w)).unwrap();
        assert_relative_eq!(direct, res.best_error, max_relative = 1e-6);
    }

    #[test]
    fn low_rank_structure_is_exploited() {
        // a strongly low-rank matrix gains a lot from the factor pair
        let (n, d, k_true) = (24, 24, 4);
        let b = gaussian(n, k_true, 28);
        let c = gaussian(k_true, d, 29);
        let w = &b * &c + gaussian(n, d, 30) * 0.05;
        let ctx = conditioned_context(d, 31);

        let base_cfg = DecompositionConfig {
            k: 0,
            t_out: 2,
            seed: 33,
            ..DecompositionConfig::default()
        };
        let plain = caldera_decompose(&w, &ctx, &base_cfg).unwrap();
        let lr_cfg = DecompositionConfig {
            k: k_true,
            b_l: 8,
            b_r: 8,
            t_out: 2,
            t_in: 2,
            seed: 33,
            ..DecompositionConfig::default()
        };
        let with_lr = caldera_decompose(&w, &ctx, &lr_cfg).unwrap();
        assert!(
            with_lr.best_error < plain.best_error * 0.8,
            "lr {} vs plain {}",
            with_lr.best_error,
            plain.best_error
        );
        assert!(fro_sq(&with_lr.l) > 0.0);
    }
}
