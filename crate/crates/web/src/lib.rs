//! Interactive browser surface over the core decomposition.
//!
//! Three operations, each returning a JSON payload the page renders with
//! plain canvas plotting: a seeded decomposition run compared against the
//! rank-zero baseline, the closed-form error-bound curves as a function of
//! target rank and backbone bits, and a dithered-quantizer playground.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use caldera_core::caldera::evaluate_bounds;
use caldera_core::hessian::HessianContext;
use caldera_core::linalg::{random_orthogonal, Matrix};
use caldera_core::quantizer::QuantizerSpec;
use caldera_core::rng::stream_rng;
use caldera_core::synth::{synth_matrix, SpectrumKind};
use caldera_core::{caldera_decompose, DecompositionConfig};

fn err_to_js(e: caldera_core::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsValue> {
    serde_json::to_string(v).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Square activations with singular values spread over [1, 2].
fn demo_activations(d: usize, seed: u64) -> Matrix {
    let mut rng = stream_rng(seed);
    let q1 = random_orthogonal(d, &mut rng);
    let q2 = random_orthogonal(d, &mut rng);
    let mut s = Matrix::zeros(d, d);
    for i in 0..d {
        s[(i, i)] = 1.0 + i as f64 / (d - 1).max(1) as f64;
    }
    q1 * s * q2.transpose()
}

#[derive(Serialize)]
struct DecomposeDemo {
    error_trace: Vec<f64>,
    baseline_trace: Vec<f64>,
    best_error: f64,
    baseline_best: f64,
    ratio: f64,
    relative_error: f64,
    saturation_backbone: usize,
    quip_trace_bound: f64,
    caldera_bound_exact: f64,
    caldera_bound_mp: f64,
}

/// Decompose a seeded synthetic matrix (power-law spectrum `p`) and compare
/// against the rank-zero baseline under the same seed discipline.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn decompose_demo(
    size: usize,
    k: usize,
    b_q: u32,
    b_l: u32,
    b_r: u32,
    t_out: usize,
    t_in: usize,
    seed: u64,
    spectrum_p: f64,
) -> Result<String, JsValue> {
    if !(4..=128).contains(&size) {
        return Err(JsValue::from_str("size must be between 4 and 128"));
    }
    let w = synth_matrix(size, size, SpectrumKind::DecayingPower { p: spectrum_p }, seed)
        .map_err(err_to_js)?;
    let x = demo_activations(size, seed.wrapping_add(101));
    let ctx = HessianContext::from_activations(&x, 0.0).map_err(err_to_js)?;

    let cfg = DecompositionConfig {
        k,
        b_q,
        b_l,
        b_r,
        t_out,
        t_in,
        seed,
        ..DecompositionConfig::default()
    };
    let res = caldera_decompose(&w, &ctx, &cfg).map_err(err_to_js)?;
    let base_cfg = DecompositionConfig { k: 0, ..cfg.clone() };
    let base = caldera_decompose(&w, &ctx, &base_cfg).map_err(err_to_js)?;
    let bounds = evaluate_bounds(&w, &ctx, &cfg).map_err(err_to_js)?;

    let w_norm = ctx.proxy_error(&w).map_err(err_to_js)?;
    let payload = DecomposeDemo {
        error_trace: res.error_trace.clone(),
        baseline_trace: base.error_trace.clone(),
        best_error: res.best_error,
        baseline_best: base.best_error,
        ratio: res.best_error / base.best_error.max(f64::MIN_POSITIVE),
        relative_error: (res.best_error / w_norm.max(f64::MIN_POSITIVE)).sqrt(),
        saturation_backbone: res.saturation.backbone,
        quip_trace_bound: bounds.quip_trace_bound,
        caldera_bound_exact: bounds.caldera_bound_exact,
        caldera_bound_mp: bounds.caldera_bound_mp,
    };
    to_json(&payload)
}

#[derive(Serialize)]
struct BoundCurves {
    ks: Vec<usize>,
    /// One curve per requested backbone bit budget.
    curves: Vec<CurveEntry>,
}

#[derive(Serialize)]
struct CurveEntry {
    b_q: u32,
    values: Vec<f64>,
}

/// Closed-form bound as a function of target rank for several backbone
/// budgets (2, 3, 4 bits).
#[wasm_bindgen]
pub fn bound_curves(
    n: usize,
    d: usize,
    m: usize,
    lambda_max: f64,
    range: f64,
    epsilon: f64,
) -> Result<String, JsValue> {
    if n == 0 || n > 4096 {
        return Err(JsValue::from_str("n must be in 1..=4096"));
    }
    let ks: Vec<usize> = (0..=n).step_by((n / 64).max(1)).collect();
    let mut curves = Vec::new();
    for b_q in [2u32, 3, 4] {
        let mut values = Vec::with_capacity(ks.len());
        for &k in &ks {
            let v = caldera_core::analysis::mp_caldera_bound(
                n, d, m, k, lambda_max, range, b_q, epsilon,
            )
            .map_err(err_to_js)?;
            values.push(v);
        }
        curves.push(CurveEntry { b_q, values });
    }
    to_json(&BoundCurves { ks, curves })
}

#[derive(Serialize)]
struct QuantizerDemo {
    codebook: Vec<f64>,
    resolution: f64,
    empirical_mean: f64,
    empirical_variance: f64,
    mean_tolerance: f64,
    variance_budget: f64,
    saturated: bool,
    /// Draw frequency per codebook point, aligned with `codebook`.
    frequencies: Vec<f64>,
}

/// Monte Carlo statistics of the dithered scalar quantizer at one input.
#[wasm_bindgen]
pub fn quantizer_demo(
    bits: u32,
    range: f64,
    x: f64,
    draws: u32,
    seed: u64,
) -> Result<String, JsValue> {
    if bits > 10 {
        return Err(JsValue::from_str("demo caps the bit budget at 10"));
    }
    let spec = QuantizerSpec::new(bits, range).map_err(err_to_js)?;
    let codebook = spec.codebook();
    let draws = draws.clamp(1, 2_000_000) as usize;
    let mut rng = stream_rng(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut counts = vec![0usize; codebook.len()];
    let mut saturated = false;
    for _ in 0..draws {
        let out = spec.quantize_scalar(x, &mut rng).map_err(err_to_js)?;
        sum += out.value;
        sumsq += out.value * out.value;
        saturated |= out.saturated;
        if let Some(idx) = codebook.iter().position(|&c| c == out.value) {
            counts[idx] += 1;
        }
    }
    let mean = sum / draws as f64;
    let var = sumsq / draws as f64 - mean * mean;
    let delta = spec.resolution();
    let payload = QuantizerDemo {
        codebook,
        resolution: delta,
        empirical_mean: mean,
        empirical_variance: var,
        mean_tolerance: 4.0 * (delta / 2.0) / (draws as f64).sqrt(),
        variance_budget: delta * delta / 4.0,
        saturated,
        frequencies: counts.iter().map(|&c| c as f64 / draws as f64).collect(),
    };
    to_json(&payload)
}
