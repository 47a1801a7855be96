//! Minimal end-to-end run: synthesize a matrix with a decaying spectrum,
//! build a calibration Hessian, and decompose at a 2-bit backbone with
//! 8-bit rank-16 factors.

use caldera_core::synth::{synth_matrix, SpectrumKind};
use caldera_core::{caldera_decompose, DecompositionConfig, HessianContext, Result};

fn main() -> Result<()> {
    let w = synth_matrix(64, 64, SpectrumKind::DecayingPower { p: 1.0 }, 0)?;
    let x = synth_matrix(96, 64, SpectrumKind::DecayingPower { p: 0.3 }, 1)?;
    let ctx = HessianContext::from_activations(&x, HessianContext::default_delta(&x))?;

    let cfg = DecompositionConfig {
        k: 16,
        b_q: 2,
        b_l: 8,
        b_r: 8,
        t_out: 10,
        t_in: 5,
        ..Default::default()
    };
    let res = caldera_decompose(&w, &ctx, &cfg)?;
    let baseline = caldera_decompose(&w, &ctx, &DecompositionConfig { k: 0, ..cfg })?;

    println!("backbone-only error  {:.6e}", baseline.best_error);
    println!("with rank-16 factors {:.6e}", res.best_error);
    println!("ratio                {:.3}", res.best_error / baseline.best_error);
    Ok(())
}
