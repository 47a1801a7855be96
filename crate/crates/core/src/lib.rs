//! Calibration-aware low-precision plus low-rank matrix decomposition.
//!
//! Approximates a dense matrix as `W ≈ Q + L·R` under the
//! calibration-weighted objective `‖(Q + L·R − W)·Xᵀ‖²_F`, where `Q` is an
//! aggressively quantized full-size backbone and `L`, `R` are quantized
//! low-rank factors. The crate provides the dithered scalar quantizers, the
//! feedback (LDL-based) backbone quantizer, globally optimal
//! rank-constrained regression, the alternating factor refinement, the outer
//! loop tying them together, and an analysis module evaluating the scheme's
//! closed-form error bounds and parameter prescriptions.

pub mod analysis;
pub mod caldera;
pub mod error;
pub mod hessian;
pub mod io;
pub mod ldlq;
pub mod linalg;
pub mod lplr;
pub mod quantizer;
pub mod rcr;
pub mod rht;
pub mod rng;
pub mod synth;

pub use caldera::{caldera_decompose, CalderaResult, DecompositionConfig, UpdateOrder};
pub use error::{Error, Result};
pub use hessian::{ldl_upper, HessianContext};
pub use ldlq::{ldlq_quantize, verify_error_identity, LdlqResult};
pub use linalg::Matrix;
pub use lplr::{lplr_factorize, update_left, update_right, LplrOptions, LplrResult};
pub use quantizer::{QuantizeOutcome, QuantizerSpec};
pub use rcr::{solve_rcr, solve_rcr_pd, RcrSolution};
pub use rht::{rht_forward, rht_forward_hessian, rht_inverse, RhtContext};
pub use synth::{synth_matrix, SpectrumKind};
