//! Synthetic test matrices with controlled singular-value profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, standard_normal, Matrix};
use crate::rng::stream_rng;

/// Singular-value profile of the generated matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpectrumKind {
    /// σ_i = i^{-p}.
    DecayingPower { p: f64 },
    /// σ_i = rho^i.
    DecayingExp { rho: f64 },
    /// `rank` unit singular values plus Gaussian noise of level `tau`.
    LowRankPlusNoise { rank: usize, tau: f64 },
}

/// Build `W = U·diag(σ)·Vᵀ` with seeded random orthogonal factors and the
/// requested spectrum. Deterministic per `(n, d, kind, seed)`.
pub fn synth_matrix(n: usize, d: usize, kind: SpectrumKind, seed: u64) -> Result<Matrix> {
    if n == 0 || d == 0 {
        return Err(Error::shape("synthetic matrix needs positive dimensions"));
    }
    let r = n.min(d);
    let sigmas: Vec<f64> = match kind {
        SpectrumKind::DecayingPower { p } => {
            if !p.is_finite() {
                return Err(Error::domain("power-law exponent must be finite"));
            }
            (1..=r).map(|i| (i as f64).powf(-p)).collect()
        }
        SpectrumKind::DecayingExp { rho } => {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::domain(format!("decay base must be positive, got {rho}")));
            }
            (1..=r).map(|i| rho.powi(i as i32)).collect()
        }
        SpectrumKind::LowRankPlusNoise { rank, tau } => {
            if rank > r {
                return Err(Error::domain(format!("rank {rank} exceeds min(n, d) = {r}")));
            }
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(Error::domain(format!("noise level must be nonnegative, got {tau}")));
            }
            (1..=r).map(|i| if i <= rank { 1.0 } else { 0.0 }).collect()
        }
    };

    let mut rng = stream_rng(seed);
    let u = random_orthogonal(n, &mut rng);
    let v = random_orthogonal(d, &mut rng);
    let mut core = Matrix::zeros(n, d);
    for (i, s) in sigmas.iter().enumerate() {
        core[(i, i)] = *s;
    }
    let mut w = &u * core * v.transpose();

    if let SpectrumKind::LowRankPlusNoise { tau, .. } = kind {
        if tau > 0.0 {
            let scale = tau / ((n.max(d)) as f64).sqrt();
            for j in 0..d {
                for i in 0..n {
                    w[(i, j)] += scale * standard_normal(&mut rng);
                }
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd_sorted;
    use approx::assert_relative_eq;

    #[test]
    fn power_law_spectrum_round_trips() {
        let w = synth_matrix(8, 8, SpectrumKind::DecayingPower { p: 1.0 }, 3).unwrap();
        let (_, s, _) = svd_sorted(&w);
        for i in 0..8 {
            assert_relative_eq!(s[i], 1.0 / (i + 1) as f64, max_relative = 1e-8);
        }
    }

    #[test]
    fn noiseless_low_rank_has_exact_rank() {
        let w = synth_matrix(10, 6, SpectrumKind::LowRankPlusNoise { rank: 4, tau: 0.0 }, 5).unwrap();
        let (_, s, _) = svd_sorted(&w);
        for i in 0..4 {
            assert!(s[i] > 0.5);
        }
        for i in 4..6 {
            assert!(s[i] <= 1e-10);
        }
    }

    #[test]
    fn exponential_spectrum() {
        let w = synth_matrix(5, 5, SpectrumKind::DecayingExp { rho: 0.5 }, 7).unwrap();
        let (_, s, _) = svd_sorted(&w);
        for i in 0..5 {
            assert_relative_eq!(s[i], 0.5f64.powi(i as i32 + 1), max_relative = 1e-8);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_matrix(6, 9, SpectrumKind::DecayingPower { p: 0.5 }, 11).unwrap();
        let b = synth_matrix(6, 9, SpectrumKind::DecayingPower { p: 0.5 }, 11).unwrap();
        assert_eq!(a, b);
        let c = synth_matrix(6, 9, SpectrumKind::DecayingPower { p: 0.5 }, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(synth_matrix(0, 4, SpectrumKind::DecayingPower { p: 1.0 }, 0).is_err());
        assert!(synth_matrix(4, 4, SpectrumKind::DecayingExp { rho: 0.0 }, 0).is_err());
        assert!(synth_matrix(4, 4, SpectrumKind::LowRankPlusNoise { rank: 5, tau: 0.0 }, 0).is_err());
    }
}
