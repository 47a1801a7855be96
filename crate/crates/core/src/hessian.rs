//! The calibration Hessian and its factorizations.
//!
//! From an activation matrix `X ∈ R^{m×d}` we form `H = (1/m)XᵀX + δI`,
//! factor `mH = (M + I)·diag(D)·(M + I)ᵀ` with `M` strictly upper
//! triangular, and keep the eigendecomposition, the product `H·H⁺`, and the
//! eigenvalue extremes. A built context is immutable and cheap to share.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, sym_eigen_sorted, Matrix, SV_CUTOFF};

/// Immutable bundle of everything downstream passes need from `H`.
#[derive(Debug, Clone)]
pub struct HessianContext {
    h: Matrix,
    feedback: Matrix,
    d_vec: DVector<f64>,
    hh_dagger: Matrix,
    eig_vals: DVector<f64>,
    eig_vecs: Matrix,
    lambda_max: f64,
    lambda_min: f64,
    m: usize,
    delta: f64,
}

impl HessianContext {
    /// Build from calibration activations: `H = (1/m)XᵀX + δI`.
    pub fn from_activations(x: &Matrix, delta: f64) -> Result<Self> {
        ensure_finite(x, "activation matrix")?;
        let (m, d) = (x.nrows(), x.ncols());
        if m == 0 || d == 0 {
            return Err(Error::shape("activation matrix must be non-empty"));
        }
        if delta < 0.0 || !delta.is_finite() {
            return Err(Error::domain(format!("delta must be nonnegative, got {delta}")));
        }
        let mut h = x.transpose() * x / m as f64;
        for i in 0..d {
            h[(i, i)] += delta;
        }
        Self::from_hessian_owned(h, m, delta)
    }

    /// Build from a precomputed Hessian (already including any δ shift).
    /// `m` is the number of calibration rows the Hessian was averaged over.
    pub fn from_hessian(h: &Matrix, m: usize, delta: f64) -> Result<Self> {
        ensure_finite(h, "hessian matrix")?;
        if m == 0 {
            return Err(Error::domain("calibration row count m must be >= 1"));
        }
        Self::from_hessian_owned(h.clone(), m, delta)
    }

    fn from_hessian_owned(h: Matrix, m: usize, delta: f64) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d {
            return Err(Error::shape(format!("hessian must be square, got {}x{}", d, h.ncols())));
        }
        let asym = crate::linalg::max_asymmetry(&h);
        let scale = crate::linalg::max_abs(&h).max(f64::MIN_POSITIVE);
        if asym > 1e-10 * scale {
            return Err(Error::domain(format!(
                "hessian is not symmetric (relative asymmetry {:.3e})",
                asym / scale
            )));
        }

        let mh = &h * m as f64;
        let (feedback, d_vec) = ldl_upper(&mh)?;

        let (eig_vals, eig_vecs) = sym_eigen_sorted(&h);
        let lambda_max = eig_vals[0];
        let lambda_min = eig_vals[eig_vals.len() - 1];

        let hh_dagger = if delta > 0.0 {
            // Regularization makes H invertible, so H·H⁺ is the identity.
            Matrix::identity(d, d)
        } else {
            let tol = SV_CUTOFF * lambda_max.abs();
            let mut proj = Matrix::zeros(d, d);
            for i in 0..d {
                if eig_vals[i] > tol {
                    let v = eig_vecs.column(i);
                    proj += v * v.transpose();
                }
            }
            proj
        };

        Ok(Self {
            h,
            feedback,
            d_vec,
            hh_dagger,
            eig_vals,
            eig_vecs,
            lambda_max,
            lambda_min,
            m,
            delta,
        })
    }

    /// Trace-relative default regularization, `1e-6 · trace(H)/d`.
    pub fn default_delta(x: &Matrix) -> f64 {
        let m = x.nrows().max(1) as f64;
        let d = x.ncols().max(1) as f64;
        let trace_h: f64 = (0..x.ncols()).map(|j| x.column(j).norm_squared() / m).sum();
        1e-6 * trace_h / d
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    /// Strictly upper-triangular feedback matrix from the LDL of `mH`.
    pub fn feedback(&self) -> &Matrix {
        &self.feedback
    }

    /// Diagonal of the LDL factorization of `mH`.
    pub fn d_vec(&self) -> &DVector<f64> {
        &self.d_vec
    }

    pub fn hh_dagger(&self) -> &Matrix {
        &self.hh_dagger
    }

    /// Eigenvalues of `H`, descending.
    pub fn eig_vals(&self) -> &DVector<f64> {
        &self.eig_vals
    }

    pub fn eig_vecs(&self) -> &Matrix {
        &self.eig_vecs
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when the regularized Hessian is treated as positive definite,
    /// in which case `H·H⁺ = I` and the right-factor update simplifies.
    pub fn is_positive_definite(&self) -> bool {
        self.delta > 0.0 || self.lambda_min > SV_CUTOFF * self.lambda_max.abs()
    }

    /// Calibration-weighted squared error `‖E·Xᵀ‖²_F = m·trace(E·H·Eᵀ)`.
    pub fn proxy_error(&self, e: &Matrix) -> Result<f64> {
        if e.ncols() != self.dim() {
            return Err(Error::shape(format!(
                "error matrix has {} columns, hessian dimension is {}",
                e.ncols(),
                self.dim()
            )));
        }
        let eh = e * &self.h;
        let mut acc = 0.0;
        for (a, b) in eh.iter().zip(e.iter()) {
            acc += a * b;
        }
        Ok(acc * self.m as f64)
    }

    /// Symmetric square root `H^{1/2}` from the stored eigendecomposition.
    pub fn h_sqrt(&self) -> Matrix {
        let d = self.dim();
        let mut lam = Matrix::zeros(d, d);
        for i in 0..d {
            lam[(i, i)] = self.eig_vals[i].max(0.0).sqrt();
        }
        &self.eig_vecs * lam * self.eig_vecs.transpose()
    }
}

/// LDL-style factorization `A = (M + I)·diag(D)·(M + I)ᵀ` with `M` strictly
/// UPPER triangular. This is the index-reversed variant of the textbook
/// unit-lower factorization, computed by a direct backward recursion.
pub fn ldl_upper(a: &Matrix) -> Result<(Matrix, DVector<f64>)> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::shape(format!("ldl_upper needs a square matrix, got {}x{}", d, a.ncols())));
    }
    let scale = crate::linalg::max_abs(a).max(f64::MIN_POSITIVE);
    let asym = crate::linalg::max_asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::domain(format!(
            "ldl_upper input is not symmetric (relative asymmetry {:.3e})",
            asym / scale
        )));
    }

    let mut u = Matrix::zeros(d, d); // unit upper triangular, diagonal implicit
    let mut dv = DVector::zeros(d);
    // Process pivots from the last index backwards; column k of the unit
    // factor only references pivots l > k, which are already available.
    for k in (0..d).rev() {
        let mut pivot = a[(k, k)];
        for l in (k + 1)..d {
            pivot -= u[(k, l)] * u[(k, l)] * dv[l];
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: k, value: pivot });
        }
        dv[k] = pivot;
        for i in 0..k {
            let mut s = a[(i, k)];
            for l in (k + 1)..d {
                s -= u[(i, l)] * dv[l] * u[(k, l)];
            }
            u[(i, k)] = s / pivot;
        }
    }
    Ok((u, dv))
}

/// Rebuild `(M + I)·diag(D)·(M + I)ᵀ` from LDL factors.
pub fn ldl_reconstruct(feedback: &Matrix, d_vec: &DVector<f64>) -> Matrix {
    let d = feedback.nrows();
    let mut unit = feedback.clone();
    for i in 0..d {
        unit[(i, i)] += 1.0;
    }
    &unit * Matrix::from_diagonal(d_vec) * unit.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_sq, random_orthogonal, standard_normal};
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_pd(d: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed);
        let q = random_orthogonal(d, &mut rng);
        let mut lam = Matrix::zeros(d, d);
        for i in 0..d {
            lam[(i, i)] = 0.5 + rng.random::<f64>() * 3.0;
        }
        &q * lam * q.transpose()
    }

    #[test]
    fn identity_activations() {
        let d = 5;
        let x = Matrix::identity(d, d);
        let ctx = HessianContext::from_activations(&x, 0.0).unwrap();
        assert_relative_eq!(ctx.h(), &(Matrix::identity(d, d) / d as f64), epsilon = 1e-14);
        assert_relative_eq!(crate::linalg::max_abs(ctx.feedback()), 0.0, epsilon = 1e-14);
        for i in 0..d {
            assert_relative_eq!(ctx.d_vec()[i], 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(ctx.hh_dagger(), &Matrix::identity(d, d), epsilon = 1e-10);
    }

    #[test]
    fn zero_column_with_regularization() {
        let mut rng = stream_rng(2);
        let mut x = Matrix::from_fn(10, 6, |_, _| standard_normal(&mut rng));
        x.set_column(3, &nalgebra::DVector::zeros(10));
        let delta = 1e-6;
        let ctx = HessianContext::from_activations(&x, delta).unwrap();
        assert!(ctx.lambda_min() >= delta * (1.0 - 1e-6));
        assert_relative_eq!(ctx.hh_dagger(), &Matrix::identity(6, 6), epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_accuracy() {
        let mut rng = stream_rng(3);
        let x = Matrix::from_fn(16, 8, |_, _| standard_normal(&mut rng));
        let ctx = HessianContext::from_activations(&x, 0.0).unwrap();
        let mh = ctx.h() * 16.0;
        let err = fro_sq(&(&mh - ldl_reconstruct(ctx.feedback(), ctx.d_vec()))).sqrt();
        assert!(err / fro_sq(&mh).sqrt() <= 1e-8);
    }

    #[test]
    fn ldl_diagonal_input() {
        let a = Matrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 0.5]));
        let (m, d) = ldl_upper(&a).unwrap();
        assert_relative_eq!(crate::linalg::max_abs(&m), 0.0, epsilon = 1e-15);
        assert_eq!(d.as_slice(), &[2.0, 5.0, 0.5]);
    }

    #[test]
    fn ldl_one_by_one() {
        let a = Matrix::from_element(1, 1, 4.0);
        let (m, d) = ldl_upper(&a).unwrap();
        assert_eq!(m[(0, 0)], 0.0);
        assert_eq!(d[0], 4.0);
    }

    #[test]
    fn ldl_round_trip_recovers_factors() {
        let d = 6;
        let mut rng = stream_rng(4);
        let mut m0 = Matrix::zeros(d, d);
        for i in 0..d {
            for j in (i + 1)..d {
                m0[(i, j)] = standard_normal(&mut rng) * 0.4;
            }
        }
        let d0 = DVector::from_fn(d, |_, _| 0.5 + rng.random::<f64>() * 2.0);
        let a = ldl_reconstruct(&m0, &d0);
        let (m1, d1) = ldl_upper(&a).unwrap();
        assert_relative_eq!(m1, m0, epsilon = 1e-8);
        assert_relative_eq!(d1, d0, epsilon = 1e-8);
    }

    #[test]
    fn ldl_rejects_indefinite() {
        let a = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0, 3.0]));
        match ldl_upper(&a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected pivot failure, got {other:?}"),
        }
    }

    #[test]
    fn ldl_strictly_upper_structure() {
        let a = random_pd(7, 5);
        let (m, _) = ldl_upper(&a).unwrap();
        for i in 0..7 {
            for j in 0..=i {
                assert_eq!(m[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn pivot_bound_on_random_pd_matrices() {
        // max_j D_j never exceeds the largest eigenvalue of the factored matrix.
        for seed in 0..100 {
            let a = random_pd(8, 1000 + seed);
            let (_, dv) = ldl_upper(&a).unwrap();
            let (vals, _) = sym_eigen_sorted(&a);
            let dmax = dv.iter().cloned().fold(0.0_f64, f64::max);
            assert!(dmax <= vals[0] * (1.0 + 1e-8), "seed {seed}: {dmax} > {}", vals[0]);
        }
    }

    #[test]
    fn hessian_is_psd_and_symmetric() {
        let mut rng = stream_rng(6);
        let x = Matrix::from_fn(12, 9, |_, _| standard_normal(&mut rng));
        let ctx = HessianContext::from_activations(&x, 0.0).unwrap();
        assert!(ctx.lambda_min() >= -1e-10 * ctx.lambda_max());
        let asym = crate::linalg::max_abs(&(ctx.h() - ctx.h().transpose()));
        assert!(asym <= 1e-12);
    }

    #[test]
    fn proxy_error_matches_direct_product() {
        let mut rng = stream_rng(8);
        let x = Matrix::from_fn(10, 6, |_, _| standard_normal(&mut rng));
        let ctx = HessianContext::from_activations(&x, 0.0).unwrap();
        let e = Matrix::from_fn(4, 6, |_, _| standard_normal(&mut rng));
        let direct = fro_sq(&(&e * x.transpose()));
        assert_relative_eq!(ctx.proxy_error(&e).unwrap(), direct, max_relative = 1e-10);
    }

    #[test]
    fn h_sqrt_squares_back() {
        let a = random_pd(6, 9);
        let ctx = HessianContext::from_hessian(&a, 6, 0.0).unwrap();
        let s = ctx.h_sqrt();
        assert_relative_eq!(&s * &s, a, epsilon = 1e-9);
    }
}
