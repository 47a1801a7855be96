//! Small dense-linear-algebra helpers shared across the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative cutoff below which a singular value is treated as zero.
pub const SV_CUTOFF: f64 = 1e-12;

pub fn ensure_finite(a: &Matrix, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Thin SVD with singular values sorted descending and a fixed sign
/// convention: the largest-magnitude entry of each left singular vector is
/// positive. Returns `(u, sigma, v_t)` with `a = u * diag(sigma) * v_t`.
pub fn svd_sorted(a: &Matrix) -> (Matrix, DVector<f64>, Matrix) {
    let svd = a.clone().svd(true, true);
    let mut u = svd.u.expect("svd requested u");
    let mut vt = svd.v_t.expect("svd requested v_t");
    let mut s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let sorted_s = DVector::from_iterator(s.len(), order.iter().map(|&i| s[i]));
    let mut su = Matrix::zeros(u.nrows(), u.ncols());
    let mut svt = Matrix::zeros(vt.nrows(), vt.ncols());
    for (new, &old) in order.iter().enumerate() {
        su.set_column(new, &u.column(old));
        svt.set_row(new, &vt.row(old));
    }
    u = su;
    vt = svt;
    s = sorted_s;

    for j in 0..u.ncols() {
        let col = u.column(j);
        let mut arg = 0;
        let mut best = 0.0_f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                arg = i;
            }
        }
        if u[(arg, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            if j < vt.nrows() {
                for c in 0..vt.ncols() {
                    vt[(j, c)] = -vt[(j, c)];
                }
            }
        }
    }
    (u, s, vt)
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
/// Returns `(values, vectors)` with `a = vectors * diag(values) * vectors^T`.
pub fn sym_eigen_sorted(a: &Matrix) -> (DVector<f64>, Matrix) {
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Matrix::zeros(a.nrows(), a.ncols());
    for (new, &old) in order.iter().enumerate() {
        vecs.set_column(new, &eig.eigenvectors.column(old));
    }
    (vals, vecs)
}

/// Moore-Penrose pseudo-inverse with relative cutoff `SV_CUTOFF * sigma_max`.
pub fn pinv(a: &Matrix) -> Matrix {
    let (u, s, vt) = svd_sorted(a);
    let smax = if s.is_empty() { 0.0 } else { s[0] };
    let tol = SV_CUTOFF * smax;
    let r = s.len();
    let mut sinv = Matrix::zeros(r, r);
    for i in 0..r {
        if s[i] > tol {
            sinv[(i, i)] = 1.0 / s[i];
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Best rank-`k` approximation in the Frobenius norm.
pub fn truncate_rank(a: &Matrix, k: usize) -> Matrix {
    let (u, s, vt) = svd_sorted(a);
    let k = k.min(s.len());
    if k == 0 {
        return Matrix::zeros(a.nrows(), a.ncols());
    }
    let uk = u.columns(0, k).into_owned();
    let sk = Matrix::from_diagonal(&s.rows(0, k).into_owned());
    let vtk = vt.rows(0, k).into_owned();
    uk * sk * vtk
}

/// Frobenius norm squared.
pub fn fro_sq(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Largest absolute entry.
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute difference between an entry and its transpose mate.
pub fn max_asymmetry(a: &Matrix) -> f64 {
    let mut acc = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..j.min(a.nrows()) {
            acc = acc.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    acc
}

/// trace(e * diag(w) * e^T) without forming the product.
pub fn weighted_gram_trace(e: &Matrix, w: &DVector<f64>) -> Result<f64> {
    if e.ncols() != w.len() {
        return Err(Error::shape(format!(
            "weight vector of length {} against {} columns",
            w.len(),
            e.ncols()
        )));
    }
    let mut acc = 0.0;
    for j in 0..e.ncols() {
        acc += w[j] * e.column(j).norm_squared();
    }
    Ok(acc)
}

/// Haar-ish random orthogonal matrix from the QR of a Gaussian draw,
/// with the R diagonal sign-normalized for determinism.
pub fn random_orthogonal<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| standard_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Box-Muller standard normal, avoiding an extra distributions dependency.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}
