//! Globally optimal rank-constrained regression.
//!
//! `min_{rank(Z) ≤ k} ‖X·Z − Y‖²_F` is non-convex but solvable exactly with
//! two SVDs. For `X ∈ R^{m×d}` with `m ≤ d` the optimum value is the
//! trailing singular mass `Σ_{i>k} σ_i²(Y)`; for `m > d` an irreducible term
//! `‖(U·Ī_{m−d})ᵀY‖²_F` is added, where `U` spans X's column space.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, fro_sq, svd_sorted, sym_eigen_sorted, Matrix, SV_CUTOFF};

/// Solution of one rank-constrained regression instance.
#[derive(Debug, Clone)]
pub struct RcrSolution {
    /// The optimal rank-`k` matrix.
    pub z_star: Matrix,
    /// Factor carrying X's (pseudo-)inverted spectrum.
    pub left_factor: Matrix,
    /// Factor carrying the top-`k` singular triplets of the projected target.
    pub right_factor: Matrix,
    /// Achieved objective value.
    pub optimal_value: f64,
    /// Component no rank choice can remove (zero when `m ≤ d`).
    pub irreducible: f64,
}

/// Solve `min_{rank(Z) ≤ k} ‖X·Z − Y‖²_F` for `X ∈ R^{m×d}`, `Y ∈ R^{m×n}`.
///
/// `Z_star` is `d×n`, split as `left_factor (d×k) · right_factor (k×n)`.
/// Rank-deficient `X` is handled by pseudo-inverting its spectrum.
pub fn solve_rcr(x: &Matrix, y: &Matrix, k: usize) -> Result<RcrSolution> {
    ensure_finite(x, "regression design matrix")?;
    ensure_finite(y, "regression target matrix")?;
    let (m, d) = (x.nrows(), x.ncols());
    let n = y.ncols();
    if y.nrows() != m {
        return Err(Error::shape(format!(
            "X has {m} rows but Y has {} rows",
            y.nrows()
        )));
    }
    if k < 1 || k > m.min(n) {
        return Err(Error::domain(format!(
            "rank k={k} outside 1..=min(m={m}, n={n})"
        )));
    }

    let (u, s, _vt_x) = svd_sorted(x);
    let v_x = _vt_x.transpose(); // d × min(m, d)
    let smax = s[0];
    let inv_s = |si: f64| if si > SV_CUTOFF * smax { 1.0 / si } else { 0.0 };

    // Project Y onto X's column-space coordinates. For m ≤ d the thin U is
    // the full m×m basis; for m > d only the first d columns carry spectrum
    // and the remainder contributes the irreducible error.
    let t = u.transpose() * y; // (min(m,d)) × n
    let irreducible = if m > d {
        (fro_sq(y) - fro_sq(&t)).max(0.0)
    } else {
        0.0
    };

    let (ut, st, vtt) = svd_sorted(&t);
    let k_eff = k.min(st.len());

    // left = V · Σ⁻¹ · Ù_k, right = Σ̀_k · V̀_kᵀ; zero-pad past the
    // available spectrum so the requested shapes are preserved.
    let mut left = Matrix::zeros(d, k);
    let mut right = Matrix::zeros(k, n);
    let r = s.len();
    for col in 0..k_eff {
        let mut acc = nalgebra::DVector::zeros(d);
        for j in 0..r {
            let w = inv_s(s[j]) * ut[(j, col)];
            if w != 0.0 {
                acc.axpy(w, &v_x.column(j).into_owned(), 1.0);
            }
        }
        left.set_column(col, &acc);
        for c in 0..n {
            right[(col, c)] = st[col] * vtt[(col, c)];
        }
    }

    let z_star = &left * &right;
    let trailing: f64 = (k_eff..st.len()).map(|i| st[i] * st[i]).sum();
    Ok(RcrSolution {
        z_star,
        left_factor: left,
        right_factor: right,
        optimal_value: trailing + irreducible,
        irreducible,
    })
}

/// Positive-definite shortcut: solve `min_{rank(Z) ≤ k} ‖(A − Z)·H^{1/2}‖²_F`
/// through the eigendecomposition of `H`, avoiding any `m×d` design matrix.
///
/// `Z_star` is `n×d` here (same orientation as `A`), split as
/// `left_factor (n×k) · right_factor (k×d)`.
pub fn solve_rcr_pd(a: &Matrix, h: &Matrix, k: usize) -> Result<RcrSolution> {
    ensure_finite(a, "target matrix")?;
    ensure_finite(h, "hessian")?;
    let (n, d) = (a.nrows(), a.ncols());
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::shape(format!(
            "hessian must be {d}x{d} to match A, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if k < 1 || k > n.min(d) {
        return Err(Error::domain(format!(
            "rank k={k} outside 1..=min(n={n}, d={d})"
        )));
    }
    let (lam, u_h) = sym_eigen_sorted(h);
    let lam_min = lam[lam.len() - 1];
    if lam_min <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            pivot: lam.len() - 1,
            value: lam_min,
        });
    }

    // Y = A·U·Λ^{1/2}; its best rank-k approximation maps back through
    // Λ^{-1/2}·Uᵀ.
    let mut lam_sqrt = Matrix::zeros(d, d);
    let mut lam_isqrt = Matrix::zeros(d, d);
    for i in 0..d {
        lam_sqrt[(i, i)] = lam[i].sqrt();
        lam_isqrt[(i, i)] = 1.0 / lam[i].sqrt();
    }
    let y = a * &u_h * &lam_sqrt;
    let (uy, sy, vty) = svd_sorted(&y);
    let k_eff = k.min(sy.len());

    let mut left = Matrix::zeros(n, k);
    for col in 0..k_eff {
        left.set_column(col, &uy.column(col));
    }
    let mut scaled_vt = Matrix::zeros(k, d);
    for col in 0..k_eff {
        for c in 0..d {
            scaled_vt[(col, c)] = sy[col] * vty[(col, c)];
        }
    }
    let right = &scaled_vt * &lam_isqrt * u_h.transpose();

    let z_star = &left * &right;
    let trailing: f64 = (k_eff..sy.len()).map(|i| sy[i] * sy[i]).sum();
    Ok(RcrSolution {
        z_star,
        left_factor: left,
        right_factor: right,
        optimal_value: trailing,
        irreducible: 0.0,
    })
}
