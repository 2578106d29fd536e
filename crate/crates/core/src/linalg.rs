//! Log-determinants of positive semidefinite matrices.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// Relative pivot below which a PSD matrix is treated as singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

/// Cholesky factor of `a`, or `None` when `a` is (numerically) singular.
pub fn cholesky_psd(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if a.nrows() == 0 {
        return Cholesky::new(a.clone());
    }
    let scale = a.diagonal().iter().copied().fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let chol = Cholesky::new(a.clone())?;
    let l = chol.l_dirty();
    let ok = (0..a.nrows()).all(|k| {
        let p = l[(k, k)] * l[(k, k)];
        p.is_finite() && p > SINGULAR_PIVOT_TOL * scale
    });
    ok.then_some(chol)
}

/// `log det a` from a Cholesky factor.
pub fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `log det a` for PSD `a`; `-inf` when singular. The empty matrix has
/// determinant 1.
pub fn log_det_psd(a: &DMatrix<f64>) -> f64 {
    match cholesky_psd(a) {
        Some(c) => log_det_from_cholesky(&c),
        None => f64::NEG_INFINITY,
    }
}

/// Triangular factor `R` of the thin QR of `e`, or `None` when the Gram
/// matrix `e' e` is (numerically) singular. Working from `e` avoids squaring
/// its condition number.
fn gram_factor(e: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let (r, k) = e.shape();
    if k > r {
        return None;
    }
    if k == 0 {
        return Some((DMatrix::zeros(r, 0), DMatrix::zeros(0, 0)));
    }
    let scale = e.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let qr = e.clone().qr();
    let rf = qr.r();
    let ok = (0..k).all(|i| {
        let p = rf[(i, i)] * rf[(i, i)];
        p.is_finite() && p > SINGULAR_PIVOT_TOL * scale
    });
    ok.then(|| (qr.q(), rf))
}

/// `log det(e' e)`; `-inf` when singular.
pub fn gram_log_det(e: &DMatrix<f64>) -> f64 {
    match gram_factor(e) {
        Some((_, rf)) => 2.0 * rf.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// `log det(e' e)` and its gradient `2 e (e' e)^-1` with respect to `e`.
pub fn gram_log_det_with_gradient(e: &DMatrix<f64>) -> Option<(f64, DMatrix<f64>)> {
    let (q, rf) = gram_factor(e)?;
    let value = 2.0 * rf.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>();
    // e (R'R)^-1 = Q R'^-1
    let k = rf.nrows();
    let r_inv = rf.solve_upper_triangular(&DMatrix::identity(k, k))?;
    Some((value, q * r_inv.transpose() * 2.0))
}

/// Numerically stable `log(sum(exp(xs)))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_log_det() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        assert!((log_det_psd(&a) - 6f64.ln()).abs() < 1e-15);
        assert_eq!(log_det_psd(&DMatrix::zeros(0, 0)), 0.0);
    }

    #[test]
    fn rank_deficient_is_negative_infinity() {
        // Gram matrix of e and 2e
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(log_det_psd(&a), f64::NEG_INFINITY);
        // three vectors in R^2
        let e = DMatrix::from_column_slice(2, 3, &[1.0, 0.3, -0.2, 0.9, 0.5, 0.5]);
        assert_eq!(log_det_psd(&(e.transpose() * &e)), f64::NEG_INFINITY);
    }

    #[test]
    fn gram_log_det_matches_cholesky_route() {
        let e = DMatrix::from_column_slice(3, 2, &[1.0, 0.3, -0.2, 0.9, 0.5, 0.5]);
        let g = e.transpose() * &e;
        assert!((gram_log_det(&e) - log_det_psd(&g)).abs() < 1e-13);
        let (v, grad) = gram_log_det_with_gradient(&e).unwrap();
        assert!((v - log_det_psd(&g)).abs() < 1e-13);
        let want = &e * g.try_inverse().unwrap() * 2.0;
        assert!((grad - want).amax() < 1e-13);
        assert_eq!(gram_log_det(&DMatrix::zeros(3, 0)), 0.0);
        assert_eq!(gram_log_det(&DMatrix::from_column_slice(2, 3, &[1.0, 0.3, -0.2, 0.9, 0.5, 0.5])), f64::NEG_INFINITY);
        assert_eq!(gram_log_det(&DMatrix::from_column_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
