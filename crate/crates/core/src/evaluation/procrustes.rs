use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity transform `y ~ s R x + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcrustesResult {
    pub scale: f64,
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    /// Sum of squared alignment errors.
    pub residual: f64,
}

impl ProcrustesResult {
    /// Transform the columns of `points`.
    pub fn apply(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.rotation * points * self.scale;
        for mut c in out.column_iter_mut() {
            c += &self.translation;
        }
        out
    }
}

/// Best similarity transform taking the columns of `source` onto those of
/// `target` (least squares). Reflections are excluded unless
/// `allow_reflection`.
pub fn procrustes_align(
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
    allow_reflection: bool,
) -> Result<ProcrustesResult> {
    if source.shape() != target.shape() {
        return Err(Error::Dimension { expected: source.ncols(), got: target.ncols() });
    }
    let (k, n) = source.shape();
    if n < 2 || k == 0 {
        return Err(Error::Degenerate("alignment needs at least two points".into()));
    }
    let mu_x = source.column_mean();
    let mu_y = target.column_mean();
    let xc = DMatrix::from_fn(k, n, |i, j| source[(i, j)] - mu_x[i]);
    let yc = DMatrix::from_fn(k, n, |i, j| target[(i, j)] - mu_y[i]);
    let var_x = xc.norm_squared();
    if !(var_x > 0.0) {
        return Err(Error::Degenerate("all source points coincide".into()));
    }
    let cov = &yc * xc.transpose();
    let svd = cov.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut signs = DVector::from_element(k, 1.0);
    if !allow_reflection && (u.determinant() * v_t.determinant()) < 0.0 {
        // flip the direction of the smallest singular value
        let (min_idx, _) = svd.singular_values.argmin();
        signs[min_idx] = -1.0;
    }
    let rotation = &u * DMatrix::from_diagonal(&signs) * &v_t;
    let scale = svd.singular_values.component_mul(&signs).sum() / var_x;
    let translation = &mu_y - &rotation * &mu_x * scale;
    let mut r = ProcrustesResult { scale, rotation, translation, residual: 0.0 };
    r.residual = (r.apply(source) - target).norm_squared();
    Ok(r)
}
