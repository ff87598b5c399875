use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// `sgn(b) · max(|b| − a, 0)`.
#[inline]
pub fn shrink_scalar(a: f64, b: f64) -> f64 {
    if b > a {
        b - a
    } else if b < -a {
        b + a
    } else {
        0.0
    }
}

/// Elementwise soft threshold of `b` at level `a ≥ 0`.
pub fn shrink(a: f64, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert!(a >= 0.0);
    b.map(|v| shrink_scalar(a, v))
}

fn checked_svd(a: &DMatrix<f64>, vectors: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("SVD input has non-finite entries".into()));
    }
    SVD::try_new(a.clone(), vectors, vectors, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(checked_svd(a, false)?.singular_values.max())
}

/// Singular value thresholding `U · S_τ[Σ] · Vᵀ` from a thin SVD.
pub fn svt(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("threshold {tau} must be non-negative")));
    }
    if a.is_empty() {
        return Ok(a.clone());
    }
    let svd = checked_svd(a, true)?;
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("Vᵀ requested");
    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter_map(|(k, &s)| (s > tau).then_some((k, s - tau)))
        .collect();
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, s) in kept {
        // rank-one update s · u_k · v_kᵀ
        out.ger(s, &u.column(k), &v_t.row(k).transpose(), 1.0);
    }
    Ok(out)
}
