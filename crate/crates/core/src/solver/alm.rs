use nalgebra::DMatrix;

use super::ops::{shrink_scalar, spectral_norm, svt};
use super::{SolveResult, SolverConfig};
use crate::error::{Error, Result};
use crate::labels::{project_slice, CandidateSet, SoftLabelMatrix, WeightMatrix};

/// Feasibility projection applied to the scaled label block `Ȳ` after every
/// ALM iteration. Column `j` of `Ȳ` must end up summing to `w_jj`.
pub trait LabelProjection {
    fn project(&self, y_bar: &mut DMatrix<f64>, weights: &WeightMatrix);
}

/// Candidate mask, non-negativity clamp, then per-column ℓ1 normalization to `w_jj`.
pub struct CandidateProjection<'a> {
    candidates: &'a [CandidateSet],
}

impl<'a> CandidateProjection<'a> {
    pub fn new(candidates: &'a [CandidateSet]) -> Self {
        CandidateProjection { candidates }
    }
}

impl LabelProjection for CandidateProjection<'_> {
    fn project(&self, y_bar: &mut DMatrix<f64>, weights: &WeightMatrix) {
        let c = y_bar.nrows();
        for (j, col) in y_bar.as_mut_slice().chunks_exact_mut(c).enumerate() {
            let set = &self.candidates[j];
            project_slice(col, |i| set.contains(i), weights.diag()[j]);
        }
    }
}

fn ensure_finite(m: &DMatrix<f64>, iteration: usize, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration,
            what: format!("non-finite entries in {what}"),
        })
    }
}

/// Runs the ALM iteration on `[P; X]·W` with a caller-supplied label projection.
pub fn solve_with_projection(
    features: &DMatrix<f64>,
    p: &SoftLabelMatrix,
    w: &WeightMatrix,
    config: &SolverConfig,
    projection: &dyn LabelProjection,
) -> Result<SolveResult> {
    let c = p.num_classes();
    let m = features.nrows();
    let n = p.num_instances();
    if features.ncols() != n || w.len() != n {
        return Err(Error::shape(format!(
            "features have {} columns, labels {n}, weights {}",
            features.ncols(),
            w.len()
        )));
    }

    let p_bar = w.scale_columns(p.as_matrix());
    let x_bar = w.scale_columns(features);
    let mut h_obs = DMatrix::zeros(c + m, n);
    h_obs.rows_mut(0, c).copy_from(&p_bar);
    h_obs.rows_mut(c, m).copy_from(&x_bar);

    let h_norm2 = spectral_norm(&h_obs)?;
    let params = config.resolve(c, m, n, h_norm2)?;
    let h_fro = h_obs.norm();
    if h_fro == 0.0 {
        return Ok(SolveResult::passthrough(p, features, params));
    }

    let mut dual = &h_obs / h_norm2;
    let mut mu = params.mu0;
    let mut y_bar = DMatrix::<f64>::zeros(c, n);
    let mut z_bar = DMatrix::<f64>::zeros(m, n);
    let mut e = DMatrix::<f64>::zeros(c + m, n);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;
        let inv_mu = 1.0 / mu;

        // Ē_P = P̄ − S_{γ/μ}[Ȳ − Λ_P/μ]
        {
            let t = params.gamma * inv_mu;
            let mut e_p = e.rows_mut(0, c);
            for j in 0..n {
                for i in 0..c {
                    let arg = y_bar[(i, j)] - inv_mu * dual[(i, j)];
                    e_p[(i, j)] = p_bar[(i, j)] - shrink_scalar(t, arg);
                }
            }
        }
        // Ē_X = S_{λ/μ}[X̄ − Z̄ + Λ_X/μ]
        {
            let t = params.lambda * inv_mu;
            let mut e_x = e.rows_mut(c, m);
            for j in 0..n {
                for i in 0..m {
                    let arg = x_bar[(i, j)] - z_bar[(i, j)] + inv_mu * dual[(c + i, j)];
                    e_x[(i, j)] = shrink_scalar(t, arg);
                }
            }
        }

        let a = &h_obs - &e + &dual * inv_mu;
        let h = svt(&a, inv_mu).map_err(|err| match err {
            Error::Numeric(what) => Error::Divergence { iteration: iterations, what },
            other => other,
        })?;
        ensure_finite(&h, iterations, "low-rank block")?;

        // Λ += μ (H̄_obs − H̄ − Ē); the residual is measured on the same
        // thresholded H̄, before the label block is projected
        let gap = &h_obs - &h - &e;
        let residual = gap.norm() / h_fro;
        dual += &gap * mu;
        mu = (params.rho * mu).min(params.mu_max);

        y_bar.copy_from(&h.rows(0, c));
        projection.project(&mut y_bar, w);
        z_bar.copy_from(&h.rows(c, m));
        ensure_finite(&dual, iterations, "dual variable")?;

        if !residual.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                what: "residual is not finite".into(),
            });
        }
        history.push(residual);
        if residual < params.tol {
            converged = true;
            break;
        }
    }

    let final_residual = history.last().copied().unwrap_or(0.0);
    let y = SoftLabelMatrix::from_matrix(w.unscale_columns(&y_bar));
    Ok(SolveResult {
        y,
        z: w.unscale_columns(&z_bar),
        e_p: w.unscale_columns(&e.rows(0, c).into_owned()),
        e_x: w.unscale_columns(&e.rows(c, m).into_owned()),
        iterations,
        final_residual,
        converged,
        residual_history: history,
        params,
    })
}
