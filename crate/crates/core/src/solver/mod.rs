//! Augmented Lagrangian solver for (weighted) matrix completion of the
//! stacked label/feature matrix `[P; X]`.
//!
//! The solver works on the column-scaled matrix `H̄_obs = [P; X]·W`. Each
//! iteration soft-thresholds the two noise blocks, applies singular value
//! thresholding to the low-rank block, takes a dual step, grows the penalty,
//! and projects the label block back onto its feasible set. Outputs are
//! returned unscaled.

mod alm;
mod ops;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{AmbiguousDataset, SoftLabelMatrix, WeightMatrix};

pub use alm::{solve_with_projection, CandidateProjection, LabelProjection};
pub use ops::{shrink, shrink_scalar, spectral_norm, svt};

/// `1/√max(c + m, N)`, the RPCA trade-off for the sparse feature noise.
pub fn default_lambda(c: usize, m: usize, n: usize) -> f64 {
    1.0 / ((c + m).max(n) as f64).sqrt()
}

/// ALM hyperparameters. `None` fields are derived from the problem at solve time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Sparse feature-noise weight; defaults to [`default_lambda`].
    pub lambda: Option<f64>,
    /// Label sparsity weight; defaults to twice [`default_lambda`].
    pub gamma: Option<f64>,
    /// Initial penalty; defaults to `1.25 / ‖H̄_obs‖₂`.
    pub mu0: Option<f64>,
    pub rho: f64,
    /// Penalty ceiling; defaults to `mu0 · 1e7`.
    pub mu_max: Option<f64>,
    /// Relative Frobenius residual at which the iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: None,
            gamma: None,
            mu0: None,
            rho: 1.5,
            mu_max: None,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

/// Fully resolved parameters for one solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedParams {
    pub lambda: f64,
    pub gamma: f64,
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
            _ => Ok(()),
        };
        positive("lambda", self.lambda)?;
        positive("gamma", self.gamma)?;
        positive("mu0", self.mu0)?;
        positive("mu_max", self.mu_max)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if let (Some(m0), Some(mx)) = (self.mu0, self.mu_max) {
            if mx < m0 {
                return Err(Error::Config(format!("mu_max {mx} below mu0 {m0}")));
            }
        }
        Ok(())
    }

    /// Fills the defaults for a `(c + m) × N` problem whose scaled matrix has
    /// spectral norm `h_norm2`.
    pub fn resolve(&self, c: usize, m: usize, n: usize, h_norm2: f64) -> Result<ResolvedParams> {
        self.validate()?;
        let lambda0 = default_lambda(c, m, n);
        let mu0 = match self.mu0 {
            Some(v) => v,
            None if h_norm2 > 0.0 => 1.25 / h_norm2,
            None => 1.25,
        };
        let mu_max = self.mu_max.unwrap_or(mu0 * 1e7);
        if mu_max < mu0 {
            return Err(Error::Config(format!("mu_max {mu_max} below mu0 {mu0}")));
        }
        Ok(ResolvedParams {
            lambda: self.lambda.unwrap_or(lambda0),
            gamma: self.gamma.unwrap_or(2.0 * lambda0),
            mu0,
            rho: self.rho,
            mu_max,
            tol: self.tol,
            max_iter: self.max_iter,
        })
    }
}

/// Recovered decomposition `[P; X] = [Y; Z] + [E_P; E_X]`, unscaled.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub y: SoftLabelMatrix,
    pub z: DMatrix<f64>,
    pub e_p: DMatrix<f64>,
    pub e_x: DMatrix<f64>,
    pub iterations: usize,
    /// `‖H̄_obs − H̄ − Ē‖_F / ‖H̄_obs‖_F` after the last iteration, with `H̄`
    /// the thresholded iterate before the label projection.
    pub final_residual: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub params: ResolvedParams,
}

impl SolveResult {
    /// A result that returns the inputs untouched (no iterations run).
    pub(crate) fn passthrough(p: &SoftLabelMatrix, x: &DMatrix<f64>, params: ResolvedParams) -> Self {
        SolveResult {
            y: p.clone(),
            z: x.clone(),
            e_p: DMatrix::zeros(p.num_classes(), p.num_instances()),
            e_x: DMatrix::zeros(x.nrows(), x.ncols()),
            iterations: 0,
            final_residual: 0.0,
            converged: true,
            residual_history: Vec::new(),
            params,
        }
    }
}

fn check_inputs(dataset: &AmbiguousDataset, p: &SoftLabelMatrix, w: &WeightMatrix) -> Result<()> {
    let n = dataset.num_instances();
    if p.num_instances() != n || p.num_classes() != dataset.num_classes() {
        return Err(Error::shape(format!(
            "soft labels are {}x{}, dataset has {} classes and {n} instances",
            p.num_classes(),
            p.num_instances(),
            dataset.num_classes()
        )));
    }
    if w.len() != n {
        return Err(Error::shape(format!("{} weights for {n} instances", w.len())));
    }
    Ok(())
}

/// Weighted solve: `P` and `X` are column-scaled by `W` and the label block is
/// kept on the candidate-supported simplex scaled to `w_jj`.
pub fn wmcar_solve(
    dataset: &AmbiguousDataset,
    p: &SoftLabelMatrix,
    w: &WeightMatrix,
    config: &SolverConfig,
) -> Result<SolveResult> {
    check_inputs(dataset, p, w)?;
    let projection = CandidateProjection::new(dataset.candidates());
    solve_with_projection(dataset.features(), p, w, config, &projection)
}

/// Unweighted solve (`W = I`).
pub fn mcar_solve(
    dataset: &AmbiguousDataset,
    p: &SoftLabelMatrix,
    config: &SolverConfig,
) -> Result<SolveResult> {
    wmcar_solve(dataset, p, &WeightMatrix::identity(dataset.num_instances()), config)
}

/// Candidate sets consistent with `y`'s current support.
#[cfg(test)]
pub(crate) fn candidates_match(y: &SoftLabelMatrix, candidates: &[crate::labels::CandidateSet]) -> bool {
    candidates.iter().enumerate().all(|(j, s)| {
        y.column(j)
            .iter()
            .enumerate()
            .all(|(i, &v)| v == 0.0 || s.contains(i))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{init_soft_labels, predict_labels, CandidateSet};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn set(v: &[usize]) -> CandidateSet {
        CandidateSet::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn default_lambda_values() {
        assert_abs_diff_eq!(default_lambda(16, 5400, 1122), 1.0 / 5416f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(default_lambda(16, 5400, 1122), 0.013589, epsilon = 1e-6);
        assert_eq!(default_lambda(2, 3, 5), 1.0 / 5f64.sqrt());
        assert_eq!(default_lambda(1, 1, 1), 1.0 / 2f64.sqrt());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { rho: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { mu0: Some(2.0), mu_max: Some(1.0), ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig::default().with_lambda(-1.0).validate().is_err());
    }

    #[test]
    fn resolve_defaults() {
        let r = SolverConfig::default().resolve(3, 20, 30, 4.0).unwrap();
        assert_abs_diff_eq!(r.gamma, 2.0 * r.lambda);
        assert_abs_diff_eq!(r.mu0, 1.25 / 4.0);
        assert_abs_diff_eq!(r.mu_max, r.mu0 * 1e7);
    }

    fn toy() -> AmbiguousDataset {
        let x = DMatrix::from_column_slice(
            2,
            6,
            &[1.0, 0.0, 1.0, 0.1, 0.9, 0.0, 0.0, 1.0, 0.1, 1.0, 0.0, 0.9],
        );
        let cands = vec![set(&[0]), set(&[0, 1]), set(&[0, 1]), set(&[1]), set(&[0, 1]), set(&[0, 1])];
        AmbiguousDataset::new(x, cands, 2, Some(vec![0, 0, 0, 1, 1, 1])).unwrap()
    }

    #[test]
    fn singleton_candidates_pin_y() {
        let x = DMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        let cands = vec![set(&[0]), set(&[1]), set(&[2]), set(&[0])];
        let ds = AmbiguousDataset::new(x, cands.clone(), 3, None).unwrap();
        let p = init_soft_labels(&cands, 3).unwrap();
        let r = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        assert_eq!(r.y, p);
    }

    #[test]
    fn solve_output_is_feasible_and_deterministic() {
        let ds = toy();
        let p = init_soft_labels(ds.candidates(), 2).unwrap();
        let a = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        let b = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.z, b.z);
        a.y.validate(ds.candidates(), None, 1e-9).unwrap();
        assert!(a.final_residual.is_finite());
        assert!(a.iterations <= 500);
        assert!(candidates_match(&a.y, ds.candidates()));
        let pred = predict_labels(&a.y, ds.candidates()).unwrap();
        assert_eq!(pred, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn identical_feature_columns_converge() {
        let x = DMatrix::from_element(4, 6, 0.5);
        let cands = vec![set(&[0]), set(&[1]), set(&[2]), set(&[0]), set(&[1]), set(&[2])];
        let ds = AmbiguousDataset::new(x, cands.clone(), 3, None).unwrap();
        let p = init_soft_labels(&cands, 3).unwrap();
        let r = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        assert!(r.final_residual.is_finite());
        r.y.validate(&cands, None, 1e-9).unwrap();
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let ds = toy();
        let p = init_soft_labels(&ds.candidates()[..3], 2).unwrap();
        assert!(matches!(mcar_solve(&ds, &p, &SolverConfig::default()), Err(Error::Shape(_))));
    }
}
