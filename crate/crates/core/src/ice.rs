//! Iterative candidate elimination (ICE).
//!
//! Each outer iteration recomputes the instance weights from the current soft
//! labels, solves, and then drops the lowest-scoring candidate from the
//! `⌈f_e·|A|⌉` least confident ambiguous instances, where `A` is the set of
//! instances that still have more than one candidate. Eliminations are never
//! undone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{
    init_soft_labels, labeling_error_rate, predict_labels, project_slice, weight_matrix,
    AmbiguousDataset, CandidateSet, ClassIndex, SoftLabelMatrix, WeightMatrix,
};
use crate::solver::{wmcar_solve, SolveResult, SolverConfig};
use crate::synth::ceil_portion;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Recompute `W` from the current soft labels every outer iteration.
    Weighted,
    /// `W = I` throughout.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IceConfig {
    pub elimination_factor: f64,
    pub max_outer: usize,
    pub weighting: Weighting,
    pub solver: SolverConfig,
}

impl Default for IceConfig {
    fn default() -> Self {
        IceConfig {
            elimination_factor: 0.5,
            max_outer: 5,
            weighting: Weighting::Weighted,
            solver: SolverConfig::default(),
        }
    }
}

impl IceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.elimination_factor) {
            return Err(Error::Config(format!(
                "elimination factor {} outside [0, 1]",
                self.elimination_factor
            )));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IceIteration {
    pub outer: usize,
    /// `|A|` before elimination.
    pub active: usize,
    /// `(instance, removed class)` pairs.
    pub eliminated: Vec<(usize, ClassIndex)>,
    /// Candidate-set sizes after elimination.
    pub candidate_sizes: Vec<usize>,
    pub error_rate: Option<f64>,
    pub solver_iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IceTrace {
    pub initial_sizes: Vec<usize>,
    pub iterations: Vec<IceIteration>,
}

impl IceTrace {
    pub fn total_candidates(sizes: &[usize]) -> usize {
        sizes.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct IceOutcome {
    /// Solver output of the last outer iteration, with `y` replaced by the
    /// soft labels re-projected onto the final candidate sets.
    pub result: SolveResult,
    pub trace: IceTrace,
    pub candidates: Vec<CandidateSet>,
}

impl IceOutcome {
    pub fn predictions(&self) -> Result<Vec<ClassIndex>> {
        predict_labels(&self.result.y, &self.candidates)
    }
}

/// `argmin_{i ∈ L_j} y_ij` with its score; ties go to the lowest class.
pub fn least_likely_candidate(y: &SoftLabelMatrix, set: &CandidateSet, j: usize) -> (ClassIndex, f64) {
    let col = y.column(j);
    let mut best = set.as_slice()[0];
    for i in set.iter().skip(1) {
        if col[i] < col[best] {
            best = i;
        }
    }
    (best, col[best])
}

/// Instances with the `⌈f_e · |A|⌉` smallest scores, `A` being the instances
/// present in `scores`. Ties at the cutoff go to the lower instance index.
/// Returned in increasing instance order.
pub fn select_elimination_set(scores: &[(usize, f64)], elimination_factor: f64) -> Vec<usize> {
    let k = ceil_portion(elimination_factor, scores.len());
    let mut ranked: Vec<(usize, f64)> = scores.to_vec();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<usize> = ranked.into_iter().take(k).map(|(j, _)| j).collect();
    out.sort_unstable();
    out
}

fn reproject(y: &mut SoftLabelMatrix, candidates: &[CandidateSet]) {
    let mut m = std::mem::replace(y, SoftLabelMatrix::from_matrix(Default::default())).into_matrix();
    let c = m.nrows();
    for (j, col) in m.as_mut_slice().chunks_exact_mut(c).enumerate() {
        let set = &candidates[j];
        project_slice(col, |i| set.contains(i), 1.0);
    }
    *y = SoftLabelMatrix::from_matrix(m);
}

pub fn wmcar_ice(dataset: &AmbiguousDataset, config: &IceConfig) -> Result<IceOutcome> {
    config.validate()?;
    let c = dataset.num_classes();
    let n = dataset.num_instances();
    let mut candidates = dataset.candidates().to_vec();
    let mut p = init_soft_labels(&candidates, c)?;
    let mut trace = IceTrace {
        initial_sizes: candidates.iter().map(CandidateSet::len).collect(),
        iterations: Vec::new(),
    };
    let mut last: Option<SolveResult> = None;

    let mut outer = 0;
    loop {
        let active: Vec<usize> = (0..n).filter(|&j| candidates[j].len() > 1).collect();
        if active.is_empty() || outer >= config.max_outer {
            break;
        }
        outer += 1;

        let w = match config.weighting {
            Weighting::Weighted => weight_matrix(&p),
            Weighting::Unweighted => WeightMatrix::identity(n),
        };
        let current = dataset.with_candidates(candidates.clone())?;
        let mut result = wmcar_solve(&current, &p, &w, &config.solver).map_err(|e| Error::Outer {
            outer,
            source: Box::new(e),
        })?;

        let scores: Vec<(usize, f64)> = active
            .iter()
            .map(|&j| (j, least_likely_candidate(&result.y, &candidates[j], j).1))
            .collect();
        let chosen = select_elimination_set(&scores, config.elimination_factor);
        let mut eliminated = Vec::with_capacity(chosen.len());
        for j in chosen {
            let (drop, _) = least_likely_candidate(&result.y, &candidates[j], j);
            if candidates[j].remove(drop) {
                eliminated.push((j, drop));
            }
        }

        reproject(&mut result.y, &candidates);
        p = result.y.clone();

        let error_rate = match dataset.ground_truth() {
            Some(truth) => Some(labeling_error_rate(&predict_labels(&p, &candidates)?, truth)?),
            None => None,
        };
        trace.iterations.push(IceIteration {
            outer,
            active: active.len(),
            eliminated,
            candidate_sizes: candidates.iter().map(CandidateSet::len).collect(),
            error_rate,
            solver_iterations: result.iterations,
            final_residual: result.final_residual,
            converged: result.converged,
        });
        last = Some(result);
    }

    let result = match last {
        Some(r) => r,
        None => {
            let params = config.solver.resolve(c, dataset.feature_dim(), n, 0.0)?;
            SolveResult::passthrough(&p, dataset.features(), params)
        }
    };
    Ok(IceOutcome {
        result,
        trace,
        candidates,
    })
}

/// ICE with identity weights.
pub fn mcar_ice(dataset: &AmbiguousDataset, config: &IceConfig) -> Result<IceOutcome> {
    let cfg = IceConfig {
        weighting: Weighting::Unweighted,
        ..config.clone()
    };
    wmcar_ice(dataset, &cfg)
}
