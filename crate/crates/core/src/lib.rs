//! Disambiguation of ambiguously labeled data by low-rank matrix completion.
//!
//! Every instance carries a set of candidate labels, exactly one of which is
//! correct. Stacking the soft-label matrix on top of the feature matrix gives
//! a matrix that is low rank when the classes are separable, so recovering
//! its low-rank part also recovers the labels.
//!
//! - [`labels`]: candidate sets, soft labels, instance weights, metrics
//! - [`synth`]: convex-hull data generator and ambiguity synthesis
//! - [`solver`]: the augmented Lagrangian solver (`mcar_solve`, `wmcar_solve`)
//! - [`ice`]: iterative candidate elimination around the solver
//! - [`group`]: group uniqueness constraints with a null class
//! - [`harness`]: file formats, experiment sweeps and reports

pub mod error;
pub mod group;
pub mod harness;
pub mod ice;
pub mod labels;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use labels::{
    estimated_class_counts, imbalance_factor, init_soft_labels, labeling_error_rate,
    predict_labels, project_column_to_candidate_simplex, weight_matrix, AmbiguousDataset,
    CandidateSet, ClassIndex, Imbalance, SoftLabelMatrix, WeightMatrix,
};
pub use solver::{default_lambda, mcar_solve, shrink, svt, wmcar_solve, SolveResult, SolverConfig};
