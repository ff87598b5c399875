//! File formats, seeded experiment sweeps and report emission.

pub mod experiment;
pub mod io;

pub use experiment::{
    emit_report, run_experiment, synthesize_dataset, DataSource, DominantLabel, ExperimentConfig,
    ExperimentReport, Failure, Method, Predictions, SeedRun, Sweep, SweepParameter, SweepPoint,
};
pub use io::{load_dataset, DatasetPaths, LoadOptions, LoadedData};
