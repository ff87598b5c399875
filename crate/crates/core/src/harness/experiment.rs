//! Seeded experiments: method × sweep point × seed, with aggregate reports.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::{load_dataset, write_json, write_predictions, DatasetPaths, LoadOptions, LoadedData};
use crate::error::{Error, Result};
use crate::group::{group_mcar_solve, init_group_soft_labels, GroupOptions, GroupStructure};
use crate::ice::{wmcar_ice, IceConfig, Weighting};
use crate::labels::{
    imbalance_factor, init_soft_labels, labeling_error_rate, predict_labels, weight_matrix,
    AmbiguousDataset, ClassIndex, Imbalance, SoftLabelMatrix, WeightMatrix,
};
use crate::solver::{wmcar_solve, SolverConfig};
use crate::synth::{add_dominant_label, gen_convex_hull_data, synthesize_ambiguity, AmbiguityParams, ConvexHullSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mcar,
    Wmcar,
    McarIce,
    WmcarIce,
    GroupMcar,
    GroupWmcar,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mcar,
        Method::Wmcar,
        Method::McarIce,
        Method::WmcarIce,
        Method::GroupMcar,
        Method::GroupWmcar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mcar => "mcar",
            Method::Wmcar => "wmcar",
            Method::McarIce => "mcar-ice",
            Method::WmcarIce => "wmcar-ice",
            Method::GroupMcar => "group-mcar",
            Method::GroupWmcar => "group-wmcar",
        }
    }

    pub fn is_group(self) -> bool {
        matches!(self, Method::GroupMcar | Method::GroupWmcar)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// A class added to a portion of all candidate sets. `class` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominantLabel {
    pub class: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Regenerated for every seed; the seeds in `hull` and `ambiguity` are
    /// replaced by values derived from the run seed.
    Synthetic {
        hull: ConvexHullSpec,
        ambiguity: AmbiguityParams,
        #[serde(default)]
        dominant: Option<DominantLabel>,
    },
    Files {
        paths: DatasetPaths,
        #[serde(default)]
        load: LoadOptions,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Fraction,
    ExtraCount,
    Epsilon,
    NoiseLevel,
    SparseFraction,
    DominantRate,
    Lambda,
    Gamma,
    EliminationFactor,
    MaxOuter,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 10] = [
        SweepParameter::Fraction,
        SweepParameter::ExtraCount,
        SweepParameter::Epsilon,
        SweepParameter::NoiseLevel,
        SweepParameter::SparseFraction,
        SweepParameter::DominantRate,
        SweepParameter::Lambda,
        SweepParameter::Gamma,
        SweepParameter::EliminationFactor,
        SweepParameter::MaxOuter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Fraction => "fraction",
            SweepParameter::ExtraCount => "extra_count",
            SweepParameter::Epsilon => "epsilon",
            SweepParameter::NoiseLevel => "noise_level",
            SweepParameter::SparseFraction => "sparse_fraction",
            SweepParameter::DominantRate => "dominant_rate",
            SweepParameter::Lambda => "lambda",
            SweepParameter::Gamma => "gamma",
            SweepParameter::EliminationFactor => "elimination_factor",
            SweepParameter::MaxOuter => "max_outer",
        }
    }

    /// Returns a copy of `config` with this parameter set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = config.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} needs a non-negative integer, got {v}", self.name())))
            }
        };
        let synthetic_only = || Error::Config(format!("{} applies to synthetic data only", self.name()));
        match self {
            SweepParameter::Lambda => out.solver.lambda = Some(value),
            SweepParameter::Gamma => out.solver.gamma = Some(value),
            SweepParameter::EliminationFactor => out.elimination_factor = value,
            SweepParameter::MaxOuter => out.max_outer = count(value)?,
            _ => {
                let DataSource::Synthetic { hull, ambiguity, dominant } = &mut out.data else {
                    return Err(synthetic_only());
                };
                match self {
                    SweepParameter::Fraction => ambiguity.fraction = value,
                    SweepParameter::ExtraCount => ambiguity.extra_count = count(value)?,
                    SweepParameter::Epsilon => ambiguity.epsilon = value,
                    SweepParameter::NoiseLevel => hull.noise_level = value,
                    SweepParameter::SparseFraction => hull.sparse_fraction = value,
                    SweepParameter::DominantRate => match dominant {
                        Some(d) => d.rate = value,
                        None => {
                            return Err(Error::Config("dominant_rate sweep needs a dominant label".into()))
                        }
                    },
                    _ => unreachable!(),
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep parameter '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_fe() -> f64 {
    0.5
}

fn default_max_outer() -> usize {
    5
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    pub data: DataSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_fe")]
    pub elimination_factor: f64,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default)]
    pub group: GroupOptions,
    /// Use `W = I` even for the weighted methods.
    #[serde(default)]
    pub force_identity_weights: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(method: Method, data: DataSource) -> Self {
        ExperimentConfig {
            method,
            data,
            solver: SolverConfig::default(),
            elimination_factor: default_fe(),
            max_outer: default_max_outer(),
            group: GroupOptions::default(),
            force_identity_weights: false,
            seeds: default_seeds(),
            sweep: None,
            output_dir: None,
        }
    }

    pub fn synthetic(method: Method, hull: ConvexHullSpec, ambiguity: AmbiguityParams) -> Self {
        Self::new(
            method,
            DataSource::Synthetic {
                hull,
                ambiguity,
                dominant: None,
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.method.is_group() {
            match &self.data {
                DataSource::Files { paths, .. } if paths.groups.is_some() => {}
                _ => return Err(Error::Config(format!("{} needs a groups file", self.method))),
            }
        }
        if let DataSource::Synthetic { hull, dominant, .. } = &self.data {
            hull.validate()?;
            if let Some(d) = dominant {
                if d.class == 0 || d.class > hull.num_classes {
                    return Err(Error::Config(format!("dominant class {} out of range", d.class)));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
            for &v in &s.values {
                s.parameter.apply(self, v)?;
            }
        }
        self.ice_config(self.method).validate()
    }

    fn ice_config(&self, method: Method) -> IceConfig {
        IceConfig {
            elimination_factor: self.elimination_factor,
            max_outer: self.max_outer,
            weighting: if method == Method::WmcarIce && !self.force_identity_weights {
                Weighting::Weighted
            } else {
                Weighting::Unweighted
            },
            solver: self.solver.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub message: String,
    /// Numeric breakdown (as opposed to bad input).
    pub numeric: bool,
}

/// One seed at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub error_rate: Option<f64>,
    pub imbalance: Option<Imbalance>,
    pub solver_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub group_conflicts: usize,
    pub wall_time_secs: f64,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: Option<f64>,
    pub mean_error: Option<f64>,
    /// Population standard deviation over seeds.
    pub std_error: Option<f64>,
    pub runs: usize,
    pub failures: usize,
}

impl SweepPoint {
    /// Aggregates the runs belonging to one sweep value.
    pub fn summarize(value: Option<f64>, runs: &[SeedRun]) -> Self {
        let errs: Vec<f64> = runs.iter().filter_map(|r| r.error_rate).collect();
        let (mean, std) = if errs.is_empty() {
            (None, None)
        } else {
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
            (Some(mean), Some(var.sqrt()))
        };
        SweepPoint {
            value,
            mean_error: mean,
            std_error: std,
            runs: runs.len(),
            failures: runs.iter().filter(|r| r.failure.is_some()).count(),
        }
    }
}

/// Hard and soft labels from one run.
#[derive(Clone, Debug)]
pub struct Predictions {
    pub labels: Vec<ClassIndex>,
    pub scores: SoftLabelMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub parameter: Option<SweepParameter>,
    pub runs: Vec<SeedRun>,
    pub points: Vec<SweepPoint>,
    pub wall_time_secs: f64,
    /// Output of the first seed at the first sweep point, when it succeeded.
    #[serde(skip)]
    pub predictions: Option<Predictions>,
}

impl ExperimentReport {
    /// The report with every timing field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.wall_time_secs = 0.0;
        for r in &mut out.runs {
            r.wall_time_secs = 0.0;
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn has_numeric_failure(&self) -> bool {
        self.runs.iter().any(|r| r.failure.as_ref().is_some_and(|f| f.numeric))
    }

    /// Rebuilds `points` from `runs`.
    pub fn recompute_points(&self) -> Vec<SweepPoint> {
        let mut values: Vec<Option<f64>> = Vec::new();
        for r in &self.runs {
            if !values.contains(&r.sweep_value) {
                values.push(r.sweep_value);
            }
        }
        values
            .into_iter()
            .map(|v| {
                let runs: Vec<SeedRun> = self.runs.iter().filter(|r| r.sweep_value == v).cloned().collect();
                SweepPoint::summarize(v, &runs)
            })
            .collect()
    }
}

struct RunOutput {
    predictions: Predictions,
    error_rate: Option<f64>,
    imbalance: Imbalance,
    solver_iterations: usize,
    outer_iterations: usize,
    converged: bool,
    final_residual: f64,
    group_conflicts: usize,
}

const AMBIGUITY_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const DOMINANT_STREAM: u64 = 0xc2b2_ae3d_27d4_eb4f;

/// Builds the synthetic dataset for one seed.
pub fn synthesize_dataset(
    hull: &ConvexHullSpec,
    ambiguity: &AmbiguityParams,
    dominant: Option<&DominantLabel>,
    seed: u64,
) -> Result<AmbiguousDataset> {
    let hull = ConvexHullSpec { seed, ..hull.clone() };
    let data = gen_convex_hull_data(&hull)?;
    let amb = AmbiguityParams {
        seed: seed ^ AMBIGUITY_STREAM,
        ..ambiguity.clone()
    };
    let c = hull.num_classes;
    let mut candidates = synthesize_ambiguity(&data.ground_truth, c, &amb)?;
    if let Some(d) = dominant {
        candidates = add_dominant_label(&candidates, c, d.class - 1, d.rate, seed ^ DOMINANT_STREAM)?;
    }
    data.dataset(candidates)
}

fn solve_dataset(
    config: &ExperimentConfig,
    dataset: &AmbiguousDataset,
    groups: Option<&GroupStructure>,
) -> Result<RunOutput> {
    let c = dataset.num_classes();
    let n = dataset.num_instances();
    let imbalance = imbalance_factor(dataset.candidates(), c);
    let weights = |p: &SoftLabelMatrix| {
        if config.force_identity_weights {
            WeightMatrix::identity(n)
        } else {
            weight_matrix(p)
        }
    };
    let (labels, scores, solver_iterations, outer_iterations, converged, final_residual, conflicts) =
        match config.method {
            Method::Mcar | Method::Wmcar => {
                let p = init_soft_labels(dataset.candidates(), c)?;
                let w = if config.method == Method::Mcar {
                    WeightMatrix::identity(n)
                } else {
                    weights(&p)
                };
                let r = wmcar_solve(dataset, &p, &w, &config.solver)?;
                let labels = predict_labels(&r.y, dataset.candidates())?;
                (labels, r.y, r.iterations, 0, r.converged, r.final_residual, 0)
            }
            Method::McarIce | Method::WmcarIce => {
                let out = wmcar_ice(dataset, &config.ice_config(config.method))?;
                let labels = out.predictions()?;
                let total: usize = out.trace.iterations.iter().map(|t| t.solver_iterations).sum();
                let all_converged = out.trace.iterations.iter().all(|t| t.converged);
                let outer = out.trace.iterations.len();
                (labels, out.result.y, total, outer, all_converged, out.result.final_residual, 0)
            }
            Method::GroupMcar | Method::GroupWmcar => {
                let groups = groups.ok_or_else(|| Error::Config("group method without groups".into()))?;
                let p = init_group_soft_labels(dataset.candidates(), c)?;
                let w = (config.method == Method::GroupWmcar).then(|| weights(&p));
                let r = group_mcar_solve(dataset, &p, groups, &config.solver, w.as_ref(), &config.group)?;
                let n_conf = r.conflicts.len();
                (
                    r.predictions,
                    r.result.y,
                    r.result.iterations,
                    0,
                    r.result.converged,
                    r.result.final_residual,
                    n_conf,
                )
            }
        };
    let error_rate = match dataset.ground_truth() {
        Some(truth) => Some(labeling_error_rate(&labels, truth)?),
        None => None,
    };
    Ok(RunOutput {
        predictions: Predictions { labels, scores },
        error_rate,
        imbalance,
        solver_iterations,
        outer_iterations,
        converged,
        final_residual,
        group_conflicts: conflicts,
    })
}

fn run_seed(config: &ExperimentConfig, loaded: Option<&LoadedData>, seed: u64) -> Result<RunOutput> {
    match (&config.data, loaded) {
        (DataSource::Synthetic { hull, ambiguity, dominant }, _) => {
            let ds = synthesize_dataset(hull, ambiguity, dominant.as_ref(), seed)?;
            solve_dataset(config, &ds, None)
        }
        (DataSource::Files { .. }, Some(l)) => solve_dataset(config, &l.dataset, l.groups.as_ref()),
        (DataSource::Files { .. }, None) => Err(Error::Config("dataset was not loaded".into())),
    }
}

fn record(value: Option<f64>, seed: u64, outcome: &Result<RunOutput>, secs: f64) -> SeedRun {
    match outcome {
        Ok(o) => SeedRun {
            sweep_value: value,
            seed,
            error_rate: o.error_rate,
            imbalance: Some(o.imbalance),
            solver_iterations: o.solver_iterations,
            outer_iterations: o.outer_iterations,
            converged: o.converged,
            final_residual: Some(o.final_residual),
            group_conflicts: o.group_conflicts,
            wall_time_secs: secs,
            failure: None,
        },
        Err(e) => SeedRun {
            sweep_value: value,
            seed,
            error_rate: None,
            imbalance: None,
            solver_iterations: 0,
            outer_iterations: 0,
            converged: false,
            final_residual: None,
            group_conflicts: 0,
            wall_time_secs: secs,
            failure: Some(Failure {
                message: e.to_string(),
                numeric: e.is_numeric(),
            }),
        },
    }
}

/// Runs every (sweep point, seed) pair. Seeds run in parallel; rows come
/// back in sweep-major, seed-minor order regardless of scheduling. Per-seed
/// failures are recorded in the report rather than returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let points: Vec<(Option<f64>, ExperimentConfig)> = match &config.sweep {
        None => vec![(None, config.clone())],
        Some(s) => s
            .values
            .iter()
            .map(|&v| Ok((Some(v), s.parameter.apply(config, v)?)))
            .collect::<Result<_>>()?,
    };

    // file data does not depend on the seed or the sweep value
    let loaded = match &config.data {
        DataSource::Files { paths, load } => Some(load_dataset(paths, load)?),
        DataSource::Synthetic { .. } => None,
    };

    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|k| config.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let results: Vec<(SeedRun, Option<Predictions>)> = jobs
        .par_iter()
        .enumerate()
        .map(|(idx, &(k, seed))| {
            let (value, cfg) = &points[k];
            let t0 = Instant::now();
            let outcome = run_seed(cfg, loaded.as_ref(), seed);
            let row = record(*value, seed, &outcome, t0.elapsed().as_secs_f64());
            if let Err(e) = &outcome {
                log::warn!("seed {seed}: {e}");
            }
            let preds = if idx == 0 { outcome.ok().map(|o| o.predictions) } else { None };
            (row, preds)
        })
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut predictions = None;
    for (row, p) in results {
        runs.push(row);
        if p.is_some() {
            predictions = p;
        }
    }
    let mut report = ExperimentReport {
        method: config.method,
        parameter: config.sweep.as_ref().map(|s| s.parameter),
        runs,
        points: Vec::new(),
        wall_time_secs: 0.0,
        predictions,
    };
    report.points = report.recompute_points();
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Writes `report.json`, `curve.csv` and, when available, `predictions.csv`
/// into `dir`. Returns the paths written.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let json = dir.join("report.json");
    write_json(&json, report)?;

    let curve = dir.join("curve.csv");
    let io = |source| Error::Io {
        path: curve.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&curve).map_err(|e| Error::Io {
        path: curve.clone(),
        source: e.into(),
    })?;
    let param = report.parameter.map_or("value", SweepParameter::name);
    w.write_record([param, "mean_error", "std_error", "runs", "failures"])
        .map_err(|e| io(e.into()))?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for p in &report.points {
        w.write_record([
            opt(p.value),
            opt(p.mean_error),
            opt(p.std_error),
            p.runs.to_string(),
            p.failures.to_string(),
        ])
        .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)?;

    let mut written = vec![json, curve];
    if let Some(p) = &report.predictions {
        let path = dir.join("predictions.csv");
        write_predictions(&path, &p.labels, &p.scores)?;
        written.push(path);
    }
    Ok(written)
}
