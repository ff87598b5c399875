use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mcar::harness::io::{read_truth, write_candidates, write_features, write_json, write_truth};
use mcar::harness::{
    emit_report, run_experiment, synthesize_dataset, DataSource, DatasetPaths, ExperimentConfig,
    ExperimentReport, LoadOptions, Method, Sweep, SweepParameter,
};
use mcar::synth::{AmbiguityParams, ConvexHullSpec};
use mcar::{labeling_error_rate, Error};

#[derive(Parser)]
#[command(name = "mcar", version, about = "Resolve ambiguous labels by low-rank matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one dataset.
    Solve(SolveArgs),
    /// Run a JSON experiment config over seeds and an optional parameter grid.
    Sweep(SweepArgs),
    /// Write a synthetic dataset to files.
    Synth(SynthArgs),
    /// Score a predictions file against ground truth.
    Eval(EvalArgs),
}

#[derive(Args)]
struct MethodArgs {
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Feature-noise weight (default 1/sqrt(max(c+m, N))).
    #[arg(long)]
    lambda: Option<f64>,
    /// Label-noise weight (default twice the default lambda).
    #[arg(long)]
    gamma: Option<f64>,
    /// ICE elimination factor.
    #[arg(long)]
    fe: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl MethodArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if self.lambda.is_some() {
            cfg.solver.lambda = self.lambda;
        }
        if self.gamma.is_some() {
            cfg.solver.gamma = self.gamma;
        }
        if let Some(v) = self.fe {
            cfg.elimination_factor = v;
        }
        if let Some(v) = self.max_outer {
            cfg.max_outer = v;
        }
        if let Some(v) = self.tol {
            cfg.solver.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.solver.max_iter = v;
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// CSV, one row per instance.
    #[arg(long)]
    features: PathBuf,
    /// One line of 1-based candidate classes per instance.
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Number of classes (inferred from the files when omitted).
    #[arg(long)]
    classes: Option<usize>,
    /// Rescale features to [0, 1] by their global min and max.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Override the sweep as `parameter=v1,v2,...`.
    #[arg(long, value_parser = parse_sweep)]
    grid: Option<Sweep>,
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Hull vertices per class.
    #[arg(long, default_value_t = 4)]
    vertices: usize,
    #[arg(long, default_value_t = 20)]
    per_class: usize,
    #[arg(long, default_value_t = 40)]
    dim: usize,
    #[arg(long, default_value_t = 0.9)]
    fraction: f64,
    #[arg(long, default_value_t = 2)]
    extra: usize,
    /// Distractor probability (default 1/(classes-1)).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let (name, values) = s.split_once('=').ok_or("expected parameter=v1,v2,...")?;
    let parameter: SweepParameter = name.trim().parse().map_err(|e: Error| e.to_string())?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep { parameter, values })
}

fn summarize(report: &ExperimentReport) {
    for p in &report.points {
        let value = p.value.map(|v| format!("{}={v} ", report.parameter.map_or("value", |q| q.name())));
        match (p.mean_error, p.std_error) {
            (Some(m), Some(s)) => println!(
                "{}{}: error {:.4} ± {:.4} over {} runs ({} failed)",
                value.unwrap_or_default(),
                report.method,
                m,
                s,
                p.runs,
                p.failures
            ),
            _ => println!(
                "{}{}: {} runs ({} failed), no ground truth",
                value.unwrap_or_default(),
                report.method,
                p.runs,
                p.failures
            ),
        }
    }
}

fn finish(report: &ExperimentReport, out: Option<&Path>) -> Result<ExitCode, Error> {
    summarize(report);
    if let Some(dir) = out {
        for path in emit_report(report, dir)? {
            log::info!("wrote {}", path.display());
        }
    }
    for r in report.runs.iter().filter_map(|r| r.failure.as_ref()) {
        eprintln!("error: {}", r.message);
    }
    Ok(if report.has_numeric_failure() {
        ExitCode::from(2)
    } else if report.runs.iter().any(|r| r.failure.is_some()) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let data = DataSource::Files {
        paths: DatasetPaths {
            features: args.features,
            candidates: args.candidates,
            groups: args.groups,
            truth: args.truth,
        },
        load: LoadOptions {
            num_classes: args.classes,
            normalize: args.normalize,
        },
    };
    let mut cfg = ExperimentConfig::new(Method::Mcar, data);
    args.method.apply(&mut cfg);
    let report = run_experiment(&cfg)?;
    finish(&report, args.out.as_deref())
}

fn sweep(args: SweepArgs) -> Result<ExitCode, Error> {
    let mut cfg: ExperimentConfig = mcar::harness::io::read_json(&args.config)?;
    args.method.apply(&mut cfg);
    if let Some(seeds) = args.seeds {
        cfg.seeds = seeds;
    }
    if args.grid.is_some() {
        cfg.sweep = args.grid;
    }
    if let DataSource::Files { paths, load } = &mut cfg.data {
        if args.groups.is_some() {
            paths.groups = args.groups;
        }
        load.normalize |= args.normalize;
    }
    let out = args.out.or_else(|| cfg.output_dir.clone());
    let report = run_experiment(&cfg)?;
    finish(&report, out.as_deref())
}

fn synth(args: SynthArgs) -> Result<ExitCode, Error> {
    let mut hull = ConvexHullSpec::uniform(args.classes, args.vertices, args.per_class, args.dim, args.seed);
    hull.noise_level = args.noise;
    let amb = AmbiguityParams {
        fraction: args.fraction,
        extra_count: args.extra,
        epsilon: args.epsilon.unwrap_or(1.0 / (args.classes.max(2) - 1) as f64),
        seed: 0,
    };
    let ds = synthesize_dataset(&hull, &amb, None, args.seed)?;
    let out = &args.out;
    write_features(&out.join("features.csv"), ds.features())?;
    write_candidates(&out.join("candidates.txt"), ds.candidates())?;
    if let Some(t) = ds.ground_truth() {
        write_truth(&out.join("truth.txt"), t)?;
    }
    write_json(&out.join("synth.json"), &(hull, amb))?;
    println!("wrote {} instances to {}", ds.num_instances(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let pred = read_truth(&args.predictions)?;
    let truth = read_truth(&args.truth)?;
    let err = labeling_error_rate(&pred, &truth)?;
    println!("error {err:.6} ({} instances)", pred.len());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
