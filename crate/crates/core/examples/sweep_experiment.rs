//! Seeded sweep over the ambiguous fraction, comparing all four solvers, with
//! reports written to a temporary directory.

use mcar::harness::{emit_report, run_experiment, ExperimentConfig, Method, Sweep, SweepParameter};
use mcar::synth::{AmbiguityParams, ConvexHullSpec};

fn main() -> mcar::Result<()> {
    let mut hull = ConvexHullSpec::uniform(5, 2, 15, 25, 0);
    hull.noise_level = 0.02;
    let amb = AmbiguityParams {
        fraction: 0.5,
        extra_count: 2,
        epsilon: 0.5,
        seed: 0,
    };
    let out = std::env::temp_dir().join("mcar-sweep-example");

    for method in [Method::Mcar, Method::Wmcar, Method::McarIce, Method::WmcarIce] {
        let mut cfg = ExperimentConfig::synthetic(method, hull.clone(), amb.clone());
        cfg.seeds = (0..5).collect();
        cfg.sweep = Some(Sweep {
            parameter: SweepParameter::Fraction,
            values: vec![0.2, 0.5, 0.8, 1.0],
        });
        let report = run_experiment(&cfg)?;
        let line: Vec<String> = report
            .points
            .iter()
            .map(|p| match (p.value, p.mean_error) {
                (Some(v), Some(e)) => format!("{v}:{e:.3}±{:.3}", p.std_error.unwrap_or(0.0)),
                _ => "failed".into(),
            })
            .collect();
        println!("{:>10}  {}", method.name(), line.join("  "));
        emit_report(&report, &out.join(method.name()))?;
    }
    println!("reports in {}", out.display());
    Ok(())
}
