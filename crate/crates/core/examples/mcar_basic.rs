//! Disambiguates a synthetic partially labeled set with the unweighted solver.

use mcar::synth::{gen_convex_hull_data, synthesize_ambiguity, AmbiguityParams, ConvexHullSpec};
use mcar::{init_soft_labels, labeling_error_rate, mcar_solve, predict_labels, SolverConfig};

fn main() -> mcar::Result<()> {
    let mut spec = ConvexHullSpec::uniform(5, 3, 40, 50, 1);
    spec.noise_level = 0.02;
    let data = gen_convex_hull_data(&spec)?;

    let amb = AmbiguityParams {
        fraction: 0.8,
        extra_count: 2,
        epsilon: 0.3,
        seed: 2,
    };
    let candidates = synthesize_ambiguity(&data.ground_truth, 5, &amb)?;
    let dataset = data.dataset(candidates)?;

    let p = init_soft_labels(dataset.candidates(), 5)?;
    let naive = predict_labels(&p, dataset.candidates())?;
    let result = mcar_solve(&dataset, &p, &SolverConfig::default())?;
    let pred = predict_labels(&result.y, dataset.candidates())?;

    let truth = dataset.ground_truth().unwrap();
    println!(
        "lambda {:.4}  gamma {:.4}  mu0 {:.3e}",
        result.params.lambda, result.params.gamma, result.params.mu0
    );
    println!(
        "{} iterations, residual {:.2e}, converged {}",
        result.iterations, result.final_residual, result.converged
    );
    println!("first-candidate error: {:.3}", labeling_error_rate(&naive, truth)?);
    println!("solver error:          {:.3}", labeling_error_rate(&pred, truth)?);
    Ok(())
}
