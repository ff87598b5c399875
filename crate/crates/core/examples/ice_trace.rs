//! Iterative candidate elimination: each outer round solves, then drops the
//! least likely candidate from half of the still-ambiguous instances.

use mcar::ice::{mcar_ice, wmcar_ice, IceConfig};
use mcar::synth::{gen_convex_hull_data, synthesize_ambiguity, AmbiguityParams, ConvexHullSpec};

fn main() -> mcar::Result<()> {
    let c = 6;
    let mut spec = ConvexHullSpec::uniform(c, 2, 20, 30, 21);
    spec.noise_level = 0.03;
    let data = gen_convex_hull_data(&spec)?;
    let amb = AmbiguityParams {
        fraction: 0.9,
        extra_count: 3,
        epsilon: 0.4,
        seed: 22,
    };
    let dataset = data.dataset(synthesize_ambiguity(&data.ground_truth, c, &amb)?)?;
    let config = IceConfig::default();

    for (name, out) in [("mcar-ice", mcar_ice(&dataset, &config)?), ("wmcar-ice", wmcar_ice(&dataset, &config)?)] {
        println!("{name}: {} candidates initially", total(&out.trace.initial_sizes));
        for it in &out.trace.iterations {
            println!(
                "  round {}: {} ambiguous, removed {}, {} left, error {:.3} ({} solver iterations)",
                it.outer,
                it.active,
                it.eliminated.len(),
                total(&it.candidate_sizes),
                it.error_rate.unwrap_or(f64::NAN),
                it.solver_iterations
            );
        }
    }
    Ok(())
}

fn total(sizes: &[usize]) -> usize {
    sizes.iter().sum()
}
