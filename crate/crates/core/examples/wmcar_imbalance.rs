//! One class is added to most candidate sets. Weighting each instance by the
//! estimated size of its likely classes counteracts the pull toward it.

use mcar::synth::{add_dominant_label, gen_convex_hull_data, synthesize_ambiguity, AmbiguityParams, ConvexHullSpec};
use mcar::{
    imbalance_factor, init_soft_labels, labeling_error_rate, mcar_solve, predict_labels, weight_matrix, wmcar_solve,
    AmbiguousDataset, SolverConfig,
};

const C: usize = 5;

fn dataset(seed: u64) -> mcar::Result<AmbiguousDataset> {
    let mut spec = ConvexHullSpec::uniform(C, 2, 20, 30, seed);
    spec.noise_level = 0.1;
    let data = gen_convex_hull_data(&spec)?;
    let amb = AmbiguityParams {
        fraction: 0.5,
        extra_count: 1,
        epsilon: 0.25,
        seed: seed + 1000,
    };
    let base = synthesize_ambiguity(&data.ground_truth, C, &amb)?;
    // class 0 joins 80% of all candidate sets
    data.dataset(add_dominant_label(&base, C, 0, 0.8, seed + 2000)?)
}

fn main() -> mcar::Result<()> {
    let cfg = SolverConfig::default();
    let (mut plain, mut weighted) = (0.0, 0.0);
    let seeds = 10;
    for seed in 0..seeds {
        let ds = dataset(seed)?;
        let truth = ds.ground_truth().unwrap();
        let p = init_soft_labels(ds.candidates(), C)?;
        let w = weight_matrix(&p);
        if seed == 0 {
            println!("imbalance factor {}", imbalance_factor(ds.candidates(), C));
            println!("weights in [{:.4}, {:.4}]", w.diag().min(), w.diag().max());
        }
        let a = predict_labels(&mcar_solve(&ds, &p, &cfg)?.y, ds.candidates())?;
        let b = predict_labels(&wmcar_solve(&ds, &p, &w, &cfg)?.y, ds.candidates())?;
        let (ea, eb) = (labeling_error_rate(&a, truth)?, labeling_error_rate(&b, truth)?);
        println!("seed {seed}: unweighted {ea:.3}  weighted {eb:.3}");
        plain += ea;
        weighted += eb;
    }
    let n = seeds as f64;
    println!("mean: unweighted {:.4}  weighted {:.4}", plain / n, weighted / n);
    Ok(())
}
