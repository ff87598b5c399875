//! Generates convex-hull data and shows that stacking the true one-hot labels
//! on the features does not raise the rank, while wrong labels do.

use mcar::synth::{gen_convex_hull_data, one_hot, rank_check, ConvexHullSpec};

fn main() -> mcar::Result<()> {
    let spec = ConvexHullSpec::uniform(4, 3, 25, 30, 7);
    let data = gen_convex_hull_data(&spec)?;
    let c = spec.num_classes;

    let x_rank = mcar::synth::numerical_rank(&data.x0, 1e-9);
    let truth = rank_check(&data.p0(), &data.x0, 1e-9)?;
    println!("vertices: {}", spec.total_vertices());
    println!("rank X0 = {x_rank}, rank [P0; X0] = {truth}");

    // relabel a handful of samples and watch the rank go up
    for flips in [1, 3, 10] {
        let mut labels = data.ground_truth.clone();
        for l in labels.iter_mut().take(flips) {
            *l = (*l + 1) % c;
        }
        let r = rank_check(&one_hot(&labels, c), &data.x0, 1e-9)?;
        println!("{flips:>2} wrong labels: rank {r} (+{})", r - truth);
    }
    Ok(())
}
