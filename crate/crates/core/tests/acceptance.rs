//! Acceptance suite. Runs as a plain binary (no libtest harness) so that each
//! criterion prints exactly one PASS/FAIL/SKIP line; exits non-zero if any
//! criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;

use mcar::group::{
    group_mcar_solve, init_group_soft_labels, mask_and_normalize, scale_nonnull, scale_unique, GroupOptions,
    GroupStructure,
};
use mcar::harness::{load_dataset, DatasetPaths, LoadOptions};
use mcar::ice::{mcar_ice, wmcar_ice, IceConfig};
use mcar::synth::{
    add_dominant_label, gen_convex_hull_data, rank_check, synthesize_ambiguity, AmbiguityParams, ConvexHullSpec,
};
use mcar::{
    init_soft_labels, labeling_error_rate, mcar_solve, predict_labels, shrink, svt, weight_matrix, wmcar_solve,
    AmbiguousDataset, CandidateSet, SolveResult, SolverConfig, WeightMatrix,
};

/// Convergence records from every solve run by criteria 2–7.
#[derive(Default)]
struct Hygiene {
    solves: usize,
    converged: usize,
    bad: Vec<String>,
}

impl Hygiene {
    fn record(&mut self, tag: &str, converged: bool, residual: f64, iterations: usize) {
        self.solves += 1;
        if iterations > 500 || !residual.is_finite() {
            self.bad.push(format!("{tag}: {iterations} iterations, residual {residual:e}"));
        }
        if converged {
            self.converged += 1;
            if residual >= 1e-6 {
                self.bad.push(format!("{tag}: converged with residual {residual:e}"));
            }
        }
    }

    fn solve(&mut self, tag: &str, r: &SolveResult) {
        self.record(tag, r.converged, r.final_residual, r.iterations);
    }
}

struct Outcome {
    status: Status,
    detail: String,
}

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn separated(c: usize, n_k: usize, per_class: usize, m: usize, seed: u64) -> ConvexHullSpec {
    ConvexHullSpec::uniform(c, n_k, per_class, m, seed)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut g = common::rng(1);
    let mut failures = Vec::new();
    for inst in 0..50u64 {
        let c = g.random_range(2..=5usize);
        let n_k: Vec<usize> = (0..c).map(|_| g.random_range(1..=4usize)).collect();
        let per: Vec<usize> = (0..c).map(|k| 60 / c + usize::from(k < 60 % c)).collect();
        let spec = ConvexHullSpec {
            num_classes: c,
            vertices_per_class: n_k.clone(),
            ambient_dim: 30,
            samples_per_class: per,
            vertex_separation: 0.5,
            noise_level: 0.0,
            sparse_fraction: 0.0,
            sparse_magnitude: 0.0,
            seed: 1000 + inst,
        };
        let data = gen_convex_hull_data(&spec).unwrap();
        let bound: usize = n_k.iter().sum();
        let r = rank_check(&data.p0(), &data.x0, 1e-8).unwrap();
        let mut h = DMatrix::zeros(c + 30, 60);
        h.rows_mut(0, c).copy_from(data.p0().as_matrix());
        h.rows_mut(c, 30).copy_from(&data.x0);
        let oracle = common::rank(&h, 1e-8);
        if r > bound || oracle > bound {
            failures.push(format!("instance {inst}: rank {r} (oracle {oracle}) > {bound}"));
        }
    }
    let el = t.elapsed();
    verdict(
        failures.is_empty() && within(el, 10),
        format!("{} of 50 within the bound Σn_k ({:.2}s) {}", 50 - failures.len(), el.as_secs_f64(), failures.join("; ")),
    )
}

fn criterion_2(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let c = 5;
    let mut errs = Vec::new();
    for seed in 0..20u64 {
        let data = gen_convex_hull_data(&separated(c, 4, 20, 40, seed)).unwrap();
        let amb = AmbiguityParams {
            fraction: 0.9,
            extra_count: 2,
            epsilon: 1.0 / (c - 1) as f64,
            seed: seed + 500,
        };
        let ds = data.dataset(synthesize_ambiguity(&data.ground_truth, c, &amb).unwrap()).unwrap();
        let p = init_soft_labels(ds.candidates(), c).unwrap();
        let r = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        h.solve("c2", &r);
        let pred = predict_labels(&r.y, ds.candidates()).unwrap();
        errs.push(labeling_error_rate(&pred, &data.ground_truth).unwrap());
    }
    let el = t.elapsed();
    let m = mean(&errs);
    verdict(
        m <= 0.02 && within(el, 60),
        format!("MCar mean labeling error {:.4} over 20 seeds, limit 0.02 ({:.2}s)", m, el.as_secs_f64()),
    )
}

fn criterion_3(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let mut hits = 0;
    let mut heavy_hits = 0;
    let mut notes = Vec::new();
    for inst in 0..10u64 {
        let mut spec = separated(3, 1, 2, 5, 300 + inst);
        spec.vertex_separation = 0.8;
        let data = gen_convex_hull_data(&spec).unwrap();
        let amb = AmbiguityParams {
            fraction: 1.0,
            extra_count: 1,
            epsilon: 0.5,
            seed: 700 + inst,
        };
        let cands = synthesize_ambiguity(&data.ground_truth, 3, &amb).unwrap();
        let ds = data.dataset(cands.clone()).unwrap();
        let p = init_soft_labels(&cands, 3).unwrap();
        let r = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        h.solve("c3", &r);
        let pred = predict_labels(&r.y, &cands).unwrap();
        let (best, argmin) = common::min_rank_labelings(&cands, &data.x, 3);
        if argmin.contains(&pred) {
            hits += 1;
        } else {
            notes.push(format!("instance {inst}: {pred:?} not of rank {best}"));
        }
        // diagnostic only: the same instance with heavier noise penalties
        let heavy = SolverConfig::default().with_lambda(1.0).with_gamma(2.0);
        let r = mcar_solve(&ds, &p, &heavy).unwrap();
        if argmin.contains(&predict_labels(&r.y, &cands).unwrap()) {
            heavy_hits += 1;
        }
    }
    let el = t.elapsed();
    verdict(
        hits >= 9 && within(el, 30),
        format!(
            "{hits}/10 match a rank-minimizing labeling with default parameters, need 9 [with lambda = 1, gamma = 2: {heavy_hits}/10] ({:.2}s) {}",
            el.as_secs_f64(),
            notes.join("; ")
        ),
    )
}

fn criterion_4(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let mut g = common::rng(4);
    let mut worst: f64 = 0.0;
    for inst in 0..10u64 {
        let c = g.random_range(2..=5usize);
        let mut spec = separated(c, g.random_range(1..=3), 12, 25, 400 + inst);
        spec.noise_level = 0.05;
        let data = gen_convex_hull_data(&spec).unwrap();
        let amb = AmbiguityParams {
            fraction: 0.8,
            extra_count: 1,
            epsilon: 1.0,
            seed: inst,
        };
        let ds = data.dataset(synthesize_ambiguity(&data.ground_truth, c, &amb).unwrap()).unwrap();
        let p = init_soft_labels(ds.candidates(), c).unwrap();
        let a = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        let b = wmcar_solve(&ds, &p, &WeightMatrix::identity(ds.num_instances()), &SolverConfig::default()).unwrap();
        h.solve("c4", &a);
        h.solve("c4", &b);
        worst = worst.max((a.y.as_matrix() - b.y.as_matrix()).amax());
    }
    let el = t.elapsed();
    verdict(
        worst <= 1e-8 && within(el, 30),
        format!("max |Y_wmcar(W=I) − Y_mcar| = {worst:e} over 10 instances ({:.2}s)", el.as_secs_f64()),
    )
}

/// Noisy five-class data in which class 1 is added to 80% of candidate sets.
fn imbalanced(seed: u64) -> AmbiguousDataset {
    let c = 5;
    let mut spec = separated(c, 2, 20, 30, 5000 + seed);
    spec.noise_level = 0.1;
    let data = gen_convex_hull_data(&spec).unwrap();
    let amb = AmbiguityParams {
        fraction: 0.5,
        extra_count: 1,
        epsilon: 1.0 / (c - 1) as f64,
        seed: 6000 + seed,
    };
    let base = synthesize_ambiguity(&data.ground_truth, c, &amb).unwrap();
    let cands = add_dominant_label(&base, c, 0, 0.8, 7000 + seed).unwrap();
    data.dataset(cands).unwrap()
}

fn criterion_5(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let (mut e_m, mut e_w, mut e_wi) = (Vec::new(), Vec::new(), Vec::new());
    for seed in 0..20u64 {
        let ds = imbalanced(seed);
        let truth = ds.ground_truth().unwrap().to_vec();
        let p = init_soft_labels(ds.candidates(), 5).unwrap();
        let m = mcar_solve(&ds, &p, &SolverConfig::default()).unwrap();
        h.solve("c5 mcar", &m);
        let w = wmcar_solve(&ds, &p, &weight_matrix(&p), &SolverConfig::default()).unwrap();
        h.solve("c5 wmcar", &w);
        let ice = wmcar_ice(&ds, &IceConfig::default()).unwrap();
        for it in &ice.trace.iterations {
            h.record("c5 ice", it.converged, it.final_residual, it.solver_iterations);
        }
        let err = |y, c: &[CandidateSet]| labeling_error_rate(&predict_labels(y, c).unwrap(), &truth).unwrap();
        e_m.push(err(&m.y, ds.candidates()));
        e_w.push(err(&w.y, ds.candidates()));
        e_wi.push(ice.trace.iterations.last().and_then(|i| i.error_rate).unwrap_or(err(&ice.result.y, &ice.candidates)));
    }
    let el = t.elapsed();
    let (mm, mw, mwi) = (mean(&e_m), mean(&e_w), mean(&e_wi));
    let ice_wins = e_wi.iter().zip(&e_w).filter(|(a, b)| a <= b).count();
    verdict(
        mw <= mm && ice_wins >= 14 && within(el, 300),
        format!(
            "mean error MCar {mm:.4}, WMCar {mw:.4}, WMCar-ICE {mwi:.4}; WMCar-ICE ≤ WMCar in {ice_wins}/20 seeds, need 14 ({:.2}s)",
            el.as_secs_f64()
        ),
    )
}

fn criterion_6(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let mut problems = Vec::new();
    let mut outer_counts = Vec::new();
    for run in 0..20u64 {
        let c = 4 + (run % 3) as usize;
        let mut spec = separated(c, 2, 10, 20, 800 + run);
        spec.noise_level = 0.05;
        let data = gen_convex_hull_data(&spec).unwrap();
        let amb = AmbiguityParams {
            fraction: 0.9,
            extra_count: c - 2,
            epsilon: 1.0 / (c - 1) as f64,
            seed: 900 + run,
        };
        let ds = data.dataset(synthesize_ambiguity(&data.ground_truth, c, &amb).unwrap()).unwrap();
        let cfg = IceConfig {
            elimination_factor: 0.5,
            ..Default::default()
        };
        let out = if run % 2 == 0 { wmcar_ice(&ds, &cfg) } else { mcar_ice(&ds, &cfg) }.unwrap();
        let mut prev = out.trace.initial_sizes.clone();
        outer_counts.push(out.trace.iterations.len());
        if out.trace.iterations.len() > 5 {
            problems.push(format!("run {run}: {} outer iterations", out.trace.iterations.len()));
        }
        for it in &out.trace.iterations {
            h.record("c6", it.converged, it.final_residual, it.solver_iterations);
            let active = prev.iter().filter(|&&s| s > 1).count();
            let expected = active.div_ceil(2);
            let removed: usize = prev.iter().sum::<usize>() - it.candidate_sizes.iter().sum::<usize>();
            if it.active != active || it.eliminated.len() != expected || removed != expected {
                problems.push(format!("run {run} outer {}: removed {removed}, expected {expected}", it.outer));
            }
            if prev.iter().zip(&it.candidate_sizes).any(|(a, b)| b > a) {
                problems.push(format!("run {run} outer {}: a candidate set grew", it.outer));
            }
            prev = it.candidate_sizes.clone();
        }
    }
    let el = t.elapsed();
    verdict(
        problems.is_empty() && within(el, 60),
        format!(
            "20 runs, outer iterations {:?}, {} violations ({:.2}s) {}",
            outer_counts,
            problems.len(),
            el.as_secs_f64(),
            problems.join("; ")
        ),
    )
}

/// Classes A = 0, B = 1, null = 2. Singleton anchor groups from the hull
/// generator, plus one two-instance group with candidates {A, null} each:
/// one instance sits inside the A hull, the other is 60% A and 40% null.
fn contested(seed: u64) -> (AmbiguousDataset, GroupStructure, usize, usize) {
    let mut spec = separated(3, 2, 6, 12, 2000 + seed);
    spec.noise_level = 0.01;
    let data = gen_convex_hull_data(&spec).unwrap();
    let n = data.ground_truth.len();
    let truth0 = &data.ground_truth;
    let of = |k: usize| -> Vec<usize> { (0..n).filter(|&j| truth0[j] == k).collect() };
    let (a_idx, null_idx) = (of(0), of(2));
    let (strong, weak_a, weak_n) = (a_idx[0], *a_idx.last().unwrap(), null_idx[0]);
    let mut x = data.x.clone().insert_columns(n, 2, 0.0);
    let s = x.column(strong).into_owned();
    x.set_column(n, &s);
    let w = x.column(weak_a) * 0.6 + x.column(weak_n) * 0.4;
    x.set_column(n + 1, &w);
    let mut cands: Vec<CandidateSet> = data.ground_truth.iter().map(|&l| CandidateSet::singleton(l)).collect();
    let pair = CandidateSet::new([0, 2]).unwrap();
    cands.extend([pair.clone(), pair]);
    let mut truth = data.ground_truth.clone();
    truth.extend([0, 2]);
    let ds = AmbiguousDataset::new(x, cands, 3, Some(truth)).unwrap();
    let groups = GroupStructure::from_partial(vec![vec![n, n + 1]], n + 2).unwrap();
    (ds, groups, n, n + 1)
}

fn substeps_hit_targets() -> Result<usize, String> {
    let mut g = common::rng(77);
    let mut checked = 0;
    for trial in 0..200 {
        let c = g.random_range(2..=5usize);
        let n = g.random_range(1..=8usize);
        let y0 = DMatrix::from_fn(c, n, |_, _| g.random_range(-0.5..1.5));
        let cands: Vec<CandidateSet> = (0..n)
            .map(|_| {
                let anchor = g.random_range(0..c);
                let mut labels: std::collections::BTreeSet<usize> = (0..c).filter(|_| g.random_bool(0.5)).collect();
                labels.insert(anchor);
                CandidateSet::new(labels).unwrap()
            })
            .collect();
        let owner: Vec<usize> = (0..n).map(|_| g.random_range(0..3)).collect();
        let parts: Vec<Vec<usize>> = (0..3)
            .map(|k| (0..n).filter(|&j| owner[j] == k).collect::<Vec<_>>())
            .filter(|p| !p.is_empty())
            .collect();
        let groups = GroupStructure::new(parts, n).unwrap();
        let null = c - 1;

        let mut y = y0.clone();
        mask_and_normalize(&mut y, &cands);
        for j in 0..n {
            let col = y.column(j);
            let masked = (0..null).all(|i| cands[j].contains(i) || col[i] == 0.0);
            if (col.sum() - 1.0).abs() > 1e-12 || col.iter().any(|&v| v < 0.0) || !masked {
                return Err(format!("trial {trial}: step 1 left column {j} off the masked simplex"));
            }
        }

        let mass = |y: &DMatrix<f64>, grp: &[usize]| -> f64 { grp.iter().map(|&j| y.column(j).rows(0, null).sum()).sum() };
        let before: Vec<f64> = groups.groups().iter().map(|grp| mass(&y, grp)).collect();
        let degenerate = scale_nonnull(&mut y, &cands, &groups);
        for (k, grp) in groups.groups().iter().enumerate() {
            let all_null = grp.iter().all(|&j| cands[j].as_slice() == [null]);
            if !all_null && !degenerate.contains(&k) && mass(&y, grp) < before[k].max(1.0) - 1e-12 {
                return Err(format!("trial {trial}: step 2 left group {k} below unit non-null mass"));
            }
        }

        let mut y3 = y0.clone();
        mask_and_normalize(&mut y3, &cands);
        scale_unique(&mut y3, &groups);
        for grp in groups.groups() {
            for i in 0..null {
                if grp.iter().map(|&j| y3[(i, j)]).sum::<f64>() > 1.0 + 1e-12 {
                    return Err(format!("trial {trial}: step 3 left class {i} above 1"));
                }
            }
        }
        checked += 1;
    }
    Ok(checked)
}

fn criterion_7(h: &mut Hygiene) -> Outcome {
    let t = Instant::now();
    let mut unique = 0;
    let mut exact = 0;
    let mut premise = 0;
    for seed in 0..20u64 {
        let (ds, groups, i1, i2) = contested(seed);
        let p0 = init_soft_labels(ds.candidates(), 3).unwrap();
        let free = mcar_solve(&ds, &p0, &SolverConfig::default()).unwrap();
        h.solve("c7 free", &free);
        let fp = predict_labels(&free.y, ds.candidates()).unwrap();
        if fp[i1] == 0 && fp[i2] == 0 {
            premise += 1;
        }
        let p = init_group_soft_labels(ds.candidates(), 3).unwrap();
        let r = group_mcar_solve(&ds, &p, &groups, &SolverConfig::default(), None, &GroupOptions::default()).unwrap();
        h.solve("c7 group", &r.result);
        let pair = (r.predictions[i1], r.predictions[i2]);
        if (pair.0 == 0) != (pair.1 == 0) {
            unique += 1;
        }
        if pair == (0, 2) {
            exact += 1;
        }
    }
    let substeps = substeps_hit_targets();
    let el = t.elapsed();
    let ok = unique >= 18 && substeps.is_ok() && within(el, 60);
    verdict(
        ok,
        format!(
            "A assigned to exactly one group member in {unique}/20 seeds, need 18 (strong member: {exact}/20; unconstrained solve doubled up in {premise}/20); sub-steps: {} ({:.2}s)",
            match &substeps {
                Ok(n) => format!("{n} random problems on target"),
                Err(e) => e.clone(),
            },
            el.as_secs_f64()
        ),
    )
}

fn criterion_8(h: &Hygiene) -> Outcome {
    let mut g = common::rng(8);
    let mut svt_worst: f64 = 0.0;
    let mut shrink_worst: f64 = 0.0;
    for _ in 0..100 {
        let (r, c) = (g.random_range(1..=12), g.random_range(1..=12));
        let a = common::random_matrix(&mut g, r, c);
        let top = common::singular_values(&a)[0];
        let tau = g.random_range(0.0..=top);
        svt_worst = svt_worst.max((svt(&a, tau).unwrap() - common::svt_oracle(&a, tau)).amax());
        let s = shrink(tau, &a);
        for (x, y) in s.iter().zip(a.iter()) {
            shrink_worst = shrink_worst.max((x - common::shrink_oracle(tau, *y)).abs());
        }
    }
    verdict(
        h.bad.is_empty() && svt_worst <= 1e-8 && shrink_worst <= 1e-8,
        format!(
            "{} solves ({} converged), {} hygiene violations; svt vs oracle {svt_worst:e}, shrink vs oracle {shrink_worst:e} {}",
            h.solves,
            h.converged,
            h.bad.len(),
            h.bad.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let Some(dir) = std::env::var_os("MCAR_LOST_DIR").map(PathBuf::from) else {
        return Outcome {
            status: Status::Skip,
            detail: "MCAR_LOST_DIR not set (expects features.csv, candidates.txt, truth.txt)".into(),
        };
    };
    let paths = DatasetPaths {
        features: dir.join("features.csv"),
        candidates: dir.join("candidates.txt"),
        groups: None,
        truth: Some(dir.join("truth.txt")),
    };
    let loaded = match load_dataset(&paths, &LoadOptions { num_classes: None, normalize: true }) {
        Ok(l) => l,
        Err(e) => return verdict(false, format!("could not load {}: {e}", dir.display())),
    };
    let ds = &loaded.dataset;
    let truth = ds.ground_truth().unwrap().to_vec();
    let c = ds.num_classes();
    let p = init_soft_labels(ds.candidates(), c).unwrap();
    let err = |pred: Vec<usize>| labeling_error_rate(&pred, &truth).unwrap();
    let solver = SolverConfig::default();
    let results = [
        ("MCar", 0.085, mcar_solve(ds, &p, &solver).map(|r| err(predict_labels(&r.y, ds.candidates()).unwrap()))),
        (
            "WMCar",
            0.082,
            wmcar_solve(ds, &p, &weight_matrix(&p), &solver).map(|r| err(predict_labels(&r.y, ds.candidates()).unwrap())),
        ),
        ("MCar-ICE", 0.080, mcar_ice(ds, &IceConfig::default()).map(|o| err(o.predictions().unwrap()))),
        ("WMCar-ICE", 0.052, wmcar_ice(ds, &IceConfig::default()).map(|o| err(o.predictions().unwrap()))),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, target, got) in results {
        match got {
            Ok(e) => {
                ok &= (e - target).abs() <= 0.02;
                parts.push(format!("{name} {:.1}% (table {:.1}%)", e * 100.0, target * 100.0));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{name} failed: {e}"));
            }
        }
    }
    verdict(ok, parts.join(", "))
}

fn main() {
    let mut hygiene = Hygiene::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Hygiene) -> Outcome>)> = vec![
        ("1 rank bound of noiseless hull data", Box::new(|_| criterion_1())),
        ("2 recovery on separable synthetic data", Box::new(criterion_2)),
        ("3 agreement with brute-force rank minimization", Box::new(criterion_3)),
        ("4 identity weights reproduce the unweighted solve", Box::new(criterion_4)),
        ("5 weighting and elimination under label imbalance", Box::new(criterion_5)),
        ("6 candidate elimination mechanics", Box::new(criterion_6)),
        ("7 group uniqueness in the contested scenario", Box::new(criterion_7)),
        ("8 solver hygiene and operator oracles", Box::new(|h: &mut Hygiene| criterion_8(h))),
        ("9 Lost (16,8) labeling errors", Box::new(|_| criterion_9())),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let out = run(&mut hygiene);
        let tag = match out.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed += 1;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        println!("[{tag}] criterion {name}: {}", out.detail.trim_end());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed or skipped");
}
