//! Synthetic class-structured data and controlled label ambiguity.
//!
//! Each class is the convex hull of a few random vertices in `R^m`; samples
//! are Dirichlet(1) mixtures of their class's vertices. Without noise the
//! stacked matrix `[P⁰; X⁰] = [T; D]·Q` has rank at most `Σ n_k`.

use nalgebra::{DMatrix, SVD};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{AmbiguousDataset, CandidateSet, ClassIndex, SoftLabelMatrix};

const MAX_VERTEX_ATTEMPTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexHullSpec {
    pub num_classes: usize,
    pub vertices_per_class: Vec<usize>,
    pub ambient_dim: usize,
    pub samples_per_class: Vec<usize>,
    /// Minimum distance between class centroids.
    pub vertex_separation: f64,
    /// Std of dense Gaussian noise added to every feature.
    #[serde(default)]
    pub noise_level: f64,
    /// Fraction of feature entries hit by sparse corruption.
    #[serde(default)]
    pub sparse_fraction: f64,
    #[serde(default)]
    pub sparse_magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ConvexHullSpec {
    /// `c` classes with `n_k` vertices and `per_class` samples each, noiseless.
    pub fn uniform(c: usize, n_k: usize, per_class: usize, m: usize, seed: u64) -> Self {
        ConvexHullSpec {
            num_classes: c,
            vertices_per_class: vec![n_k; c],
            ambient_dim: m,
            samples_per_class: vec![per_class; c],
            vertex_separation: 0.5,
            noise_level: 0.0,
            sparse_fraction: 0.0,
            sparse_magnitude: 0.0,
            seed,
        }
    }

    pub fn total_vertices(&self) -> usize {
        self.vertices_per_class.iter().sum()
    }

    pub fn total_samples(&self) -> usize {
        self.samples_per_class.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes;
        if c == 0 || self.ambient_dim == 0 {
            return Err(Error::invalid("need at least one class and one feature"));
        }
        if self.vertices_per_class.len() != c || self.samples_per_class.len() != c {
            return Err(Error::invalid(format!(
                "per-class lists must have {c} entries"
            )));
        }
        if self.vertices_per_class.contains(&0) {
            return Err(Error::invalid("every class needs at least one vertex"));
        }
        if self.total_samples() == 0 {
            return Err(Error::invalid("no samples requested"));
        }
        if !(self.vertex_separation >= 0.0) || !(self.noise_level >= 0.0) {
            return Err(Error::invalid("separation and noise must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.sparse_fraction) || !(self.sparse_magnitude >= 0.0) {
            return Err(Error::invalid("sparse_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthResult {
    /// Observed features, `m × N`.
    pub x: DMatrix<f64>,
    /// Noiseless features `D·Q`.
    pub x0: DMatrix<f64>,
    pub ground_truth: Vec<ClassIndex>,
    /// Vertex matrix `[D_1 … D_c]`, `m × Σ n_k`.
    pub d: DMatrix<f64>,
    /// Hull coefficients, `Σ n_k × N`.
    pub q: DMatrix<f64>,
    /// Accumulation matrix `[v_1 1ᵀ … v_c 1ᵀ]`, `c × Σ n_k`.
    pub t: DMatrix<f64>,
}

impl SynthResult {
    pub fn num_classes(&self) -> usize {
        self.t.nrows()
    }

    /// One-hot ground-truth labels `P⁰`.
    pub fn p0(&self) -> SoftLabelMatrix {
        one_hot(&self.ground_truth, self.num_classes())
    }

    /// Pairs the noisy features with candidate sets.
    pub fn dataset(&self, candidates: Vec<CandidateSet>) -> Result<AmbiguousDataset> {
        AmbiguousDataset::new(
            self.x.clone(),
            candidates,
            self.num_classes(),
            Some(self.ground_truth.clone()),
        )
    }
}

pub fn one_hot(labels: &[ClassIndex], c: usize) -> SoftLabelMatrix {
    let mut m = DMatrix::zeros(c, labels.len());
    for (j, &l) in labels.iter().enumerate() {
        m[(l, j)] = 1.0;
    }
    SoftLabelMatrix::from_matrix(m)
}

fn centroid_distance_ok(d: &DMatrix<f64>, offsets: &[usize], min_sep: f64) -> bool {
    let centroids: Vec<_> = offsets
        .windows(2)
        .map(|w| d.columns(w[0], w[1] - w[0]).column_mean())
        .collect();
    for a in 0..centroids.len() {
        for b in a + 1..centroids.len() {
            if (&centroids[a] - &centroids[b]).norm() < min_sep {
                return false;
            }
        }
    }
    true
}

pub fn gen_convex_hull_data(spec: &ConvexHullSpec) -> Result<SynthResult> {
    spec.validate()?;
    let c = spec.num_classes;
    let m = spec.ambient_dim;
    let total_v = spec.total_vertices();
    let n = spec.total_samples();
    if total_v > m {
        log::warn!("{total_v} hull vertices in dimension {m}: class hulls may not be separable");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut offsets = vec![0usize];
    for &nk in &spec.vertices_per_class {
        offsets.push(offsets.last().unwrap() + nk);
    }

    let mut d = None;
    for _ in 0..MAX_VERTEX_ATTEMPTS {
        let cand = DMatrix::from_fn(m, total_v, |_, _| rng.random::<f64>());
        if centroid_distance_ok(&cand, &offsets, spec.vertex_separation) {
            d = Some(cand);
            break;
        }
    }
    let d = d.ok_or_else(|| {
        Error::Generation(format!(
            "could not place {c} class centroids {} apart in dimension {m} after {MAX_VERTEX_ATTEMPTS} attempts",
            spec.vertex_separation
        ))
    })?;

    let mut t = DMatrix::zeros(c, total_v);
    for k in 0..c {
        for v in offsets[k]..offsets[k + 1] {
            t[(k, v)] = 1.0;
        }
    }

    let mut q = DMatrix::zeros(total_v, n);
    let mut truth = Vec::with_capacity(n);
    let mut j = 0;
    for (k, &count) in spec.samples_per_class.iter().enumerate() {
        let nk = spec.vertices_per_class[k];
        for _ in 0..count {
            // Dirichlet(1,…,1) via normalized Exp(1) draws
            let raw: Vec<f64> = (0..nk).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            for (v, a) in raw.iter().enumerate() {
                q[(offsets[k] + v, j)] = if nk == 1 { 1.0 } else { a / s };
            }
            truth.push(k);
            j += 1;
        }
    }

    let x0 = &d * &q;
    let mut x = x0.clone();
    if spec.noise_level > 0.0 {
        for v in x.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += spec.noise_level * z;
        }
    }
    let n_sparse = (spec.sparse_fraction * (m * n) as f64).round() as usize;
    if n_sparse > 0 {
        for idx in sample(&mut rng, m * n, n_sparse).into_iter() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            x.as_mut_slice()[idx] += sign * spec.sparse_magnitude;
        }
    }

    Ok(SynthResult {
        x,
        x0,
        ground_truth: truth,
        d,
        q,
        t,
    })
}

/// Controlled ambiguity: a portion of the instances receives extra labels,
/// with a fixed distractor `(l + 1) mod c` chosen first with probability `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityParams {
    /// Portion of instances that receive extra labels.
    pub fraction: f64,
    /// Extra labels per ambiguous instance.
    pub extra_count: usize,
    /// Probability that the designated distractor is among the extras.
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl AmbiguityParams {
    pub fn validate(&self, c: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid(format!("fraction {} outside [0, 1]", self.fraction)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon {} outside (0, 1]", self.epsilon)));
        }
        if self.extra_count + 1 > c {
            return Err(Error::invalid(format!(
                "{} extra labels exceed the {} other classes",
                self.extra_count,
                c.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

/// `⌈portion · n⌉`, tolerant of representation error in `portion · n`.
pub(crate) fn ceil_portion(portion: f64, n: usize) -> usize {
    let raw = portion * n as f64;
    let k = (raw - 1e-9 * raw.abs().max(1.0)).ceil().max(0.0) as usize;
    k.min(n)
}

pub fn distractor(label: ClassIndex, c: usize) -> ClassIndex {
    (label + 1) % c
}

pub fn synthesize_ambiguity(
    truth: &[ClassIndex],
    c: usize,
    params: &AmbiguityParams,
) -> Result<Vec<CandidateSet>> {
    params.validate(c)?;
    if let Some(&bad) = truth.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("truth label {bad} out of range")));
    }
    let n = truth.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out: Vec<CandidateSet> = truth.iter().map(|&l| CandidateSet::singleton(l)).collect();
    if params.extra_count == 0 || n == 0 {
        return Ok(out);
    }
    let k = ceil_portion(params.fraction, n);
    let mut chosen: Vec<usize> = sample(&mut rng, n, k).into_vec();
    chosen.sort_unstable();
    for j in chosen {
        let l = truth[j];
        let d = distractor(l, c);
        let pool: Vec<ClassIndex> = (0..c).filter(|&i| i != l && i != d).collect();
        let mut labels = vec![l];
        let mut need = params.extra_count;
        if rng.random::<f64>() < params.epsilon {
            labels.push(d);
            need -= 1;
        } else if need > pool.len() {
            // every other class is required; the distractor cannot be avoided
            labels.push(d);
            need -= 1;
        }
        labels.extend(sample(&mut rng, pool.len(), need).into_iter().map(|i| pool[i]));
        out[j] = CandidateSet::new(labels)?;
    }
    Ok(out)
}

/// Adds `dominant` to a uniformly random `⌈rate · N⌉` subset of the candidate
/// sets, producing labeling imbalance toward that class.
pub fn add_dominant_label(
    candidates: &[CandidateSet],
    c: usize,
    dominant: ClassIndex,
    rate: f64,
    seed: u64,
) -> Result<Vec<CandidateSet>> {
    if dominant >= c {
        return Err(Error::invalid(format!("dominant class {dominant} out of range")));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("rate {rate} outside [0, 1]")));
    }
    let n = candidates.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = candidates.to_vec();
    for j in sample(&mut rng, n, ceil_portion(rate, n)).into_iter() {
        if !out[j].contains(dominant) {
            out[j] = CandidateSet::new(out[j].iter().chain(std::iter::once(dominant)))?;
        }
    }
    Ok(out)
}

/// Numerical rank of `[P⁰; X⁰]`: singular values above `tol · σ_max`.
pub fn rank_check(p0: &SoftLabelMatrix, x0: &DMatrix<f64>, tol: f64) -> Result<usize> {
    let p = p0.as_matrix();
    if p.ncols() != x0.ncols() {
        return Err(Error::shape(format!(
            "labels have {} columns, features {}",
            p.ncols(),
            x0.ncols()
        )));
    }
    let mut h = DMatrix::zeros(p.nrows() + x0.nrows(), p.ncols());
    h.rows_mut(0, p.nrows()).copy_from(p);
    h.rows_mut(p.nrows(), x0.nrows()).copy_from(x0);
    Ok(numerical_rank(&h, tol))
}

pub fn numerical_rank(h: &DMatrix<f64>, tol: f64) -> usize {
    if h.is_empty() {
        return 0;
    }
    let sv = SVD::new(h.clone(), false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}
