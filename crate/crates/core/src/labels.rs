//! Ambiguously labeled data and the soft-label matrices built from it.
//!
//! Soft-label matrices are `c × N` with one column per instance. A column is
//! supported on the instance's candidate set and, in its unscaled form, sums
//! to one. Class indices are 0-based everywhere inside the crate.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassIndex = usize;

/// Floor applied to `Σ_i p_ij N̂_i` before inversion in [`weight_matrix`].
pub const WEIGHT_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Sorted, duplicate-free, non-empty set of candidate classes for one instance.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassIndex>", into = "Vec<ClassIndex>")]
pub struct CandidateSet(Vec<ClassIndex>);

impl CandidateSet {
    pub fn new(labels: impl IntoIterator<Item = ClassIndex>) -> Result<Self> {
        let mut v: Vec<ClassIndex> = labels.into_iter().collect();
        if v.is_empty() {
            return Err(Error::invalid("empty candidate set"));
        }
        v.sort_unstable();
        if v.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate label in candidate set {v:?}")));
        }
        Ok(CandidateSet(v))
    }

    pub fn singleton(label: ClassIndex) -> Self {
        CandidateSet(vec![label])
    }

    /// Every class `0..c`.
    pub fn full(c: usize) -> Self {
        assert!(c > 0, "full candidate set needs at least one class");
        CandidateSet((0..c).collect())
    }

    pub fn contains(&self, label: ClassIndex) -> bool {
        self.0.binary_search(&label).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.0.len() == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = ClassIndex> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[ClassIndex] {
        &self.0
    }

    pub fn max_label(&self) -> ClassIndex {
        *self.0.last().expect("candidate set is non-empty")
    }

    /// Removes `label`. Refuses to empty the set; returns whether anything changed.
    pub fn remove(&mut self, label: ClassIndex) -> bool {
        if self.0.len() <= 1 {
            return false;
        }
        match self.0.binary_search(&label) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }
}

impl TryFrom<Vec<ClassIndex>> for CandidateSet {
    type Error = Error;

    fn try_from(v: Vec<ClassIndex>) -> Result<Self> {
        CandidateSet::new(v)
    }
}

impl From<CandidateSet> for Vec<ClassIndex> {
    fn from(s: CandidateSet) -> Self {
        s.0
    }
}

impl fmt::Display for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

fn check_candidates(candidates: &[CandidateSet], c: usize) -> Result<()> {
    if c == 0 {
        return Err(Error::invalid("number of classes must be positive"));
    }
    for (j, set) in candidates.iter().enumerate() {
        if set.is_empty() {
            return Err(Error::invalid(format!("instance {j}: empty candidate set")));
        }
        if set.max_label() >= c {
            return Err(Error::invalid(format!(
                "instance {j}: label {} out of range for {c} classes",
                set.max_label()
            )));
        }
    }
    Ok(())
}

/// Feature matrix (`m × N`, one column per instance) plus candidate sets.
#[derive(Clone, Debug)]
pub struct AmbiguousDataset {
    features: DMatrix<f64>,
    candidates: Vec<CandidateSet>,
    num_classes: usize,
    ground_truth: Option<Vec<ClassIndex>>,
}

impl AmbiguousDataset {
    /// Strict constructor: ground truth, when given, must lie in each candidate set.
    pub fn new(
        features: DMatrix<f64>,
        candidates: Vec<CandidateSet>,
        num_classes: usize,
        ground_truth: Option<Vec<ClassIndex>>,
    ) -> Result<Self> {
        let (ds, violations) = Self::new_lenient(features, candidates, num_classes, ground_truth)?;
        if let Some(&j) = violations.first() {
            return Err(Error::invalid(format!(
                "instance {j}: ground truth not in candidate set ({} violations)",
                violations.len()
            )));
        }
        Ok(ds)
    }

    /// Like [`AmbiguousDataset::new`], but instances whose ground truth falls
    /// outside their candidate set are returned instead of rejected.
    pub fn new_lenient(
        features: DMatrix<f64>,
        candidates: Vec<CandidateSet>,
        num_classes: usize,
        ground_truth: Option<Vec<ClassIndex>>,
    ) -> Result<(Self, Vec<usize>)> {
        if features.ncols() != candidates.len() {
            return Err(Error::shape(format!(
                "{} feature columns but {} candidate sets",
                features.ncols(),
                candidates.len()
            )));
        }
        if candidates.is_empty() {
            return Err(Error::invalid("dataset has no instances"));
        }
        if let Some((k, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (i, j) = (k % features.nrows(), k / features.nrows());
            return Err(Error::invalid(format!("non-finite feature at ({i}, {j})")));
        }
        check_candidates(&candidates, num_classes)?;
        let mut violations = Vec::new();
        if let Some(truth) = &ground_truth {
            if truth.len() != candidates.len() {
                return Err(Error::shape(format!(
                    "{} ground-truth labels for {} instances",
                    truth.len(),
                    candidates.len()
                )));
            }
            for (j, (&t, set)) in truth.iter().zip(&candidates).enumerate() {
                if t >= num_classes {
                    return Err(Error::invalid(format!(
                        "instance {j}: ground truth {t} out of range"
                    )));
                }
                if !set.contains(t) {
                    violations.push(j);
                }
            }
        }
        Ok((
            AmbiguousDataset {
                features,
                candidates,
                num_classes,
                ground_truth,
            },
            violations,
        ))
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn candidates(&self) -> &[CandidateSet] {
        &self.candidates
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn ground_truth(&self) -> Option<&[ClassIndex]> {
        self.ground_truth.as_deref()
    }

    pub fn num_instances(&self) -> usize {
        self.candidates.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.nrows()
    }

    /// Same features and truth with replaced candidate sets.
    pub fn with_candidates(&self, candidates: Vec<CandidateSet>) -> Result<Self> {
        Self::new_lenient(
            self.features.clone(),
            candidates,
            self.num_classes,
            self.ground_truth.clone(),
        )
        .map(|(ds, _)| ds)
    }
}

/// A `c × N` soft-label matrix (P, Y, or the column-scaled Ȳ).
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabelMatrix(DMatrix<f64>);

impl SoftLabelMatrix {
    /// Wraps a matrix without validation. Use [`SoftLabelMatrix::validate`] to check it.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        SoftLabelMatrix(m)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_instances(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, class: ClassIndex, instance: usize) -> f64 {
        self.0[(class, instance)]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let c = self.0.nrows();
        &self.0.as_slice()[j * c..(j + 1) * c]
    }

    /// Checks non-negativity, column sums of one within `tol`, and support on
    /// the candidate sets. `free_class` is exempt from the support check
    /// (the null class in group mode).
    pub fn validate(
        &self,
        candidates: &[CandidateSet],
        free_class: Option<ClassIndex>,
        tol: f64,
    ) -> Result<()> {
        if candidates.len() != self.num_instances() {
            return Err(Error::shape("candidate count does not match columns"));
        }
        for (j, set) in candidates.iter().enumerate() {
            let col = self.column(j);
            let mut sum = 0.0;
            for (i, &v) in col.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(Error::invalid(format!("entry ({i},{j}) = {v} is negative")));
                }
                if v != 0.0 && !set.contains(i) && Some(i) != free_class {
                    return Err(Error::invalid(format!(
                        "entry ({i},{j}) = {v} outside candidate set {set}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::invalid(format!("column {j} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Diagonal instance weights `w_jj = √η_j`, applied as column scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix(DVector<f64>);

impl WeightMatrix {
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if let Some((j, w)) = diag.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(format!("weight {j} = {w} is not positive and finite")));
        }
        Ok(WeightMatrix(diag))
    }

    pub fn identity(n: usize) -> Self {
        WeightMatrix(DVector::from_element(n, 1.0))
    }

    pub fn uniform(n: usize, scale: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, scale))
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&w| w == 1.0)
    }

    /// `M · W`.
    pub fn scale_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col *= self.0[j];
        }
        out
    }

    /// `M · W⁻¹`.
    pub fn unscale_columns(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col /= self.0[j];
        }
        out
    }
}

/// Uniform soft labels over each candidate set.
pub fn init_soft_labels(candidates: &[CandidateSet], c: usize) -> Result<SoftLabelMatrix> {
    check_candidates(candidates, c)?;
    let mut p = DMatrix::zeros(c, candidates.len());
    for (j, set) in candidates.iter().enumerate() {
        let v = 1.0 / set.len() as f64;
        for i in set.iter() {
            p[(i, j)] = v;
        }
    }
    Ok(SoftLabelMatrix(p))
}

/// Per-column argmax restricted to the candidate set; ties go to the lowest class.
pub fn predict_labels(y: &SoftLabelMatrix, candidates: &[CandidateSet]) -> Result<Vec<ClassIndex>> {
    if candidates.len() != y.num_instances() {
        return Err(Error::shape(format!(
            "{} candidate sets for {} columns",
            candidates.len(),
            y.num_instances()
        )));
    }
    candidates
        .iter()
        .enumerate()
        .map(|(j, set)| {
            if set.max_label() >= y.num_classes() {
                return Err(Error::shape(format!("instance {j}: label beyond matrix rows")));
            }
            let col = y.column(j);
            let mut best = set.as_slice()[0];
            for i in set.iter().skip(1) {
                // strict comparison keeps the lowest index on ties
                if col[i] > col[best] {
                    best = i;
                }
            }
            Ok(best)
        })
        .collect()
}

/// `N̂_i = Σ_j p_ij`, the soft count of each class.
pub fn estimated_class_counts(p: &SoftLabelMatrix) -> DVector<f64> {
    let m = p.as_matrix();
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.iter().sum::<f64>()))
}

/// `w_jj = 1/√(Σ_i p_ij N̂_i)`.
pub fn weight_matrix(p: &SoftLabelMatrix) -> WeightMatrix {
    let counts = estimated_class_counts(p);
    let m = p.as_matrix();
    let diag = DVector::from_iterator(
        m.ncols(),
        m.column_iter().map(|col| {
            let eff = col.dot(&counts).max(WEIGHT_DENOMINATOR_FLOOR);
            1.0 / eff.sqrt()
        }),
    );
    WeightMatrix(diag)
}

/// Masks, clamps and ℓ1-normalizes `col` in place so it sums to `target`.
///
/// Entries with `allowed(i) == false` are zeroed. When no positive mass
/// survives, `target` is spread uniformly over the allowed entries.
pub(crate) fn project_slice(col: &mut [f64], allowed: impl Fn(usize) -> bool, target: f64) {
    let mut sum = 0.0;
    let mut n_allowed = 0usize;
    for (i, v) in col.iter_mut().enumerate() {
        if allowed(i) {
            n_allowed += 1;
            if *v > 0.0 {
                sum += *v;
            } else {
                *v = 0.0;
            }
        } else {
            *v = 0.0;
        }
    }
    debug_assert!(n_allowed > 0);
    if n_allowed == 1 {
        for (i, v) in col.iter_mut().enumerate() {
            *v = if allowed(i) { target } else { 0.0 };
        }
        return;
    }
    if sum > 0.0 && sum.is_finite() {
        let s = target / sum;
        col.iter_mut().for_each(|v| *v *= s);
    } else {
        let u = target / n_allowed as f64;
        for (i, v) in col.iter_mut().enumerate() {
            *v = if allowed(i) { u } else { 0.0 };
        }
    }
}

/// Projects `v` onto the candidate-supported non-negative vectors summing to
/// `target_sum`: mask, clamp negatives, then rescale.
pub fn project_column_to_candidate_simplex(
    v: &[f64],
    mask: &CandidateSet,
    target_sum: f64,
) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Err(Error::invalid("empty candidate mask"));
    }
    if mask.max_label() >= v.len() {
        return Err(Error::shape("candidate mask exceeds vector length"));
    }
    if !(target_sum > 0.0 && target_sum.is_finite()) {
        return Err(Error::invalid(format!("target sum {target_sum} must be positive")));
    }
    let mut out = v.to_vec();
    project_slice(&mut out, |i| mask.contains(i), target_sum);
    Ok(out)
}

/// Fraction of positions where `pred` and `truth` disagree.
pub fn labeling_error_rate(pred: &[ClassIndex], truth: &[ClassIndex]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no labels to score"));
    }
    let wrong = pred.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / pred.len() as f64)
}

/// Max-to-min ratio of per-class occurrence counts in the candidate sets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imbalance {
    Ratio(f64),
    /// Some class never occurs in any candidate set.
    Unbounded,
}

impl Imbalance {
    pub fn value(self) -> f64 {
        match self {
            Imbalance::Ratio(r) => r,
            Imbalance::Unbounded => f64::INFINITY,
        }
    }
}

impl fmt::Display for Imbalance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Imbalance::Ratio(r) => write!(f, "{r:.4}"),
            Imbalance::Unbounded => write!(f, "inf"),
        }
    }
}

pub fn label_occurrences(candidates: &[CandidateSet], c: usize) -> Vec<usize> {
    let mut counts = vec![0usize; c];
    for i in candidates.iter().flat_map(|s| s.iter()) {
        if i < c {
            counts[i] += 1;
        }
    }
    counts
}

pub fn imbalance_factor(candidates: &[CandidateSet], c: usize) -> Imbalance {
    imbalance_from_counts(&label_occurrences(candidates, c))
}

pub fn imbalance_from_counts(counts: &[usize]) -> Imbalance {
    let min = counts.iter().copied().min().unwrap_or(0);
    let max = counts.iter().copied().max().unwrap_or(0);
    if min == 0 {
        Imbalance::Unbounded
    } else {
        Imbalance::Ratio(max as f64 / min as f64)
    }
}
