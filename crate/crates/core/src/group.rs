//! Group constraints with a null class.
//!
//! Instances are partitioned into groups (e.g. faces in one photo). The last
//! class `c − 1` is the null class: it is never masked out, every group whose
//! candidates are not all `{null}` must carry at least one unit of non-null
//! mass, and each non-null class may be used at most once per group. The
//! constraints are imposed by a sequence of scalings, each followed by column
//! renormalization.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{project_slice, AmbiguousDataset, CandidateSet, ClassIndex, SoftLabelMatrix, WeightMatrix};
use crate::solver::{solve_with_projection, LabelProjection, SolveResult, SolverConfig};

/// A partition of the instances into groups. The null class is `c − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    num_instances: usize,
}

impl GroupStructure {
    /// Requires the groups to be non-empty, disjoint, and to cover `0..n`.
    pub fn new(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let g = Self::from_partial(groups, n)?;
        let covered: usize = g.groups.iter().map(Vec::len).sum();
        debug_assert_eq!(covered, n);
        Ok(g)
    }

    /// Validates the listed groups and appends a singleton group for every
    /// instance not mentioned.
    pub fn from_partial(groups: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut owner = vec![None; n];
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::invalid(format!("group {k} is empty")));
            }
            for &j in g {
                if j >= n {
                    return Err(Error::invalid(format!("group {k}: instance {j} out of range")));
                }
                if let Some(prev) = owner[j] {
                    return Err(Error::invalid(format!(
                        "instance {j} appears in groups {prev} and {k}"
                    )));
                }
                owner[j] = Some(k);
            }
        }
        let mut groups = groups;
        groups.extend((0..n).filter(|&j| owner[j].is_none()).map(|j| vec![j]));
        Ok(GroupStructure {
            groups,
            num_instances: n,
        })
    }

    pub fn singletons(n: usize) -> Self {
        GroupStructure {
            groups: (0..n).map(|j| vec![j]).collect(),
            num_instances: n,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_instances(&self) -> usize {
        self.num_instances
    }
}

pub fn null_class(c: usize) -> ClassIndex {
    c - 1
}

fn allowed(set: &CandidateSet, null: ClassIndex, i: usize) -> bool {
    i == null || set.contains(i)
}

fn all_null(group: &[usize], candidates: &[CandidateSet], null: ClassIndex) -> bool {
    group
        .iter()
        .all(|&j| candidates[j].is_singleton() && candidates[j].contains(null))
}

/// Uniform soft labels over `L_j ∪ {null}`.
pub fn init_group_soft_labels(candidates: &[CandidateSet], c: usize) -> Result<SoftLabelMatrix> {
    if c < 2 {
        return Err(Error::invalid("group mode needs a null class plus at least one class"));
    }
    let null = null_class(c);
    let mut p = DMatrix::zeros(c, candidates.len());
    for (j, set) in candidates.iter().enumerate() {
        if set.max_label() >= c {
            return Err(Error::invalid(format!("instance {j}: label out of range")));
        }
        let mut col = vec![1.0; c];
        project_slice(&mut col, |i| allowed(set, null, i), 1.0);
        p.column_mut(j).copy_from_slice(&col);
    }
    Ok(SoftLabelMatrix::from_matrix(p))
}

/// ℓ1-normalizes every column over `L_j ∪ {null}`.
pub fn normalize_columns(y: &mut DMatrix<f64>, candidates: &[CandidateSet]) {
    let c = y.nrows();
    let null = null_class(c);
    for (j, col) in y.as_mut_slice().chunks_exact_mut(c).enumerate() {
        project_slice(col, |i| allowed(&candidates[j], null, i), 1.0);
    }
}

/// Step 1: clamp negatives, mask non-null rows outside `L_j`, normalize.
pub fn mask_and_normalize(y: &mut DMatrix<f64>, candidates: &[CandidateSet]) {
    normalize_columns(y, candidates);
}

/// Step 2 scaling (no renormalization): in every group whose candidates are
/// not all `{null}`, divide the non-null entries by `min(s, 1)` where `s` is
/// the group's total non-null mass. Groups with `s = 0` cannot be repaired by
/// scaling; they are left unchanged and returned.
pub fn scale_nonnull(y: &mut DMatrix<f64>, candidates: &[CandidateSet], groups: &GroupStructure) -> Vec<usize> {
    let c = y.nrows();
    let null = null_class(c);
    let mut degenerate = Vec::new();
    for (k, g) in groups.groups().iter().enumerate() {
        if all_null(g, candidates, null) {
            continue;
        }
        let s: f64 = g.iter().map(|&j| y.column(j).rows(0, null).sum()).sum();
        if s <= 0.0 {
            degenerate.push(k);
            continue;
        }
        let d = s.min(1.0);
        for &j in g {
            for i in 0..null {
                y[(i, j)] /= d;
            }
        }
    }
    degenerate
}

/// Step 3 scaling (no renormalization): for every group and non-null class,
/// divide by `max(Σ_{g∈G} y_ig, 1)`.
pub fn scale_unique(y: &mut DMatrix<f64>, groups: &GroupStructure) {
    let null = null_class(y.nrows());
    for g in groups.groups() {
        for i in 0..null {
            let s: f64 = g.iter().map(|&j| y[(i, j)]).sum();
            let d = s.max(1.0);
            if d > 1.0 {
                for &j in g {
                    y[(i, j)] /= d;
                }
            }
        }
    }
}

/// The full three-stage projection on an unscaled `c × N` matrix.
pub fn project_group_constraints(
    y: &DMatrix<f64>,
    candidates: &[CandidateSet],
    groups: &GroupStructure,
) -> DMatrix<f64> {
    let mut out = y.clone();
    project_in_place(&mut out, candidates, groups);
    out
}

fn project_in_place(y: &mut DMatrix<f64>, candidates: &[CandidateSet], groups: &GroupStructure) -> Vec<usize> {
    mask_and_normalize(y, candidates);
    let degenerate = scale_nonnull(y, candidates, groups);
    normalize_columns(y, candidates);
    scale_unique(y, groups);
    normalize_columns(y, candidates);
    degenerate
}

/// Group projection in the scaled domain: unscale by `W`, project, rescale so
/// column `j` sums to `w_jj`.
pub struct GroupProjection<'a> {
    candidates: &'a [CandidateSet],
    groups: &'a GroupStructure,
}

impl<'a> GroupProjection<'a> {
    pub fn new(candidates: &'a [CandidateSet], groups: &'a GroupStructure) -> Self {
        GroupProjection { candidates, groups }
    }
}

impl LabelProjection for GroupProjection<'_> {
    fn project(&self, y_bar: &mut DMatrix<f64>, weights: &WeightMatrix) {
        let identity = weights.is_identity();
        if !identity {
            *y_bar = weights.unscale_columns(y_bar);
        }
        project_in_place(y_bar, self.candidates, self.groups);
        if !identity {
            *y_bar = weights.scale_columns(y_bar);
        }
    }
}

/// Argmax over `L_j ∪ {null}`, ties to the lowest class.
pub fn predict_group_labels(y: &SoftLabelMatrix, candidates: &[CandidateSet]) -> Result<Vec<ClassIndex>> {
    if candidates.len() != y.num_instances() {
        return Err(Error::shape("candidate count does not match columns"));
    }
    let null = null_class(y.num_classes());
    Ok(candidates
        .iter()
        .enumerate()
        .map(|(j, set)| {
            let col = y.column(j);
            let mut best: Option<usize> = None;
            for i in (0..col.len()).filter(|&i| allowed(set, null, i)) {
                if best.is_none_or(|b| col[i] > col[b]) {
                    best = Some(i);
                }
            }
            best.unwrap_or(null)
        })
        .collect())
}

/// A non-null class predicted for more than one instance of a group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConflict {
    pub group: usize,
    pub class: ClassIndex,
    pub instances: Vec<usize>,
}

pub fn find_conflicts(pred: &[ClassIndex], groups: &GroupStructure, c: usize) -> Vec<GroupConflict> {
    let null = null_class(c);
    let mut out = Vec::new();
    for (k, g) in groups.groups().iter().enumerate() {
        for i in 0..null {
            let hits: Vec<usize> = g.iter().copied().filter(|&j| pred[j] == i).collect();
            if hits.len() > 1 {
                out.push(GroupConflict {
                    group: k,
                    class: i,
                    instances: hits,
                });
            }
        }
    }
    out
}

/// Greedy repair: within each group, (instance, class) pairs are taken in
/// decreasing score order; a non-null class goes to the first instance that
/// claims it and later claimants fall back to their next allowed class, or null.
pub fn repair_conflicts(y: &SoftLabelMatrix, candidates: &[CandidateSet], groups: &GroupStructure) -> Vec<ClassIndex> {
    let c = y.num_classes();
    let null = null_class(c);
    let mut pred = vec![null; y.num_instances()];
    for g in groups.groups() {
        let mut pairs: Vec<(usize, usize, f64)> = g
            .iter()
            .flat_map(|&j| {
                let set = &candidates[j];
                (0..c)
                    .filter(move |&i| allowed(set, null, i))
                    .map(move |i| (j, i, y.get(i, j)))
            })
            .collect();
        pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
        let mut taken = HashSet::new();
        let mut done = HashSet::new();
        for (j, i, _) in pairs {
            if done.contains(&j) || (i != null && taken.contains(&i)) {
                continue;
            }
            pred[j] = i;
            done.insert(j);
            if i != null {
                taken.insert(i);
            }
        }
    }
    pred
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupOptions {
    /// Apply [`repair_conflicts`] to the final hard labels.
    pub repair: bool,
}

#[derive(Clone, Debug)]
pub struct GroupSolveResult {
    pub result: SolveResult,
    pub predictions: Vec<ClassIndex>,
    /// Conflicts in the unrepaired argmax labels.
    pub conflicts: Vec<GroupConflict>,
    /// Groups with no non-null mass at exit that should have some.
    pub degenerate_groups: Vec<usize>,
    /// Largest per-group per-class soft sum over non-null classes at exit.
    pub max_group_class_sum: f64,
    pub repaired: bool,
}

/// Solve with the group projection in place of the plain candidate projection.
pub fn group_mcar_solve(
    dataset: &AmbiguousDataset,
    p: &SoftLabelMatrix,
    groups: &GroupStructure,
    config: &SolverConfig,
    weights: Option<&WeightMatrix>,
    options: &GroupOptions,
) -> Result<GroupSolveResult> {
    let c = dataset.num_classes();
    let n = dataset.num_instances();
    if c < 2 {
        return Err(Error::invalid("group mode needs a null class plus at least one class"));
    }
    if groups.num_instances() != n {
        return Err(Error::shape(format!(
            "groups cover {} instances, dataset has {n}",
            groups.num_instances()
        )));
    }
    let identity;
    let w = match weights {
        Some(w) => w,
        None => {
            identity = WeightMatrix::identity(n);
            &identity
        }
    };
    let projection = GroupProjection::new(dataset.candidates(), groups);
    let result = solve_with_projection(dataset.features(), p, w, config, &projection)?;

    let y = result.y.as_matrix();
    let null = null_class(c);
    let mut degenerate = Vec::new();
    let mut max_sum: f64 = 0.0;
    for (k, g) in groups.groups().iter().enumerate() {
        let nonnull: f64 = g.iter().map(|&j| y.column(j).rows(0, null).sum()).sum();
        if nonnull <= 0.0 && !all_null(g, dataset.candidates(), null) {
            degenerate.push(k);
        }
        for i in 0..null {
            max_sum = max_sum.max(g.iter().map(|&j| y[(i, j)]).sum());
        }
    }
    if !degenerate.is_empty() {
        log::warn!("{} groups have no non-null mass", degenerate.len());
    }

    let argmax = predict_group_labels(&result.y, dataset.candidates())?;
    let conflicts = find_conflicts(&argmax, groups, c);
    if !conflicts.is_empty() {
        log::warn!("{} within-group label conflicts", conflicts.len());
    }
    let predictions = if options.repair {
        repair_conflicts(&result.y, dataset.candidates(), groups)
    } else {
        argmax
    };
    Ok(GroupSolveResult {
        result,
        predictions,
        conflicts,
        degenerate_groups: degenerate,
        max_group_class_sum: max_sum,
        repaired: options.repair,
    })
}
