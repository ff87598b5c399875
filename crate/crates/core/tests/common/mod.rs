//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mcar::synth::one_hot;
use mcar::CandidateSet;

/// One-sided Jacobi SVD. Returns `(U, σ, V)` with `A = U·diag(σ)·Vᵀ`,
/// thin, unsorted.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).iter().copied().collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for cols in [&mut u, &mut v] {
                    for k in 0..cols[p].len() {
                        let (xp, xq) = (cols[p][k], cols[q][k]);
                        cols[p][k] = c * xp - s * xq;
                        cols[q][k] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = u.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let umat = DMatrix::from_fn(m, n, |i, j| if sigma[j] > 0.0 { u[j][i] / sigma[j] } else { 0.0 });
    let vmat = DMatrix::from_fn(n, n, |i, j| v[j][i]);
    (umat, sigma, vmat)
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s = jacobi_svd(a).1;
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

pub fn svt_oracle(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for k in 0..s.len() {
        let d = s[k] - tau;
        if d > 0.0 {
            out += u.column(k) * v.column(k).transpose() * d;
        }
    }
    out
}

pub fn shrink_oracle(a: f64, b: f64) -> f64 {
    if b > a {
        b - a
    } else if b < -a {
        b + a
    } else {
        0.0
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All hard labelings consistent with the candidate sets.
pub fn consistent_labelings(candidates: &[CandidateSet]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for set in candidates {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                set.iter().map(move |l| {
                    let mut p = prefix.clone();
                    p.push(l);
                    p
                })
            })
            .collect();
    }
    out
}

/// Labelings minimizing `rank([one_hot(labels); X])`, with that rank.
pub fn min_rank_labelings(candidates: &[CandidateSet], x: &DMatrix<f64>, c: usize) -> (usize, Vec<Vec<usize>>) {
    let mut best = usize::MAX;
    let mut argmin = Vec::new();
    for labels in consistent_labelings(candidates) {
        let p = one_hot(&labels, c).into_matrix();
        let mut h = DMatrix::zeros(c + x.nrows(), x.ncols());
        h.rows_mut(0, c).copy_from(&p);
        h.rows_mut(c, x.nrows()).copy_from(x);
        let r = rank(&h, 1e-8);
        if r < best {
            best = r;
            argmin.clear();
        }
        if r == best {
            argmin.push(labels);
        }
    }
    (best, argmin)
}
