//! Scores against the known branches of the synthetic datasets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::synth::DatasetKind;

/// How predicted components are paired with ground-truth branches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// One permutation for the whole grid.
    Global,
    /// A fresh permutation at every grid point, for branches that cross.
    PerPoint,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Per-branch RMSE of component means (`grid × 3`, one column per
/// component) after pairing components with the three branches.
pub fn branch_rmse(means: &DMatrix<f64>, grid: &DVector<f64>, kind: DatasetKind, matching: Matching) -> [f64; 3] {
    assert_eq!(means.ncols(), 3, "branch matching expects three components");
    assert_eq!(means.nrows(), grid.len());
    let perms = permutations(3);
    let cost = |i: usize, p: &[usize], b: usize| (means[(i, p[b])] - kind.branch(b, grid[i])).powi(2);
    let mut sq = [0.0; 3];
    match matching {
        Matching::Global => {
            let best = perms
                .iter()
                .min_by(|a, b| {
                    let ca: f64 = (0..grid.len()).map(|i| (0..3).map(|k| cost(i, a, k)).sum::<f64>()).sum();
                    let cb: f64 = (0..grid.len()).map(|i| (0..3).map(|k| cost(i, b, k)).sum::<f64>()).sum();
                    ca.total_cmp(&cb)
                })
                .expect("six permutations");
            for i in 0..grid.len() {
                for b in 0..3 {
                    sq[b] += cost(i, best, b);
                }
            }
        }
        Matching::PerPoint => {
            for i in 0..grid.len() {
                let best = perms
                    .iter()
                    .min_by(|a, c| {
                        let ca: f64 = (0..3).map(|k| cost(i, a, k)).sum();
                        let cc: f64 = (0..3).map(|k| cost(i, c, k)).sum();
                        ca.total_cmp(&cc)
                    })
                    .expect("six permutations");
                for b in 0..3 {
                    sq[b] += cost(i, best, b);
                }
            }
        }
    }
    sq.map(|s| (s / grid.len() as f64).sqrt())
}

/// RMSE of a single prediction curve against `f`.
pub fn curve_rmse(pred: &[f64], grid: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let s: f64 = pred.iter().zip(grid).map(|(p, &x)| (p - f(x)).powi(2)).sum();
    (s / grid.len() as f64).sqrt()
}

/// For each true branch, the share of its points whose highest
/// responsibility goes to that branch's majority component; averaged.
pub fn responsibility_purity(resp: &DMatrix<f64>, branch: &[usize]) -> f64 {
    let k = resp.ncols();
    let mut counts = vec![vec![0usize; k]; 3];
    for (i, &b) in branch.iter().enumerate() {
        counts[b][resp.row(i).transpose().argmax().0] += 1;
    }
    let mut acc = 0.0;
    let mut used = 0;
    for c in &counts {
        let total: usize = c.iter().sum();
        if total > 0 {
            acc += *c.iter().max().expect("nonempty") as f64 / total as f64;
            used += 1;
        }
    }
    acc / used as f64
}

/// Distance from `(x, y)` to the nearest of the three branch curves,
/// by dense search along `x ∈ [-1, 1]`.
pub fn distance_to_branches(kind: DatasetKind, x: f64, y: f64) -> f64 {
    let steps = 4000;
    let mut best = f64::INFINITY;
    for s in 0..=steps {
        let u = -1.0 + 2.0 * s as f64 / steps as f64;
        for f in kind.branches(u) {
            best = best.min(((u - x).powi(2) + (f - y).powi(2)).sqrt());
        }
    }
    best
}
