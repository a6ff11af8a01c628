//! One-dimensional ambiguous-alignment toy data.
//!
//! Each pair draws `x_c ~ U(-1, 1)`, picks one of three branch functions
//! uniformly, and sets `x_t = f(x_c) + N(0, σ²)`. Branch labels are kept so
//! that evaluation can score purity and distance-to-branch.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_N: usize = 3000;
pub const DEFAULT_NOISE: f64 = 0.05;
pub const DEFAULT_GRID: usize = 300;
pub const CSV_HEADER: &str = "x_c,x_t,branch_id";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    /// `x² + 0.5`, `−x² − 0.5`, `x³`: three branches that never meet.
    A,
    /// `sin 3x`, `−sin 3x`, `0`: all three cross at the origin.
    B,
}

impl DatasetKind {
    pub fn branch(self, id: usize, x: f64) -> f64 {
        match (self, id) {
            (DatasetKind::A, 0) => x * x + 0.5,
            (DatasetKind::A, 1) => -x * x - 0.5,
            (DatasetKind::A, 2) => x * x * x,
            (DatasetKind::B, 0) => (3.0 * x).sin(),
            (DatasetKind::B, 1) => -(3.0 * x).sin(),
            (DatasetKind::B, 2) => 0.0,
            _ => panic!("branch id {id} out of range"),
        }
    }

    /// All three branch values at `x`.
    pub fn branches(self, x: f64) -> [f64; 3] {
        [self.branch(0, x), self.branch(1, x), self.branch(2, x)]
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(DatasetKind::A),
            "B" | "b" => Ok(DatasetKind::B),
            _ => Err(Error::InvalidArgument(format!("unknown dataset {s:?}, expected A or B"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub x_c: f64,
    pub x_t: f64,
    pub branch_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub pairs: Vec<Pair>,
    pub kind: DatasetKind,
    pub noise_sigma: f64,
    /// Seed recorded by the caller; generation itself only sees the RNG.
    pub seed: Option<u64>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contexts(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(self.len(), 1, self.pairs.iter().map(|p| p.x_c))
    }

    pub fn targets(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(self.len(), 1, self.pairs.iter().map(|p| p.x_t))
    }

    /// `N × 2` rows `[x_c, x_t]`.
    pub fn joint_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), 2, |i, j| if j == 0 { self.pairs[i].x_c } else { self.pairs[i].x_t })
    }

    pub fn branch_ids(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.branch_id).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for p in &self.pairs {
            writeln!(w, "{},{},{}", p.x_c, p.x_t, p.branch_id)?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv).
    pub fn read_csv(text: &str, kind: DatasetKind, noise_sigma: f64) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(Error::InvalidArgument(format!("expected header {CSV_HEADER:?}, got {other:?}"))),
        }
        let mut pairs = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidArgument(format!("malformed CSV row {}: {line:?}", i + 2));
            if f.len() != 3 {
                return Err(bad());
            }
            pairs.push(Pair {
                x_c: f[0].trim().parse().map_err(|_| bad())?,
                x_t: f[1].trim().parse().map_err(|_| bad())?,
                branch_id: f[2].trim().parse().map_err(|_| bad())?,
            });
        }
        Ok(Self { pairs, kind, noise_sigma, seed: None })
    }
}

pub fn gen_dataset<R: Rng + ?Sized>(kind: DatasetKind, n: usize, noise: f64, rng: &mut R) -> SyntheticDataset {
    let pairs = (0..n)
        .map(|_| {
            let x_c = rng.random_range(-1.0..=1.0);
            let branch_id = rng.random_range(0..3);
            let e: f64 = rng.sample(StandardNormal);
            Pair { x_c, x_t: kind.branch(branch_id, x_c) + noise * e, branch_id }
        })
        .collect();
    SyntheticDataset { pairs, kind, noise_sigma: noise, seed: None }
}

pub fn gen_dataset_a<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> SyntheticDataset {
    gen_dataset(DatasetKind::A, n, noise, rng)
}

pub fn gen_dataset_b<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> SyntheticDataset {
    gen_dataset(DatasetKind::B, n, noise, rng)
}

/// `count` evenly spaced points on `[-1, 1]`, endpoints included.
pub fn eval_grid(count: usize) -> Result<DVector<f64>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {count}")));
    }
    let step = 2.0 / (count - 1) as f64;
    Ok(DVector::from_fn(count, |i, _| if i == count - 1 { 1.0 } else { -1.0 + i as f64 * step }))
}
