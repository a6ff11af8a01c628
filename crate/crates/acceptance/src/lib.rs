//! Helpers shared by the acceptance target: result reporting, finite
//! differences and random test objects.

use std::time::{Duration, Instant};

use gmje::gaussian::JointGaussian;
use gmje::mixture::JointMixture;
use gmje::rng::{standard_normal, GjeRng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One printed line of the acceptance report.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Outcome {
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!(
            "{verdict} [{}] {} ({:.2}s of {:.0}s): {}",
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64(),
            self.detail
        )
    }
}

/// A list of named sub-checks that all have to hold.
#[derive(Clone, Debug, Default)]
pub struct Clauses(Vec<(String, bool)>);

impl Clauses {
    pub fn check(&mut self, pass: bool, text: impl Into<String>) -> &mut Self {
        self.0.push((text.into(), pass));
        self
    }

    pub fn pass(&self) -> bool {
        self.0.iter().all(|(_, p)| *p)
    }

    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|(t, p)| format!("{}{t}", if *p { "" } else { "NOT " }))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Runs `body` and folds its clauses and runtime into an [`Outcome`]. The
/// runtime budget is a clause of its own.
pub fn run(id: &str, title: &str, budget_secs: u64, body: impl FnOnce() -> Clauses) -> Outcome {
    let start = Instant::now();
    let clauses = body();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    Outcome {
        id: id.into(),
        title: title.into(),
        pass: clauses.pass() && elapsed <= budget,
        detail: clauses.render(),
        elapsed,
        budget,
    }
}

/// Central difference of `f` along every coordinate, step `h`.
pub fn central_differences(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let dn = f(&p);
            p[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a − b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

/// `A Aᵀ / d + 0.3 I` with standard normal `A`.
pub fn random_spd(rng: &mut GjeRng, d: usize) -> DMatrix<f64> {
    let a = standard_normal(rng, d, d);
    let mut s = &a * a.transpose() / d as f64;
    for i in 0..d {
        s[(i, i)] += 0.3;
    }
    (&s + s.transpose()) * 0.5
}

pub fn random_joint(rng: &mut GjeRng, d_c: usize, d_t: usize) -> JointGaussian {
    let d = d_c + d_t;
    let mean = DVector::from_iterator(d, standard_normal(rng, d, 1).iter().copied());
    JointGaussian::from_full(&mean, &random_spd(rng, d), d_c).expect("SPD by construction")
}

pub fn random_mixture(rng: &mut GjeRng, k: usize, d_c: usize, d_t: usize) -> JointMixture {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = DVector::from_iterator(k, raw.iter().map(|w| w / total));
    let comps = (0..k).map(|_| random_joint(rng, d_c, d_t)).collect();
    JointMixture::new(weights, comps).expect("valid mixture")
}

/// Rows scaled to unit norm.
pub fn unit_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut r in m.row_iter_mut() {
        let n = r.norm();
        r /= n;
    }
    m
}
