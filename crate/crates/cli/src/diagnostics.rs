//! Numerical self-checks of the library, reported with their residuals.

use gmje::gaussian::Gaussian;
use gmje::gje::{
    dual_objective, entropy_max_grad, entropy_max_loss, primal_dual_residual, rff_dual_nll, rff_features,
    trace_trap_datafit, BatchEmbeddings, RffProjection,
};
use gmje::mixture::{dam_conditional_nll, JointMixture, MixtureConditioner};
use gmje::neural::mlp::flatten_layers;
use gmje::neural::{gmje_mdn_loss, mlp_backward, EmaCovariance, MarginalMode, Mdn, MdnConfig, Mlp};
use gmje::rng::{seeded, standard_normal, GjeRng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Injection {
    None,
    AsymmetricCov,
}

fn check(name: &str, residual: f64, tolerance: f64, detail: impl Into<String>) -> Check {
    Check { name: name.into(), residual, tolerance, pass: residual <= tolerance, detail: detail.into() }
}

fn failed(name: &str, tolerance: f64, err: impl std::fmt::Display) -> Check {
    Check { name: name.into(), residual: f64::INFINITY, tolerance, pass: false, detail: err.to_string() }
}

fn unit_rows(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut r in m.row_iter_mut() {
        let n = r.norm();
        r /= n;
    }
    m
}

/// Largest `|fd − analytic| / (max(|fd|, |analytic|) + 1e-2)` over all
/// coordinates, with central differences of step `1e-5`.
pub fn fd_residual(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + h;
        let up = f(&p);
        p[i] = x[i] - h;
        let dn = f(&p);
        p[i] = x[i];
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / (fd.abs().max(analytic[i].abs()) + 1e-2));
    }
    worst
}

fn trace_trap(rng: &mut GjeRng) -> Vec<Check> {
    let (mut value_gap, mut grad_max) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let z = standard_normal(rng, 64, 8);
        let eval = |v: &[f64]| {
            let m = DMatrix::from_column_slice(64, 8, v);
            trace_trap_datafit(&BatchEmbeddings::from_joint(&m, 4).expect("shapes")).expect("full rank")
        };
        value_gap = value_gap.max((eval(z.as_slice()) - 4.0).abs());
        let h = 1e-5;
        let mut p = z.as_slice().to_vec();
        for i in 0..p.len() {
            let x0 = p[i];
            p[i] = x0 + h;
            let up = eval(&p);
            p[i] = x0 - h;
            let dn = eval(&p);
            p[i] = x0;
            grad_max = grad_max.max(((up - dn) / (2.0 * h)).abs());
        }
    }
    vec![
        check("trace_trap_value", value_gap, 1e-8, "max |data-fit term - d_t/2|, 20 batches of 64 x 8"),
        check("trace_trap_gradient", grad_max, 1e-5, "max |finite-difference gradient of the data-fit term|"),
    ]
}

fn primal_dual(rng: &mut GjeRng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let z = standard_normal(rng, 64, 8);
        match primal_dual_residual(&BatchEmbeddings::from_joint(&z, 4).expect("shapes"), 1e-6) {
            Ok(r) => worst = worst.max(r),
            Err(e) => return failed("primal_dual", 1e-6, e),
        }
    }
    check("primal_dual", worst, 1e-6, "linear-kernel dual minus primal, 20 batches of 64 x 8")
}

/// Woodbury (fit term) and Weinstein–Aronszajn (log-det term) against
/// dense `N × N` evaluation. A zero target isolates the log-det term.
fn rff_identities(rng: &mut GjeRng) -> Vec<Check> {
    let (mut wood, mut wa) = (0.0f64, 0.0f64);
    let eps = 0.1;
    for (n, dd) in [(64, 16), (256, 32)] {
        let z_c = standard_normal(rng, n, 3);
        let z_t = standard_normal(rng, n, 2);
        let proj = RffProjection::sample(3, dd, 1.0, rng).expect("valid projection");
        let psi = rff_features(&z_c, &proj).expect("shapes");
        let mut k = &psi * psi.transpose();
        for i in 0..n {
            k[(i, i)] += eps;
        }
        let zero = DMatrix::zeros(n, 2);
        let dense_logdet = dual_objective(&k, &zero, 1.0).expect("SPD");
        let dense_total = dual_objective(&k, &z_t, 1.0).expect("SPD");
        let fast_logdet = rff_dual_nll(&psi, &zero, eps).expect("valid") / 1.0;
        let fast_total = rff_dual_nll(&psi, &z_t, eps).expect("valid");
        // rff_dual_nll = ½ fit + (d_t/2) log|K| with d_t = 2, i.e. log|K| once.
        wa = wa.max((fast_logdet - dense_logdet).abs());
        wood = wood.max(((fast_total - fast_logdet) - (dense_total - dense_logdet)).abs());
    }
    vec![
        check("rff_woodbury", wood, 1e-8, "fit term, N=64/D=16 and N=256/D=32"),
        check("rff_weinstein_aronszajn", wa, 1e-8, "log-determinant term, N=64/D=16 and N=256/D=32"),
    ]
}

fn infonce_bridge(rng: &mut GjeRng) -> Check {
    let (m, d, tau) = (16, 8, 0.01);
    let bank = unit_rows(standard_normal(rng, m, d));
    let kde = match JointMixture::kde(&bank, &bank, tau).and_then(|k| MixtureConditioner::new(&k)) {
        Ok(c) => c,
        Err(e) => return failed("infonce_bridge", 1e-6, e),
    };
    let mut gaps = Vec::with_capacity(50);
    for i in 0..50 {
        let zt = bank.row(i % m).transpose();
        let zc = {
            let v = &zt + standard_normal(rng, d, 1).column(0) * 0.05;
            let n = v.norm();
            v / n
        };
        let exact = kde.condition(&zc).and_then(|c| c.log_pdf(&zt));
        let nce = dam_conditional_nll(&zc, &zt, &bank, tau);
        match (exact, nce) {
            (Ok(e), Ok(n)) => gaps.push(n + e),
            (Err(e), _) | (_, Err(e)) => return failed("infonce_bridge", 1e-6, e),
        }
    }
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    check("infonce_bridge", hi - lo, 1e-6, format!("spread of InfoNCE minus exact conditional NLL over 50 pairs, constant {lo}"))
}

fn gradient_checks(rng: &mut GjeRng) -> Vec<Check> {
    let tol = 1e-4;
    let (mut mlp_w, mut mdn_w, mut mdn_in, mut obj_w, mut ent_w) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let mut net = Mlp::new(&[3, 6, 5, 2], false, rng).expect("dims");
        let params: Vec<f64> = (0..net.param_count()).map(|_| rng.random_range(-0.7..0.7)).collect();
        net.unflatten(&params);
        let x = standard_normal(rng, 7, 3);
        let w = standard_normal(rng, 7, 2);
        let (_, cache) = net.forward(&x).expect("dims");
        let grads = flatten_layers(&mlp_backward(&net, &cache, &w));
        let loss = |p: &[f64]| {
            let mut n = net.clone();
            n.unflatten(p);
            n.predict(&x).expect("dims").component_mul(&w).sum()
        };
        mlp_w = mlp_w.max(fd_residual(loss, &params, &grads));

        let mdn = Mdn::new(MdnConfig { hidden: vec![6], ..MdnConfig::new(2, 2, 3) }, rng).expect("config");
        let x = standard_normal(rng, 5, 2);
        let t = standard_normal(rng, 5, 2);
        let g = mdn.nll_gradients(&x, &t).expect("dims");
        let p0 = mdn.flatten();
        let by_params = |p: &[f64]| {
            let mut m = mdn.clone();
            m.unflatten(p);
            m.nll_gradients(&x, &t).expect("dims").loss
        };
        mdn_w = mdn_w.max(fd_residual(by_params, &p0, &g.params));
        let by_input = |v: &[f64]| mdn.nll_gradients(&DMatrix::from_column_slice(5, 2, v), &t).expect("dims").loss;
        mdn_in = mdn_in.max(fd_residual(by_input, x.as_slice(), g.input.as_slice()));

        let ema = EmaCovariance { cov: DMatrix::identity(2, 2) * 1.3, momentum: 0.99 };
        let l = gmje_mdn_loss(&mdn, &x, &t, &ema, MarginalMode::Mahalanobis).expect("dims");
        let obj = |v: &[f64]| {
            gmje_mdn_loss(&mdn, &DMatrix::from_column_slice(5, 2, v), &t, &ema, MarginalMode::Mahalanobis)
                .expect("dims")
                .total
        };
        obj_w = obj_w.max(fd_residual(obj, x.as_slice(), l.contexts.as_slice()));

        let z = standard_normal(rng, 12, 4);
        let grad = entropy_max_grad(&BatchEmbeddings::from_joint(&z, 2).expect("shapes"), 1e-6).expect("SPD");
        let ent = |v: &[f64]| {
            let m = DMatrix::from_column_slice(12, 4, v);
            entropy_max_loss(&BatchEmbeddings::from_joint(&m, 2).expect("shapes"), 1e-6).expect("SPD")
        };
        ent_w = ent_w.max(fd_residual(ent, z.as_slice(), grad.as_slice()));
    }
    vec![
        check("grad_mlp_params", mlp_w, tol, "10 random networks"),
        check("grad_mdn_params", mdn_w, tol, "10 random networks"),
        check("grad_mdn_inputs", mdn_in, tol, "10 random networks"),
        check("grad_mdn_objective_contexts", obj_w, tol, "Mahalanobis marginal plus conditional NLL"),
        check("grad_entropy_max", ent_w, tol, "10 random batches"),
    ]
}

fn asymmetric_cov() -> Check {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.3, 1.0]);
    match Gaussian::new(DVector::zeros(2), cov) {
        Ok(_) => check("asymmetric_covariance", 0.0, 0.0, "accepted an asymmetric covariance"),
        Err(e) => failed("asymmetric_covariance", 0.0, format!("building a Gaussian from the injected covariance: {e}")),
    }
}

pub fn run_diagnostics(seed: u64, inject: Injection) -> Report {
    let mut rng = seeded(seed);
    let mut checks = trace_trap(&mut rng);
    checks.push(primal_dual(&mut rng));
    checks.extend(rff_identities(&mut rng));
    checks.push(infonce_bridge(&mut rng));
    checks.extend(gradient_checks(&mut rng));
    if inject == Injection::AsymmetricCov {
        checks.push(asymmetric_cov());
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Report { checks, all_pass }
}
