use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gmje::eval::{branch_rmse, curve_rmse, Matching};
use gmje::gje::{dual_nll, BatchEmbeddings, KernelSpec};
use gmje::gng::{gng_mixture, stream_average, GngConfig, GngGraph};
use gmje::mixture::{em_fit, EmOptions, MixtureConditioner, SamplingWeights};
use gmje::neural::{jepa_mse_train, mdn_train, AdamConfig, MarginalMode, MdnTrainConfig, TrainConfig};
use gmje::gaussian::{sample as gaussian_sample, Gaussian};
use gmje::rng::{seeded, standard_normal};
use gmje::smc::{smc_simulation, BankConfig, ResamplePolicy, ResampleScheme, StreamConfig};
use gmje::synth::{eval_grid, gen_dataset, DatasetKind, SyntheticDataset, DEFAULT_GRID};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{key, KeySpec, Resolved};
use crate::diagnostics::{run_diagnostics, Injection};
use crate::error::CliError;
use crate::model::{dual_predictor, ModelFile, Variant};

pub const RESOLVED_CONFIG: &str = "config.txt";

pub const GEN_DATA_KEYS: &[KeySpec] = &[
    key("kind", "A", "dataset: A (quadratic/cubic branches) or B (sinusoidal branches)"),
    key("n", "3000", "number of pairs"),
    key("noise", "0.05", "standard deviation of the target noise"),
    key("seed", "111", "random seed"),
    key("out", "out/data", "output directory"),
];

pub const FIT_KEYS: &[KeySpec] = &[
    key("model", "gmje-mdn", "jepa-mse | gje-dual-rbf | gmje-em-1 | gmje-em-3 | gmje-gng | gmje-mdn"),
    key("data", "out/data/dataset.csv", "dataset CSV written by gen-data"),
    key("kind", "auto", "dataset kind for metrics; auto reads the metadata next to the CSV"),
    key("seed", "111", "random seed"),
    key("out", "out/fit", "output directory"),
    key("hidden", "64,64", "hidden layer widths for the neural models"),
    key("epochs", "1200", "full-batch training epochs for the neural models"),
    key("lr", "0.01", "Adam learning rate"),
    key("k", "3", "mixture components for gmje-mdn"),
    key("sigma_floor", "1e-5", "lower bound added to every MDN scale"),
    key("marginal", "mahalanobis", "MDN marginal term: mahalanobis | entropy_max | none"),
    key("ema_momentum", "0.99", "momentum of the context covariance EMA"),
    key("length_scale", "0.5", "RBF length scale for gje-dual-rbf"),
    key("gp_noise", "0.1", "diagonal noise for gje-dual-rbf"),
    key("em_max_iters", "200", "EM iteration cap"),
    key("em_tol", "1e-7", "EM relative log-likelihood tolerance"),
    key("em_var_floor", "1e-6", "EM covariance diagonal floor"),
    key("gng_steps", "30000", "GNG stream length; the dataset is cycled in shuffled passes"),
    key("gng_epsilon_b", "0.2", "GNG winner learning rate"),
    key("gng_epsilon_n", "0.01", "GNG neighbour learning rate"),
    key("gng_lambda", "100", "GNG insertion interval"),
    key("gng_a_max", "50", "GNG maximum edge age"),
    key("gng_alpha", "0.5", "GNG error decay at insertion"),
    key("gng_beta", "0.995", "GNG global error decay"),
    key("gng_k_max", "25", "GNG node cap"),
];

pub const PREDICT_KEYS: &[KeySpec] = &[
    key("model_file", "out/fit/model.json", "model JSON written by fit"),
    key("grid", "300", "number of evenly spaced contexts on [-1, 1]"),
    key("density_bins", "100", "target bins for the conditional density table; 0 disables it"),
    key("y_min", "-2", "lowest target value of the density table"),
    key("y_max", "2", "highest target value of the density table"),
    key("out", "out/predict", "output directory"),
];

pub const SAMPLE_KEYS: &[KeySpec] = &[
    key("model_file", "out/fit/model.json", "model JSON written by fit"),
    key("n", "5000", "number of draws"),
    key("seed", "111", "random seed"),
    key("out", "out/sample", "output directory"),
];

pub const SMC_KEYS: &[KeySpec] = &[
    key("m", "256", "bank capacity"),
    key("tau", "0.1", "temperature"),
    key("classes", "10", "number of clusters in the stream"),
    key("dim", "16", "embedding dimension"),
    key("rare_class", "0", "index of the rare class"),
    key("rare_freq", "0.01", "frequency of the rare class"),
    key("spread", "0.25", "within-class perturbation before normalizing"),
    key("batch", "32", "incoming batch size"),
    key("steps", "50000", "number of bank updates"),
    key("scheme", "systematic", "resampling scheme: systematic | multinomial"),
    key("resample", "every_step", "every_step, or ess_below:<fraction of the pool size>"),
    key("seed", "111", "random seed"),
    key("out", "out/smc", "output directory"),
];

pub const DIAGNOSTICS_KEYS: &[KeySpec] = &[
    key("seed", "111", "random seed"),
    key("inject", "none", "none | asymmetric_cov: feed a deliberately asymmetric covariance"),
    key("out", "", "directory for report.json; empty prints only to stdout"),
];

fn prepare_out(cfg: &Resolved) -> Result<PathBuf, CliError> {
    let out = PathBuf::from(cfg.raw("out"));
    fs::create_dir_all(&out)?;
    fs::write(out.join(RESOLVED_CONFIG), cfg.to_text())?;
    Ok(out)
}

fn parse_kind(s: &str) -> Result<DatasetKind, CliError> {
    s.parse().map_err(|e| CliError::Usage(format!("dataset kind: {e}")))
}

/// Metadata stored next to every generated dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kind: String,
    pub n: usize,
    pub noise: f64,
    pub seed: u64,
    pub columns: Vec<String>,
}

pub fn gen_data(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let kind = parse_kind(cfg.raw("kind"))?;
    let n: usize = cfg.get("n")?;
    let noise: f64 = cfg.get("noise")?;
    let seed: u64 = cfg.get("seed")?;
    if n == 0 || !(noise >= 0.0) {
        return Err(CliError::Usage("n must be positive and noise nonnegative".into()));
    }
    let out = prepare_out(cfg)?;
    let ds = gen_dataset(kind, n, noise, &mut seeded(seed));
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    fs::write(out.join("dataset.csv"), buf)?;
    let meta = DatasetMeta {
        kind: format!("{kind:?}"),
        n,
        noise,
        seed,
        columns: vec!["x_c".into(), "x_t".into(), "branch_id".into()],
    };
    fs::write(out.join("dataset.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(json!({ "rows": n, "kind": meta.kind, "seed": seed, "path": out.join("dataset.csv") }))
}

fn load_dataset(cfg: &Resolved) -> Result<SyntheticDataset, CliError> {
    let path = PathBuf::from(cfg.raw("data"));
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read data {}: {e}", path.display())))?;
    let meta: Option<DatasetMeta> =
        fs::read_to_string(path.with_extension("json")).ok().and_then(|t| serde_json::from_str(&t).ok());
    let kind = match (cfg.raw("kind"), &meta) {
        ("auto", Some(m)) => parse_kind(&m.kind)?,
        ("auto", None) => DatasetKind::A,
        (k, _) => parse_kind(k)?,
    };
    let noise = meta.as_ref().map_or(0.0, |m| m.noise);
    SyntheticDataset::read_csv(&text, kind, noise).map_err(|e| CliError::Usage(format!("dataset {}: {e}", path.display())))
}

fn write_curve(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), CliError> {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn grid_matrix(count: usize) -> Result<(DVector<f64>, DMatrix<f64>), CliError> {
    let g = eval_grid(count)?;
    let m = DMatrix::from_column_slice(count, 1, g.as_slice());
    Ok((g, m))
}

pub fn fit(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let variant: Variant = cfg.get("model")?;
    let seed: u64 = cfg.get("seed")?;
    let ds = load_dataset(cfg)?;
    let out = prepare_out(cfg)?;
    let mut rng = seeded(seed);
    let adam = AdamConfig { lr: cfg.get("lr")?, ..AdamConfig::default() };
    let hidden: Vec<usize> = cfg.list("hidden")?;
    let epochs: usize = cfg.get("epochs")?;
    let (x, y) = (ds.contexts(), ds.targets());
    let (grid, grid_m) = grid_matrix(DEFAULT_GRID)?;
    let kind = ds.kind;
    let cond_mean = move |v: f64| kind.branches(v).iter().sum::<f64>() / 3.0;

    let mut metrics = json!({ "model": variant.name(), "n": ds.len(), "seed": seed, "kind": format!("{:?}", ds.kind) });
    let model = match variant {
        Variant::JepaMse => {
            let tc = TrainConfig { hidden, epochs, adam };
            let (net, losses) = jepa_mse_train(&x, &y, &tc, &mut rng)?;
            write_curve(&out.join("curve.csv"), "epoch,loss", losses.iter().enumerate().map(|(i, l)| format!("{i},{l}")))?;
            let pred = net.predict(&grid_m)?;
            let p: Vec<f64> = pred.column(0).iter().copied().collect();
            let g: Vec<f64> = grid.iter().copied().collect();
            metrics["final_loss"] = json!(losses.last());
            metrics["rmse_to_conditional_mean"] = json!(curve_rmse(&p, &g, cond_mean));
            metrics["rmse_to_branch"] =
                json!((0..3).map(|b| curve_rmse(&p, &g, |v| ds.kind.branch(b, v))).collect::<Vec<_>>());
            ModelFile::JepaMse { net }
        }
        Variant::GjeDualRbf => {
            let kernel = KernelSpec::rbf(cfg.get("length_scale")?, cfg.get("gp_noise")?)?;
            let batch = BatchEmbeddings::new(x.clone(), y.clone())?;
            metrics["dual_nll"] = json!(dual_nll(&batch, &kernel, 0.0)?);
            let xc: Vec<f64> = x.iter().copied().collect();
            let xt: Vec<f64> = y.iter().copied().collect();
            dual_predictor(&kernel, &xc, &xt)?;
            ModelFile::GjeDualRbf { kernel, x_c: xc, x_t: xt }
        }
        Variant::GmjeEm1 | Variant::GmjeEm3 => {
            let opts = EmOptions {
                k: if variant == Variant::GmjeEm1 { 1 } else { 3 },
                max_iters: cfg.get("em_max_iters")?,
                tol: cfg.get("em_tol")?,
                var_floor: cfg.get("em_var_floor")?,
                ..EmOptions::default()
            };
            let fit = em_fit(&ds.joint_matrix(), 1, &opts, &mut rng)?;
            write_curve(
                &out.join("curve.csv"),
                "iteration,mean_log_likelihood",
                fit.log_likelihood.iter().enumerate().map(|(i, l)| format!("{i},{l}")),
            )?;
            metrics["mean_log_likelihood"] = json!(fit.log_likelihood.last());
            metrics["iterations"] = json!(fit.iterations);
            metrics["converged"] = json!(fit.converged);
            metrics["weights"] = json!(fit.mixture.weights().as_slice());
            metrics["cov_trace"] =
                json!(fit.mixture.components().iter().map(|c| c.full_cov().trace()).collect::<Vec<_>>());
            if variant == Variant::GmjeEm1 {
                ModelFile::GmjeEm1 { mixture: fit.mixture }
            } else {
                ModelFile::GmjeEm3 { mixture: fit.mixture }
            }
        }
        Variant::GmjeGng => {
            let gcfg = GngConfig {
                epsilon_b: cfg.get("gng_epsilon_b")?,
                epsilon_n: cfg.get("gng_epsilon_n")?,
                lambda_interval: cfg.get("gng_lambda")?,
                a_max: cfg.get("gng_a_max")?,
                alpha: cfg.get("gng_alpha")?,
                beta: cfg.get("gng_beta")?,
                k_max: cfg.get("gng_k_max")?,
            };
            gcfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let data = ds.joint_matrix();
            let steps: usize = cfg.get("gng_steps")?;
            let mut graph = GngGraph::init_from_data(&data, &mut rng)?;
            let mut order: Vec<usize> = Vec::new();
            let mut errors = Vec::with_capacity(steps);
            for t in 0..steps {
                if t % data.nrows() == 0 {
                    order = (0..data.nrows()).collect();
                    order.shuffle(&mut rng);
                }
                let z = data.row(order[t % data.nrows()]).transpose();
                errors.push(graph.step(&z, &gcfg)?.quantization_error);
            }
            let avg = stream_average(&errors);
            write_curve(
                &out.join("curve.csv"),
                "step,quantization_error,stream_average",
                errors.iter().zip(&avg).enumerate().map(|(i, (e, a))| format!("{i},{e},{a}")),
            )?;
            let mixture = gng_mixture(&graph, &data, 1, cfg.get("em_var_floor")?)?;
            metrics["nodes"] = json!(graph.node_count());
            metrics["edges"] = json!(graph.edge_count());
            metrics["components"] = json!(graph.components());
            metrics["final_stream_average"] = json!(avg.last());
            ModelFile::GmjeGng { graph, mixture }
        }
        Variant::GmjeMdn => {
            let marginal: MarginalMode = serde_json::from_value(json!(cfg.raw("marginal")))
                .map_err(|_| CliError::Usage(format!("unknown marginal mode {:?}", cfg.raw("marginal"))))?;
            let mc = MdnTrainConfig {
                k: cfg.get("k")?,
                hidden,
                epochs,
                adam,
                sigma_floor: cfg.get("sigma_floor")?,
                marginal,
                ema_momentum: cfg.get("ema_momentum")?,
            };
            let fit = mdn_train(&x, &y, &mc, &mut rng)?;
            write_curve(&out.join("curve.csv"), "epoch,loss", fit.losses.iter().enumerate().map(|(i, l)| format!("{i},{l}")))?;
            let p = fit.mdn.predict(&grid_m)?;
            let k = p.k();
            metrics["final_loss"] = json!(fit.losses.last());
            metrics["mean_alpha"] = json!((0..k).map(|j| p.alpha.column(j).mean()).collect::<Vec<_>>());
            metrics["mean_sigma"] = json!((0..k).map(|j| p.sigma.column(j).mean()).collect::<Vec<_>>());
            if k == 3 && p.d_t == 1 {
                metrics["branch_rmse_global"] = json!(branch_rmse(&p.means, &grid, ds.kind, Matching::Global));
                metrics["branch_rmse_per_point"] = json!(branch_rmse(&p.means, &grid, ds.kind, Matching::PerPoint));
            }
            ModelFile::GmjeMdn { mdn: fit.mdn, context_cov: fit.ema }
        }
    };
    model.save(&out.join("model.json"))?;
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    Ok(metrics)
}

/// Per-context mixture summary with scalar targets.
struct Row {
    gamma: Vec<f64>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl Row {
    fn mean(&self) -> f64 {
        self.gamma.iter().zip(&self.mu).map(|(g, m)| g * m).sum()
    }

    /// `(total, within, between)` variance.
    fn variance(&self) -> (f64, f64, f64) {
        let mean = self.mean();
        let within: f64 = self.gamma.iter().zip(&self.sigma).map(|(g, s)| g * s * s).sum();
        let between: f64 = self.gamma.iter().zip(&self.mu).map(|(g, m)| g * (m - mean).powi(2)).sum();
        (within + between, within, between)
    }

    fn density(&self, y: f64) -> f64 {
        self.gamma
            .iter()
            .zip(&self.mu)
            .zip(&self.sigma)
            .map(|((g, m), s)| g * (-0.5 * ((y - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt()))
            .sum()
    }
}

fn mixture_rows(model: &ModelFile, grid: &DVector<f64>) -> Result<Option<Vec<Row>>, CliError> {
    if let Some(mix) = model.mixture() {
        if mix.d_t() != 1 || mix.d_c() != 1 {
            return Err(CliError::Usage("predict handles scalar contexts and targets only".into()));
        }
        let mc = MixtureConditioner::new(mix)?;
        let mut rows = Vec::with_capacity(grid.len());
        for &x in grid.iter() {
            let cm = mc.condition(&DVector::from_element(1, x))?;
            rows.push(Row {
                gamma: cm.responsibilities.iter().copied().collect(),
                mu: cm.cond_means.iter().map(|m| m[0]).collect(),
                sigma: cm.cond_covs.iter().map(|c| c[(0, 0)].sqrt()).collect(),
            });
        }
        return Ok(Some(rows));
    }
    if let ModelFile::GmjeMdn { mdn, .. } = model {
        if mdn.config().target_dim != 1 || mdn.config().context_dim != 1 {
            return Err(CliError::Usage("predict handles scalar contexts and targets only".into()));
        }
        let p = mdn.predict(&DMatrix::from_column_slice(grid.len(), 1, grid.as_slice()))?;
        return Ok(Some(
            (0..grid.len())
                .map(|i| Row {
                    gamma: p.alpha.row(i).iter().copied().collect(),
                    mu: p.means.row(i).iter().copied().collect(),
                    sigma: p.sigma.row(i).iter().copied().collect(),
                })
                .collect(),
        ));
    }
    Ok(None)
}

pub fn predict(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let model = ModelFile::load(Path::new(cfg.raw("model_file")))?;
    let count: usize = cfg.get("grid")?;
    let bins: usize = cfg.get("density_bins")?;
    let (y_min, y_max): (f64, f64) = (cfg.get("y_min")?, cfg.get("y_max")?);
    if count < 2 || (bins > 1 && !(y_max > y_min)) {
        return Err(CliError::Usage("grid needs at least two points and y_max must exceed y_min".into()));
    }
    let out = prepare_out(cfg)?;
    let grid = eval_grid(count)?;
    let mut csv = String::new();
    let mut density: Option<Vec<Row>> = None;
    match &model {
        ModelFile::JepaMse { net } => {
            let pred = net.predict(&DMatrix::from_column_slice(count, 1, grid.as_slice()))?;
            csv.push_str("x,mean\n");
            for (x, m) in grid.iter().zip(pred.column(0).iter()) {
                writeln!(csv, "{x},{m}").expect("string write");
            }
        }
        ModelFile::GjeDualRbf { kernel, x_c, x_t } => {
            let p = dual_predictor(kernel, x_c, x_t)?;
            csv.push_str("x,mean,std\n");
            let mut rows = Vec::with_capacity(count);
            for &x in grid.iter() {
                let (m, v) = p.mean_var(&DVector::from_element(1, x));
                writeln!(csv, "{x},{},{}", m[0], v.sqrt()).expect("string write");
                rows.push(Row { gamma: vec![1.0], mu: vec![m[0]], sigma: vec![v.sqrt().max(1e-12)] });
            }
            density = Some(rows);
        }
        _ => {
            let rows = mixture_rows(&model, &grid)?.expect("mixture-like model");
            let k = rows[0].gamma.len();
            let mut header = vec!["x".to_string()];
            for prefix in ["gamma", "mu", "sigma"] {
                header.extend((0..k).map(|j| format!("{prefix}_{j}")));
            }
            header.extend(["mean", "total_var", "within_var", "between_var"].map(String::from));
            writeln!(csv, "{}", header.join(",")).expect("string write");
            for (x, r) in grid.iter().zip(&rows) {
                let (t, w, b) = r.variance();
                let mut fields = vec![x.to_string()];
                fields.extend(r.gamma.iter().chain(&r.mu).chain(&r.sigma).map(|v| v.to_string()));
                fields.extend([r.mean(), t, w, b].map(|v| v.to_string()));
                writeln!(csv, "{}", fields.join(",")).expect("string write");
            }
            density = Some(rows);
        }
    }
    fs::write(out.join("predictions.csv"), &csv)?;
    let mut wrote_density = false;
    if let (Some(rows), true) = (density, bins > 1) {
        let mut d = String::from("x,y,density\n");
        for (x, r) in grid.iter().zip(&rows) {
            for b in 0..bins {
                let y = y_min + (y_max - y_min) * b as f64 / (bins - 1) as f64;
                writeln!(d, "{x},{y},{}", r.density(y)).expect("string write");
            }
        }
        fs::write(out.join("density.csv"), d)?;
        wrote_density = true;
    }
    Ok(json!({ "model": model.variant().name(), "rows": count, "density": wrote_density }))
}

pub fn sample(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let model = ModelFile::load(Path::new(cfg.raw("model_file")))?;
    let n: usize = cfg.get("n")?;
    let seed: u64 = cfg.get("seed")?;
    let mut rng = seeded(seed);
    let (samples, labels) = if let Some(mix) = model.mixture() {
        let drawn = mix.sample(n, None, SamplingWeights::Learned, &mut rng)?;
        (drawn.samples, drawn.labels)
    } else if let ModelFile::GmjeMdn { mdn, context_cov } = &model {
        let marginal = Gaussian::new(DVector::zeros(context_cov.cov.nrows()), context_cov.cov.clone())?;
        let xc = gaussian_sample(&marginal, n, &mut rng)?;
        let p = mdn.predict(&xc)?;
        let d_t = p.d_t;
        let mut out = DMatrix::zeros(n, xc.ncols() + d_t);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = p.k() - 1;
            for j in 0..p.k() {
                acc += p.alpha[(i, j)];
                if acc > u {
                    k = j;
                    break;
                }
            }
            labels.push(k);
            out.view_mut((i, 0), (1, xc.ncols())).copy_from(&xc.row(i));
            let mu = p.mean(i, k);
            let e = standard_normal(&mut rng, 1, d_t);
            for j in 0..d_t {
                out[(i, xc.ncols() + j)] = mu[j] + p.sigma[(i, k)] * e[(0, j)];
            }
        }
        (out, labels)
    } else {
        return Err(CliError::Usage(format!(
            "{} is a conditional predictor without a joint density; sampling needs a mixture or MDN model",
            model.variant().name()
        )));
    };
    let out = prepare_out(cfg)?;
    let d_c = samples.ncols() - 1;
    let mut header: Vec<String> = (0..d_c).map(|j| if d_c == 1 { "x_c".into() } else { format!("x_c{j}") }).collect();
    header.push("x_t".into());
    header.push("component".into());
    let mut csv = format!("{}\n", header.join(","));
    for (row, label) in samples.row_iter().zip(&labels) {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{},{label}", fields.join(",")).expect("string write");
    }
    fs::write(out.join("samples.csv"), csv)?;
    Ok(json!({ "model": model.variant().name(), "n": n, "seed": seed }))
}

pub fn smc_sim(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let stream = StreamConfig {
        classes: cfg.get("classes")?,
        dim: cfg.get("dim")?,
        rare_class: cfg.get("rare_class")?,
        rare_freq: cfg.get("rare_freq")?,
        spread: cfg.get("spread")?,
        batch: cfg.get("batch")?,
        steps: cfg.get("steps")?,
    };
    let scheme: ResampleScheme = serde_json::from_value(json!(cfg.raw("scheme")))
        .map_err(|_| CliError::Usage(format!("unknown resampling scheme {:?}", cfg.raw("scheme"))))?;
    let policy = match cfg.raw("resample") {
        "every_step" => ResamplePolicy::EveryStep,
        other => match other.strip_prefix("ess_below:").map(str::parse::<f64>) {
            Some(Ok(f)) if (0.0..=1.0).contains(&f) => ResamplePolicy::EssBelow(f),
            _ => return Err(CliError::Usage(format!("resample must be every_step or ess_below:<0..1>, got {other:?}"))),
        },
    };
    let bank = BankConfig { m: cfg.get("m")?, tau: cfg.get("tau")?, scheme, policy };
    let seed: u64 = cfg.get("seed")?;
    let sim = smc_simulation(&stream, &bank, &mut seeded(seed)).map_err(|e| match e {
        gmje::Error::InvalidArgument(msg) => CliError::Usage(msg),
        other => CliError::Contract(other),
    })?;
    let out = prepare_out(cfg)?;
    let mut buf = Vec::new();
    sim.write_csv(&mut buf)?;
    fs::write(out.join("metrics.csv"), buf)?;
    let summary = serde_json::to_value(&sim.summary)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

pub fn diagnostics(cfg: &Resolved) -> Result<serde_json::Value, CliError> {
    let seed: u64 = cfg.get("seed")?;
    let inject = match cfg.raw("inject") {
        "none" => Injection::None,
        "asymmetric_cov" => Injection::AsymmetricCov,
        other => return Err(CliError::Usage(format!("inject must be none or asymmetric_cov, got {other:?}"))),
    };
    let report = run_diagnostics(seed, inject);
    let value = serde_json::to_value(&report)?;
    if !cfg.raw("out").is_empty() {
        let out = prepare_out(cfg)?;
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&value)?)?;
    }
    Ok(value)
}
