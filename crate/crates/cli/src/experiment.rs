//! Replicated simulation runs and their reports.

use std::path::Path;
use std::time::Instant;

use macomss::baselines::{knn_impute, mean_impute, rs_impute_with};
use macomss::evaluation::{cross_validated_auc, nmse, recovery_losses, stratified_folds, RIDGE_GRID};
use macomss::rng::{replicate_stream, Purpose};
use macomss::synthgen::{
    add_gaussian_noise, apply_scenario_block, draw_labels, draw_logistic_coefficients, gen_approx_lowrank,
    gen_logistic_design, gen_lowrank, gen_poisson, gen_poisson_factors, gen_theta, poisson_intensity, sample_mask,
};
use macomss::{frobenius_norm, macomss, BlockPartition, Mask, Masked, Matrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method, TruthKind};
use crate::error::{CliError, CliResult};

/// Method label of the logistic fit on the noiseless, fully observed design.
pub const COMPLETE_DATA: &str = "complete";

pub const METRICS: [&str; 5] = ["frob_loss", "spec_loss", "nmse", "auc", "r_hat"];

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub truth: Matrix<f64>,
    pub observed: Masked,
    /// Estimates are divided by this before comparison with the truth
    /// (the Poisson intensity; 1 otherwise).
    pub scale: f64,
    pub labels: Option<Vec<bool>>,
}

/// Noise sd for a truth matrix under the configured convention.
pub fn noise_sigma(cfg: &ExperimentConfig, truth: &Matrix<f64>) -> f64 {
    let rms = frobenius_norm(truth) / ((truth.rows() * truth.cols()) as f64).sqrt();
    if cfg.snr > 0.0 {
        rms / cfg.snr
    } else {
        cfg.sigma_mult * rms
    }
}

/// Draws replicate `replicate` of the (single-point) configuration. Every
/// random component has its own stream, so sweep points that share a seed
/// share their randomness.
pub fn generate_instance(cfg: &ExperimentConfig, replicate: u64) -> CliResult<Instance> {
    let rng = |purpose| replicate_stream(cfg.seed, replicate, purpose);
    let (p1, p2, r) = (cfg.p1, cfg.p2, cfg.r);
    let mut truth_rng = rng(Purpose::Truth);
    let mut labels = None;
    let truth = match cfg.truth {
        TruthKind::Lowrank => gen_lowrank(p1, p2, r, &mut truth_rng),
        TruthKind::ApproxLowrank => gen_approx_lowrank(p1, p2, r, cfg.alpha, &mut truth_rng),
        TruthKind::Poisson => gen_poisson_factors(p1, p2, r, &mut truth_rng),
        TruthKind::Logistic => {
            let x = gen_logistic_design(p1, p2, r, &mut truth_rng);
            let mut label_rng = rng(Purpose::Labels);
            let (beta0, beta1) = draw_logistic_coefficients(p2, &mut label_rng);
            labels = Some(draw_labels(&x, beta0, &beta1, &mut label_rng));
            x
        }
    };
    let theta = gen_theta(p1, p2, cfg.theta_kind(), &mut rng(Purpose::Theta))?;
    let (mask, partition) = match cfg.scenario_preset() {
        Some(s) => {
            let full = BlockPartition::new(p1, p2, p1, p2)?;
            apply_scenario_block(&sample_mask(&theta, full, &mut rng(Purpose::Mask))?, s)?
        }
        None => {
            let part = BlockPartition::new(p1, p2, cfg.m1, cfg.m2)?;
            (sample_mask(&theta, part, &mut rng(Purpose::Mask))?, part)
        }
    };
    let mut noise_rng = rng(Purpose::Noise);
    let (values, scale) = if cfg.truth == TruthKind::Poisson {
        let counts = gen_poisson(&truth, cfg.lambda0, &mut noise_rng)?;
        (counts.map(|c| c as f64), poisson_intensity(&truth, cfg.lambda0))
    } else {
        (add_gaussian_noise(&truth, noise_sigma(cfg, &truth), &mut noise_rng)?, 1.0)
    };
    let observed = Masked::new(values, mask, partition)?;
    Ok(Instance {
        truth,
        observed,
        scale,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRow {
    pub sweep_value: Option<f64>,
    pub replicate: usize,
    pub method: String,
    pub frob_loss: Option<f64>,
    pub spec_loss: Option<f64>,
    pub nmse: Option<f64>,
    pub auc: Option<f64>,
    pub r_hat: Option<usize>,
    pub error: Option<String>,
    #[serde(skip)]
    pub runtime_ms: f64,
}

impl ReplicateRow {
    fn empty(sweep_value: Option<f64>, replicate: usize, method: &str) -> Self {
        ReplicateRow {
            sweep_value,
            replicate,
            method: method.to_string(),
            frob_loss: None,
            spec_loss: None,
            nmse: None,
            auc: None,
            r_hat: None,
            error: None,
            runtime_ms: 0.0,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "frob_loss" => self.frob_loss,
            "spec_loss" => self.spec_loss,
            "nmse" => self.nmse,
            "auc" => self.auc,
            "r_hat" => self.r_hat.map(|r| r as f64),
            _ => None,
        }
    }
}

fn impute(method: Method, cfg: &ExperimentConfig, y: &Masked, replicate: u64) -> macomss::Result<(Matrix<f64>, Option<usize>)> {
    Ok(match method {
        Method::Macomss => {
            let res = macomss(y, &cfg.completion_options())?;
            (res.a_hat, Some(res.r_hat))
        }
        Method::Mean => (mean_impute(y)?.values, None),
        Method::Rs => (rs_impute_with(y, &mut replicate_stream(cfg.seed, replicate, Purpose::Impute))?, None),
        Method::Knn => (knn_impute(y, cfg.knn_k)?.values, None),
    })
}

fn score(
    row: &mut ReplicateRow,
    estimate: &Matrix<f64>,
    inst: &Instance,
    target: &Mask,
    folds: Option<&[usize]>,
) -> macomss::Result<()> {
    let est = if inst.scale == 1.0 {
        estimate.clone()
    } else {
        estimate.scale(1.0 / inst.scale)
    };
    let (frob, spec) = recovery_losses(&est, &inst.truth)?;
    row.frob_loss = Some(frob);
    row.spec_loss = Some(spec);
    row.nmse = Some(nmse(&est, &inst.truth, target)?);
    if let (Some(z), Some(folds)) = (&inst.labels, folds) {
        row.auc = Some(cross_validated_auc(&est, z, &RIDGE_GRID, folds)?.auc);
    }
    Ok(())
}

/// All method rows for one replicate at one sweep point. Failures become
/// rows with NA metrics and the error message.
pub fn run_replicate(cfg: &ExperimentConfig, sweep_value: Option<f64>, replicate: usize) -> Vec<ReplicateRow> {
    let mut names: Vec<&str> = cfg.methods.iter().map(|m| m.as_str()).collect();
    if cfg.is_downstream() {
        names.push(COMPLETE_DATA);
    }
    let inst = match generate_instance(cfg, replicate as u64) {
        Ok(inst) => inst,
        Err(e) => {
            return names
                .into_iter()
                .map(|n| ReplicateRow {
                    error: Some(e.to_string()),
                    ..ReplicateRow::empty(sweep_value, replicate, n)
                })
                .collect()
        }
    };
    let target = inst.observed.mask().map(|b| !b);
    let folds = inst
        .labels
        .as_ref()
        .map(|z| stratified_folds(z, cfg.cv_folds, &mut replicate_stream(cfg.seed, replicate as u64, Purpose::Folds)));
    let mut rows = Vec::with_capacity(names.len());
    for &method in &cfg.methods {
        let mut row = ReplicateRow::empty(sweep_value, replicate, method.as_str());
        let start = Instant::now();
        let outcome = impute(method, cfg, &inst.observed, replicate as u64).and_then(|(est, r_hat)| {
            row.r_hat = r_hat;
            score(&mut row, &est, &inst, &target, folds.as_deref())
        });
        if let Err(e) = outcome {
            row = ReplicateRow {
                error: Some(e.to_string()),
                ..ReplicateRow::empty(sweep_value, replicate, method.as_str())
            };
        }
        row.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(row);
    }
    if let (Some(z), Some(folds)) = (&inst.labels, &folds) {
        let mut row = ReplicateRow::empty(sweep_value, replicate, COMPLETE_DATA);
        let start = Instant::now();
        match cross_validated_auc(&inst.truth, z, &RIDGE_GRID, folds) {
            Ok(cv) => row.auc = Some(cv.auc),
            Err(e) => row.error = Some(e.to_string()),
        }
        row.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(row);
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_value: Option<f64>,
    pub method: String,
    pub metric: String,
    /// Replicates with a finite value.
    pub n: usize,
    pub n_na: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
    pub iqr: Option<f64>,
}

/// Linear-interpolation quantile of sorted data (`q ∈ [0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn summarize(rows: &[ReplicateRow], points: &[Option<f64>]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = Vec::new();
    for &point in points {
        for &method in &methods {
            let group: Vec<&ReplicateRow> = rows.iter().filter(|r| r.sweep_value == point && r.method == method).collect();
            for metric in METRICS {
                let mut vals: Vec<f64> = group.iter().filter_map(|r| r.metric(metric)).filter(|x| x.is_finite()).collect();
                if vals.is_empty() && group.iter().all(|r| r.error.is_none()) {
                    // metric does not apply to this method
                    continue;
                }
                vals.sort_by(f64::total_cmp);
                let q25 = quantile_sorted(&vals, 0.25);
                let q75 = quantile_sorted(&vals, 0.75);
                out.push(SummaryRow {
                    sweep_value: point,
                    method: method.to_string(),
                    metric: metric.to_string(),
                    n: vals.len(),
                    n_na: group.len() - vals.len(),
                    median: quantile_sorted(&vals, 0.5),
                    q25,
                    q75,
                    iqr: q25.zip(q75).map(|(a, b)| b - a),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Interpretation {
    pub stack_weight_mode: &'static str,
    pub decay_profile: &'static str,
    pub noise_convention: String,
    pub poisson_scale: &'static str,
    pub block_layout: &'static str,
    pub classifier: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub interpretation: Interpretation,
    pub summary: Vec<SummaryRow>,
    pub replicates: Vec<ReplicateRow>,
}

fn interpretation(cfg: &ExperimentConfig) -> Interpretation {
    Interpretation {
        stack_weight_mode: cfg.completion_options().stack_weight_mode.as_str(),
        decay_profile: "r unit singular values, then j^(-alpha) for j = 1..min(p1,p2)-r",
        noise_convention: if cfg.snr > 0.0 {
            "sigma = rms(A) / snr".into()
        } else {
            "sigma = sigma_mult * rms(A)".into()
        },
        poisson_scale: "estimates divided by the Poisson intensity before comparison",
        block_layout: "structured block in the bottom-right corner",
        classifier: "ridge logistic, penalty by stratified k-fold held-out log-likelihood, out-of-fold AUC",
    }
}

/// Runs every sweep point and replicate on a pool of `cfg.workers` threads.
/// The report does not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    let points = cfg.sweep_points();
    let mut tasks = Vec::new();
    for &point in &points {
        let point_cfg = match point {
            Some(v) => cfg.at_sweep_value(v)?,
            None => cfg.clone(),
        };
        for rep in 0..cfg.replicates {
            tasks.push((point, point_cfg.clone(), rep));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let per_task: Vec<Vec<ReplicateRow>> =
        pool.install(|| tasks.par_iter().map(|(point, c, rep)| run_replicate(c, *point, *rep)).collect());
    let replicates: Vec<ReplicateRow> = per_task.into_iter().flatten().collect();
    Ok(ExperimentReport {
        tool: "macomss",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        interpretation: interpretation(cfg),
        summary: summarize(&replicates, &points),
        replicates,
    })
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl ExperimentReport {
    /// Summary entry for a method and metric at a sweep point.
    pub fn summary_for(&self, sweep_value: Option<f64>, method: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.sweep_value == sweep_value && s.method == method && s.metric == metric)
    }

    pub fn median(&self, sweep_value: Option<f64>, method: &str, metric: &str) -> Option<f64> {
        self.summary_for(sweep_value, method, metric).and_then(|s| s.median)
    }

    /// Deterministic JSON body: config echo, interpretation flags, summary
    /// and replicate rows. Runtimes are excluded.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn replicates_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sweep_value", "replicate", "method", "frob_loss", "spec_loss", "nmse", "auc", "r_hat", "error"])
            .expect("in-memory write");
        for r in &self.replicates {
            w.write_record([
                fmt_opt(r.sweep_value),
                r.replicate.to_string(),
                r.method.clone(),
                fmt_opt(r.frob_loss),
                fmt_opt(r.spec_loss),
                fmt_opt(r.nmse),
                fmt_opt(r.auc),
                fmt_opt(r.r_hat),
                r.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["sweep_value", "method", "metric", "n", "n_na", "median", "q25", "q75", "iqr"])
            .expect("in-memory write");
        for s in &self.summary {
            w.write_record([
                fmt_opt(s.sweep_value),
                s.method.clone(),
                s.metric.clone(),
                s.n.to_string(),
                s.n_na.to_string(),
                fmt_opt(s.median),
                fmt_opt(s.q25),
                fmt_opt(s.q75),
                fmt_opt(s.iqr),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("sweep_value,replicate,method,runtime_ms\n");
        for r in &self.replicates {
            out.push_str(&format!("{},{},{},{:.3}\n", fmt_opt(r.sweep_value), r.replicate, r.method, r.runtime_ms));
        }
        out
    }

    /// Writes `report.json`, `replicates.csv`, `summary.csv` and the
    /// non-deterministic `timings.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let files = [
            ("report.json", self.body_json()),
            ("replicates.csv", self.replicates_csv()),
            ("summary.csv", self.summary_csv()),
            ("timings.csv", self.timings_csv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}
