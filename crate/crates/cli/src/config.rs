//! Experiment configuration: a flat TOML table whose missing keys are filled
//! from the preset of the chosen experiment.

use std::path::Path;

use macomss::completion::{R0Mode, StackWeightMode};
use macomss::synthgen::{scenario_extent, Scenario, ThetaKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "MACOMSS_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RecoverySetting1,
    RecoverySetting2,
    ApproxLowrank,
    Poisson,
    DownstreamScenario1,
    DownstreamScenario2,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Macomss,
    Mean,
    Rs,
    Knn,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Macomss => "macomss",
            Method::Mean => "mean",
            Method::Rs => "rs",
            Method::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthKind {
    Lowrank,
    ApproxLowrank,
    Poisson,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaFamily {
    /// `alpha_i, beta_j ~ 1 − c·Unif[0,1]`.
    UniformScaled,
    /// `alpha_i, beta_j ~ Unif[1 − eta, 1]`.
    Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockScenario {
    None,
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum R0ModeName {
    MinDims,
    Hsvt,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackWeightName {
    Literal,
    Zeroed,
}

/// Parameters that a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Sets `m1` and `m2` together.
    M,
    M1,
    M2,
    P1,
    P2,
    SigmaMult,
    Snr,
    ThetaWidth,
    Alpha,
    Lambda0,
}

/// The file as written: every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub truth: Option<TruthKind>,
    pub p1: Option<usize>,
    pub p2: Option<usize>,
    pub r: Option<usize>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub scenario: Option<BlockScenario>,
    pub sigma_mult: Option<f64>,
    pub snr: Option<f64>,
    pub theta: Option<ThetaFamily>,
    pub theta_width: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda0: Option<f64>,
    pub r0_mode: Option<R0ModeName>,
    pub r0: Option<usize>,
    pub eta_const: Option<f64>,
    pub stack_weight_mode: Option<StackWeightName>,
    pub knn_k: Option<usize>,
    pub cv_folds: Option<usize>,
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Option<Vec<f64>>,
    pub out_dir: Option<String>,
}

/// Fully resolved configuration. Its serialization is the config echo in
/// every report, so it leaves out the worker count and output directory,
/// which do not affect results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    #[serde(skip)]
    pub workers: usize,
    pub methods: Vec<Method>,
    pub truth: TruthKind,
    /// Rows (samples for the downstream experiments).
    pub p1: usize,
    /// Columns (features for the downstream experiments).
    pub p2: usize,
    pub r: usize,
    /// Observable rows; ignored when `scenario` is set.
    pub m1: usize,
    /// Observable columns; ignored when `scenario` is set.
    pub m2: usize,
    pub scenario: BlockScenario,
    /// Noise sd as a multiple of `‖A‖_F / sqrt(p1 p2)`. Used when `snr` is 0.
    pub sigma_mult: f64,
    /// When positive, noise sd is `‖A‖_F / sqrt(p1 p2) / snr`.
    pub snr: f64,
    pub theta: ThetaFamily,
    pub theta_width: f64,
    pub alpha: f64,
    pub lambda0: f64,
    pub r0_mode: R0ModeName,
    pub r0: usize,
    pub eta_const: f64,
    pub stack_weight_mode: StackWeightName,
    pub knn_k: usize,
    pub cv_folds: usize,
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
    #[serde(skip)]
    pub out_dir: Option<String>,
}

pub const DEFAULT_REPLICATES: usize = 50;
pub const DEFAULT_SEED: u64 = 20_240_101;

impl ExperimentConfig {
    /// Preset defaults for `kind`.
    pub fn preset(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            seed: DEFAULT_SEED,
            replicates: DEFAULT_REPLICATES,
            workers: 1,
            methods: vec![Method::Macomss],
            truth: TruthKind::Lowrank,
            p1: 300,
            p2: 300,
            r: 3,
            m1: 100,
            m2: 100,
            scenario: BlockScenario::None,
            sigma_mult: 0.3,
            snr: 0.0,
            theta: ThetaFamily::UniformScaled,
            theta_width: 0.05,
            alpha: 1.0,
            lambda0: 10.0,
            r0_mode: R0ModeName::MinDims,
            r0: 0,
            eta_const: 2.0,
            stack_weight_mode: StackWeightName::Literal,
            knn_k: macomss::baselines::DEFAULT_K,
            cv_folds: 5,
            sweep_param: None,
            sweep_values: Vec::new(),
            out_dir: None,
        };
        match kind {
            ExperimentKind::RecoverySetting1 | ExperimentKind::Custom => {}
            ExperimentKind::RecoverySetting2 => {
                c.m1 = 50;
                c.m2 = 50;
                c.sigma_mult = 1.0;
                c.theta = ThetaFamily::Band;
                c.theta_width = 0.1;
            }
            ExperimentKind::ApproxLowrank => {
                c.truth = TruthKind::ApproxLowrank;
                c.m1 = 50;
                c.m2 = 50;
            }
            ExperimentKind::Poisson => {
                c.truth = TruthKind::Poisson;
                c.m1 = 50;
                c.m2 = 50;
                c.sigma_mult = 0.0;
            }
            ExperimentKind::DownstreamScenario1 | ExperimentKind::DownstreamScenario2 => {
                c.truth = TruthKind::Logistic;
                c.methods = vec![Method::Macomss, Method::Mean, Method::Rs, Method::Knn];
                c.r = 5;
                c.theta_width = 0.1;
                if kind == ExperimentKind::DownstreamScenario1 {
                    c.scenario = BlockScenario::One;
                    c.p1 = 300;
                    c.p2 = 70;
                    c.snr = 1.0;
                } else {
                    c.scenario = BlockScenario::Two;
                    c.p1 = 70;
                    c.p2 = 150;
                    c.snr = 5.0;
                }
            }
        }
        c
    }

    /// Resolves a raw file against its preset and validates the result.
    pub fn resolve(raw: RawConfig) -> CliResult<Self> {
        let mut c = Self::preset(raw.experiment.unwrap_or(ExperimentKind::RecoverySetting1));
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = raw.$field { c.$field = v; } )* };
        }
        take!(seed, replicates, workers, methods, truth, p1, p2, r, m1, m2, scenario, sigma_mult, snr, theta);
        take!(theta_width, alpha, lambda0, r0_mode, r0, eta_const, stack_weight_mode, knn_k, cv_folds);
        take!(sweep_values);
        c.sweep_param = raw.sweep_param.or(c.sweep_param);
        c.out_dir = raw.out_dir.or(c.out_dir);
        c.validate()?;
        Ok(c)
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::resolve(raw)
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Applies `MACOMSS_SEED` if it is set.
    pub fn apply_env(&mut self) -> CliResult<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer")))?;
        }
        Ok(())
    }

    pub fn is_downstream(&self) -> bool {
        self.truth == TruthKind::Logistic
    }

    pub fn theta_kind(&self) -> ThetaKind {
        match self.theta {
            ThetaFamily::UniformScaled => ThetaKind::UniformScaled { c: self.theta_width },
            ThetaFamily::Band => ThetaKind::Band { eta: self.theta_width },
        }
    }

    pub fn scenario_preset(&self) -> Option<Scenario> {
        match self.scenario {
            BlockScenario::None => None,
            BlockScenario::One => Some(Scenario::One),
            BlockScenario::Two => Some(Scenario::Two),
        }
    }

    pub fn completion_options(&self) -> macomss::Options {
        macomss::Options {
            r0_mode: match self.r0_mode {
                R0ModeName::MinDims => R0Mode::MinDims,
                R0ModeName::Hsvt => R0Mode::HsvtHeuristic,
                R0ModeName::Fixed => R0Mode::Fixed(self.r0),
            },
            eta_const: self.eta_const,
            stack_weight_mode: match self.stack_weight_mode {
                StackWeightName::Literal => StackWeightMode::Literal,
                StackWeightName::Zeroed => StackWeightMode::Zeroed,
            },
            ..macomss::Options::default()
        }
    }

    /// The configuration at one sweep point.
    pub fn at_sweep_value(&self, value: f64) -> CliResult<Self> {
        let mut c = self.clone();
        let as_size = |v: f64| -> CliResult<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Config(format!("sweep value {v} must be a non-negative integer")))
            }
        };
        match self.sweep_param {
            None => return Ok(c),
            Some(SweepParam::M) => {
                c.m1 = as_size(value)?;
                c.m2 = c.m1;
            }
            Some(SweepParam::M1) => c.m1 = as_size(value)?,
            Some(SweepParam::M2) => c.m2 = as_size(value)?,
            Some(SweepParam::P1) => c.p1 = as_size(value)?,
            Some(SweepParam::P2) => c.p2 = as_size(value)?,
            Some(SweepParam::SigmaMult) => c.sigma_mult = value,
            Some(SweepParam::Snr) => c.snr = value,
            Some(SweepParam::ThetaWidth) => c.theta_width = value,
            Some(SweepParam::Alpha) => c.alpha = value,
            Some(SweepParam::Lambda0) => c.lambda0 = value,
        }
        c.sweep_param = None;
        c.sweep_values.clear();
        c.validate_point()?;
        Ok(c)
    }

    /// Sweep points in order; a single `None` point when no sweep is set.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        if self.sweep_param.is_some() {
            self.sweep_values.iter().map(|&v| Some(v)).collect()
        } else {
            vec![None]
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.replicates == 0 {
            return bad("replicates must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        match (self.sweep_param, self.sweep_values.is_empty()) {
            (Some(_), true) => return bad("sweep_param needs a non-empty sweep_values".into()),
            (None, false) => return bad("sweep_values given without sweep_param".into()),
            _ => {}
        }
        for p in self.sweep_points() {
            match p {
                Some(v) => {
                    self.at_sweep_value(v)?;
                }
                None => self.validate_point()?,
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.p1 == 0 || self.p2 == 0 {
            return bad("p1 and p2 must be >= 1".into());
        }
        if self.r == 0 || self.r > self.p1.min(self.p2) {
            return bad(format!("r = {} must lie in [1, min(p1, p2)]", self.r));
        }
        match self.scenario_preset() {
            Some(s) => {
                scenario_extent(s, self.p1, self.p2).map_err(|e| CliError::Config(e.to_string()))?;
            }
            None => {
                if self.m1 == 0 || self.m1 > self.p1 || self.m2 == 0 || self.m2 > self.p2 {
                    return bad(format!(
                        "m1 = {}, m2 = {} must satisfy 1 <= m <= p ({} x {})",
                        self.m1, self.m2, self.p1, self.p2
                    ));
                }
            }
        }
        if !(self.sigma_mult >= 0.0) || !(self.snr >= 0.0) {
            return bad("sigma_mult and snr must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.theta_width) {
            return bad(format!("theta_width = {} must lie in [0, 1)", self.theta_width));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha = {} must be >= 0", self.alpha));
        }
        if !(self.lambda0 > 0.0) {
            return bad(format!("lambda0 = {} must be > 0", self.lambda0));
        }
        if self.r0_mode == R0ModeName::Fixed && self.r0 == 0 {
            return bad("r0_mode = \"fixed\" needs r0 >= 1".into());
        }
        if !(self.eta_const > 0.0) {
            return bad("eta_const must be > 0".into());
        }
        if self.knn_k == 0 {
            return bad("knn_k must be >= 1".into());
        }
        if self.truth == TruthKind::Logistic {
            if self.p2 < macomss::synthgen::LOGISTIC_NONZERO {
                return bad(format!(
                    "logistic truth needs p2 >= {}",
                    macomss::synthgen::LOGISTIC_NONZERO
                ));
            }
            if self.cv_folds < 2 || self.cv_folds > self.p1 {
                return bad(format!("cv_folds = {} must lie in [2, p1]", self.cv_folds));
            }
        }
        Ok(())
    }
}
