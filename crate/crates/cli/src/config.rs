//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use rglm::{ConstraintSpec, TruthStyle};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Gaussian sensing, logistic responses.
    OneBitSensing,
    /// Gaussian sensing, Gaussian noise.
    MatrixSensing,
    /// Bernoulli-mask completion with logistic responses on unscaled entries.
    OneBitCompletion,
    /// Uniform entrywise sampling with Gaussian noise.
    MatrixCompletion,
    /// Pairwise comparisons with logistic responses and row-centered truth.
    RankAggregation,
}

impl Experiment {
    pub fn uses_mask(self) -> bool {
        self == Experiment::OneBitCompletion
    }

    pub fn is_logistic(self) -> bool {
        matches!(
            self,
            Experiment::OneBitSensing | Experiment::OneBitCompletion | Experiment::RankAggregation
        )
    }
}

/// Either a fixed constraint or one whose parameters are read off the truth.
/// Both are tagged records; the `*_from_truth` tags select the second kind.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ConstraintChoice {
    FromTruth(TruthConstraint),
    Fixed(ConstraintSpec),
}

impl<'de> Deserialize<'de> for ConstraintChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let value = serde_json::Value::deserialize(d)?;
        let from_truth = value
            .get("type")
            .and_then(|t| t.as_str())
            .is_some_and(|t| t.ends_with("_from_truth"));
        if from_truth {
            serde_json::from_value(value).map(ConstraintChoice::FromTruth).map_err(D::Error::custom)
        } else {
            serde_json::from_value(value).map(ConstraintChoice::Fixed).map_err(D::Error::custom)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthConstraint {
    /// `FactorRowClip` with `a_u`, `a_v` equal to `slack` times the row-norm
    /// maxima of the truth's balanced factors. Oracle-informed.
    FactorRowClipFromTruth {
        #[serde(default = "one")]
        slack: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverConfig {
    /// Missing `beta` is probed; missing `eta0`/`t0` come from the default
    /// schedule at `kappa` (probed when absent).
    Avpg {
        r: usize,
        max_iter: usize,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        kappa: Option<f64>,
        #[serde(default)]
        eta0: Option<f64>,
        #[serde(default)]
        t0: Option<usize>,
        #[serde(default)]
        grad_tol: f64,
    },
    /// Missing `step` defaults to `1 / (2 beta_hat)` with a probed `beta_hat`.
    Pg {
        r: usize,
        max_iter: usize,
        #[serde(default)]
        step: Option<f64>,
        #[serde(default)]
        grad_tol: f64,
    },
}

impl SolverConfig {
    pub fn rank(&self) -> usize {
        match *self {
            SolverConfig::Avpg { r, .. } | SolverConfig::Pg { r, .. } => r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub d1: usize,
    pub d2: usize,
    pub true_rank: usize,
    /// Number of measurements; every experiment except one-bit completion.
    #[serde(default)]
    pub n: Option<usize>,
    /// Observation probability; one-bit completion only.
    #[serde(default)]
    pub mask_p: Option<f64>,
    /// Noise standard deviation for the quadratic experiments.
    #[serde(default)]
    pub sigma: f64,
    /// Truth normalisation `M / (c ||M||_inf)`; unit Frobenius norm when absent.
    #[serde(default)]
    pub truth_inf_scale: Option<f64>,
    pub constraint: ConstraintChoice,
    pub solver: SolverConfig,
    /// `X0 = init_gamma * X_{-1}`.
    #[serde(default)]
    pub init_gamma: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_probe_trials")]
    pub probe_trials: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_probe_trials() -> usize {
    50
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.d1 == 0 || self.d2 == 0 {
            return bad("d1 and d2 must be positive".into());
        }
        if self.true_rank == 0 || self.true_rank > self.d1.min(self.d2) {
            return bad(format!("true_rank {} invalid for {}x{}", self.true_rank, self.d1, self.d2));
        }
        let r = self.solver.rank();
        if r == 0 || r > self.d1.min(self.d2) {
            return bad(format!("solver rank {r} invalid for {}x{}", self.d1, self.d2));
        }
        match (self.experiment.uses_mask(), self.n, self.mask_p) {
            (true, None, Some(p)) if p > 0.0 && p <= 1.0 => {}
            (true, _, _) => return bad("one_bit_completion needs mask_p in (0, 1] and no n".into()),
            (false, Some(n), None) if n > 0 => {}
            (false, _, _) => return bad(format!("{:?} needs a positive n and no mask_p", self.experiment)),
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma = {} must be finite and >= 0", self.sigma));
        }
        if let Some(c) = self.truth_inf_scale {
            if !(c > 0.0) || !c.is_finite() {
                return bad(format!("truth_inf_scale = {c} must be positive"));
            }
        }
        if !(self.init_gamma >= 0.0) || !self.init_gamma.is_finite() {
            return bad(format!("init_gamma = {} must be finite and >= 0", self.init_gamma));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.probe_trials < 10 {
            return bad("probe_trials must be at least 10".into());
        }
        match &self.constraint {
            ConstraintChoice::Fixed(spec) => spec.validate()?,
            ConstraintChoice::FromTruth(TruthConstraint::FactorRowClipFromTruth { slack }) => {
                if !(*slack > 0.0) || !slack.is_finite() {
                    return bad(format!("slack = {slack} must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn truth_style(&self) -> TruthStyle {
        match self.truth_inf_scale {
            Some(c) => TruthStyle::InfScaled(c),
            None => TruthStyle::UnitFro,
        }
    }

    /// Normalisation of the random start direction `X_{-1}`.
    pub fn init_style(&self) -> TruthStyle {
        if self.experiment.uses_mask() {
            TruthStyle::InfScaled(0.5)
        } else {
            TruthStyle::UnitFro
        }
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("no output_dir in the config and no --out given".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: ConstraintChoice,
}

/// The base experiment repeated for every (constraint, init_gamma) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub constraints: Vec<LabeledConstraint>,
    pub init_gammas: Vec<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() || self.init_gammas.is_empty() {
            return Err(CliError::Config("sweep needs at least one constraint and one init_gamma".into()));
        }
        for c in &self.constraints {
            if c.label.is_empty() || !c.label.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                return Err(CliError::Config(format!("label {:?} must be [A-Za-z0-9_-]+", c.label)));
            }
        }
        for combo in self.combinations() {
            combo.1.validate()?;
        }
        Ok(())
    }

    /// `(label, config)` in constraint-major order.
    pub fn combinations(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        for c in &self.constraints {
            for &g in &self.init_gammas {
                let mut cfg = self.base.clone();
                cfg.constraint = c.constraint.clone();
                cfg.init_gamma = g;
                out.push((c.label.clone(), cfg));
            }
        }
        out
    }
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_sweep(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: SweepConfig = serde_json::from_str(&text).map_err(|e| CliError::json(path, e))?;
    cfg.validate()?;
    Ok(cfg)
}
