//! Probe reports: curvature estimates, gradient noise and the implied schedule.

use std::fmt::Write as _;
use std::path::Path;

use rglm::io::fmt_f64;
use rglm::probe::{empirical_rsc_rsm, grad_norm_at_truth, statistical_floor};
use rglm::solve::default_schedule;
use rglm::{ConstraintSpec, Dataset, GroundTruth};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{build_instance, par_seeds, probe_rng, resolve_constraint};

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub seed: u64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub kappa_hat: f64,
    pub eps_alpha_hat: f64,
    pub eps_beta_hat: f64,
    pub eps_grad: f64,
    pub eps_n: f64,
    pub spikiness: f64,
    pub t0: usize,
    pub eta0: f64,
    pub rank: usize,
    pub trials: usize,
}

impl ProbeReport {
    /// Flat `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("alpha_hat", fmt_f64(self.alpha_hat));
        kv("beta_hat", fmt_f64(self.beta_hat));
        kv("kappa_hat", fmt_f64(self.kappa_hat));
        kv("eps_alpha_hat", fmt_f64(self.eps_alpha_hat));
        kv("eps_beta_hat", fmt_f64(self.eps_beta_hat));
        kv("eps_grad", fmt_f64(self.eps_grad));
        kv("eps_n", fmt_f64(self.eps_n));
        kv("spikiness", fmt_f64(self.spikiness));
        kv("t0", self.t0.to_string());
        kv("eta0", fmt_f64(self.eta0));
        kv("rank", self.rank.to_string());
        kv("trials", self.trials.to_string());
        s
    }
}

/// Probe `dataset` at `rank` inside `spec`, drawing pairs from the probe stream of `seed`.
///
/// The schedule uses `max(kappa_hat, 1)` because a sampled ratio can dip
/// below one only through sampling error.
pub fn probe_dataset(
    dataset: &Dataset,
    truth: &GroundTruth,
    spec: &ConstraintSpec,
    rank: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let est = empirical_rsc_rsm(dataset, spec, rank, trials, &mut probe_rng(seed))?;
    let eps_grad = grad_norm_at_truth(dataset, truth)?;
    let kappa_hat = est.kappa();
    let schedule = default_schedule(kappa_hat.max(1.0))?;
    let eps_n = if est.alpha_hat > 0.0 {
        statistical_floor(&est, eps_grad, rank, schedule.t0, truth.rank)?
    } else {
        f64::INFINITY
    };
    Ok(ProbeReport {
        seed,
        alpha_hat: est.alpha_hat,
        beta_hat: est.beta_hat,
        kappa_hat,
        eps_alpha_hat: est.eps_alpha_hat,
        eps_beta_hat: est.eps_beta_hat,
        eps_grad,
        eps_n,
        spikiness: truth.spikiness,
        t0: schedule.t0,
        eta0: schedule.eta0,
        rank,
        trials: est.trials,
    })
}

/// Probe the instance that `run_seed` would solve.
pub fn probe_seed(cfg: &ExperimentConfig, seed: u64) -> Result<ProbeReport> {
    let inst = build_instance(cfg, seed)?;
    let spec = resolve_constraint(&cfg.constraint, &inst.truth)?;
    probe_dataset(&inst.dataset, &inst.truth, &spec, cfg.solver.rank(), cfg.probe_trials, seed)
}

/// Write `probe_seed<k>.txt` for every seed and return the reports in seed order.
pub fn probe_report(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<Vec<ProbeReport>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    par_seeds(&cfg.seeds, jobs, |seed| {
        let report = probe_seed(cfg, seed)?;
        let path = dir.join(format!("probe_seed{seed}.txt"));
        std::fs::write(&path, report.to_key_value()).map_err(|e| CliError::io(&path, e))?;
        Ok(report)
    })
}
