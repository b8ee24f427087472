//! Per-seed instance construction, solver runs and the CSV outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rglm::io::{fmt_f64, write_dataset, write_trace_csv};
use rglm::measure::{
    gen_bernoulli_mask_dataset, gen_entrywise_ops, gen_gaussian_ops, gen_ground_truth,
    gen_pairwise_ops, simulate_dataset,
};
use rglm::probe::empirical_rsc_rsm;
use rglm::project::factor_row_bounds;
use rglm::solve::{avpg, default_schedule, pg};
use rglm::{
    AvpgConfig, ConstraintSpec, Dataset, DenseMatrix, GlmFamily, GroundTruth, PgConfig,
    RscRsmEstimate, SolveTrace,
};

use crate::config::{ConstraintChoice, Experiment, ExperimentConfig, SolverConfig, SweepConfig, TruthConstraint};
use crate::error::{CliError, Result};

pub const SUMMARY_HEADER: &str = "seed,final_rel_dist,best_rel_dist,best_objective,iters";
pub const SWEEP_HEADER: &str =
    "label,init_gamma,seeds,median_final_rel_dist,median_best_rel_dist,median_best_objective";

/// Truth, data and the unscaled start direction drawn for one seed.
#[derive(Clone, Debug)]
pub struct Instance {
    pub truth: GroundTruth,
    pub dataset: Dataset,
    /// `X_{-1}`; the solver starts from `init_gamma * X_{-1}`.
    pub init_direction: DenseMatrix,
}

/// Generator for the truth, the data and the start point, in that order.
pub fn data_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for the curvature probe, so probing never shifts the data.
pub fn probe_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn family(cfg: &ExperimentConfig) -> Result<GlmFamily> {
    if cfg.experiment.is_logistic() {
        Ok(GlmFamily::logistic())
    } else {
        Ok(GlmFamily::quadratic(cfg.sigma * cfg.sigma)?)
    }
}

pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let mut rng = data_rng(seed);
    let (d1, d2) = (cfg.d1, cfg.d2);
    let mut truth = gen_ground_truth(d1, d2, cfg.true_rank, cfg.truth_style(), &mut rng)?;
    if cfg.experiment == Experiment::RankAggregation {
        // Pairwise data only identify the matrix up to row offsets.
        let mut x = truth.x.clone();
        x.center_rows();
        let x = match cfg.truth_inf_scale {
            Some(c) => x.scaled(1.0 / (c * x.inf_norm())),
            None => x.scaled(1.0 / x.fro_norm()),
        };
        truth = GroundTruth::from_matrix(x)?;
    }
    let fam = family(cfg)?;
    let n = cfg.n.unwrap_or(0);
    let dataset = match cfg.experiment {
        Experiment::OneBitSensing | Experiment::MatrixSensing => {
            simulate_dataset(&truth.x, gen_gaussian_ops(d1, d2, n, &mut rng)?, fam, &mut rng)?
        }
        Experiment::MatrixCompletion => {
            simulate_dataset(&truth.x, gen_entrywise_ops(d1, d2, n, &mut rng)?, fam, &mut rng)?
        }
        Experiment::RankAggregation => {
            simulate_dataset(&truth.x, gen_pairwise_ops(d1, d2, n, &mut rng)?, fam, &mut rng)?
        }
        Experiment::OneBitCompletion => {
            let p = cfg.mask_p.expect("validated");
            gen_bernoulli_mask_dataset(&truth.x, p, fam, &mut rng)?
        }
    };
    let init_direction = gen_ground_truth(d1, d2, cfg.solver.rank(), cfg.init_style(), &mut rng)?.x;
    Ok(Instance {
        truth,
        dataset,
        init_direction,
    })
}

pub fn resolve_constraint(choice: &ConstraintChoice, truth: &GroundTruth) -> Result<ConstraintSpec> {
    Ok(match choice {
        ConstraintChoice::Fixed(spec) => spec.clone(),
        ConstraintChoice::FromTruth(TruthConstraint::FactorRowClipFromTruth { slack }) => {
            let (a_u, a_v) = factor_row_bounds(&truth.x, truth.rank)?;
            ConstraintSpec::FactorRowClip {
                a_u: slack * a_u,
                a_v: slack * a_v,
            }
        }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResolvedSolver {
    Avpg(AvpgConfig),
    Pg(PgConfig),
}

/// Fill in probed defaults. The probe runs only when a parameter is missing.
pub fn resolve_solver(
    cfg: &ExperimentConfig,
    inst: &Instance,
    spec: &ConstraintSpec,
    seed: u64,
) -> Result<ResolvedSolver> {
    let mut cached: Option<RscRsmEstimate> = None;
    let mut probe = || -> Result<RscRsmEstimate> {
        if let Some(est) = &cached {
            return Ok(est.clone());
        }
        let est = empirical_rsc_rsm(
            &inst.dataset,
            spec,
            cfg.solver.rank(),
            cfg.probe_trials,
            &mut probe_rng(seed),
        )?;
        if !(est.beta_hat > 0.0) {
            return Err(CliError::Config(format!(
                "probed beta_hat = {} is not positive; set the step explicitly",
                est.beta_hat
            )));
        }
        cached = Some(est.clone());
        Ok(est)
    };
    Ok(match cfg.solver {
        SolverConfig::Pg { r, max_iter, step, grad_tol } => {
            let step = match step {
                Some(s) => s,
                None => 1.0 / (2.0 * probe()?.beta_hat),
            };
            ResolvedSolver::Pg(PgConfig { r, step, max_iter, grad_tol })
        }
        SolverConfig::Avpg { r, max_iter, beta, kappa, eta0, t0, grad_tol } => {
            let beta = match beta {
                Some(b) => b,
                None => probe()?.beta_hat,
            };
            let (eta0, t0) = match (eta0, t0) {
                (Some(e), Some(t)) => (e, t),
                _ => {
                    let k = match kappa {
                        Some(k) => k,
                        None => probe()?.kappa().max(1.0),
                    };
                    let s = default_schedule(k)?;
                    (eta0.unwrap_or(s.eta0), t0.unwrap_or(s.t0))
                }
            };
            ResolvedSolver::Avpg(AvpgConfig { r, eta0, beta, t0, max_iter, grad_tol })
        }
    })
}

/// Result of one seed. `diverged` runs keep the trace up to the failure.
#[derive(Clone, Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub trace: SolveTrace,
    pub diverged: bool,
}

impl SeedOutcome {
    pub fn final_rel_dist(&self) -> f64 {
        self.trace.last().rel_dist.unwrap_or(f64::NAN)
    }

    pub fn best_rel_dist(&self) -> f64 {
        self.trace.best().rel_dist.unwrap_or(f64::NAN)
    }

    pub fn best_objective(&self) -> f64 {
        self.trace.best().objective
    }

    /// Steps taken after the start point.
    pub fn iters(&self) -> usize {
        self.trace.records.len() - 1
    }

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.seed,
            fmt_f64(self.final_rel_dist()),
            fmt_f64(self.best_rel_dist()),
            fmt_f64(self.best_objective()),
            self.iters()
        )
    }
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let inst = build_instance(cfg, seed)?;
    let spec = resolve_constraint(&cfg.constraint, &inst.truth)?;
    let solver = resolve_solver(cfg, &inst, &spec, seed)?;
    let x0 = inst.init_direction.scaled(cfg.init_gamma);
    let result = match &solver {
        ResolvedSolver::Avpg(c) => avpg(&inst.dataset, &spec, c, &x0, Some(&inst.truth)),
        ResolvedSolver::Pg(c) => pg(&inst.dataset, &spec, c, &x0, Some(&inst.truth)),
    };
    match result {
        Ok(out) => Ok(SeedOutcome {
            seed,
            trace: out.trace,
            diverged: false,
        }),
        Err(rglm::Error::Divergence { trace, .. }) => Ok(SeedOutcome {
            seed,
            trace: *trace,
            diverged: true,
        }),
        Err(e) => Err(e.into()),
    }
}

/// Run `f` over `seeds` on at most `jobs` threads, keeping the seed order.
pub fn par_seeds<T: Send>(
    seeds: &[u64],
    jobs: usize,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

/// Solve every seed, writing `trace_seed<k>.csv` and `summary.csv` into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<Vec<SeedOutcome>> {
    cfg.validate()?;
    create_dir(dir)?;
    let outcomes = par_seeds(&cfg.seeds, jobs, |seed| {
        let outcome = run_seed(cfg, seed)?;
        let path = trace_path(dir, seed);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_trace_csv(&outcome.trace, &mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(outcome)
    })?;
    write_file(&dir.join("summary.csv"), |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for o in &outcomes {
            writeln!(w, "{}", o.summary_row())?;
        }
        Ok(())
    })?;
    Ok(outcomes)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub label: String,
    pub init_gamma: f64,
    pub outcomes: Vec<SeedOutcome>,
}

impl SweepCell {
    pub fn median_final_rel_dist(&self) -> f64 {
        median(&self.outcomes.iter().map(SeedOutcome::final_rel_dist).collect::<Vec<_>>())
    }

    pub fn median_best_rel_dist(&self) -> f64 {
        median(&self.outcomes.iter().map(SeedOutcome::best_rel_dist).collect::<Vec<_>>())
    }

    pub fn median_best_objective(&self) -> f64 {
        median(&self.outcomes.iter().map(SeedOutcome::best_objective).collect::<Vec<_>>())
    }
}

/// Every (constraint, init_gamma) pair into `<dir>/<label>/gamma_<g>/`, plus
/// `<dir>/sweep_summary.csv` with per-cell medians.
pub fn run_sweep(sweep: &SweepConfig, dir: &Path, jobs: usize) -> Result<Vec<SweepCell>> {
    sweep.validate()?;
    let mut cells = Vec::new();
    for (label, cfg) in sweep.combinations() {
        let sub = dir.join(&label).join(format!("gamma_{}", cfg.init_gamma));
        let outcomes = run_experiment(&cfg, &sub, jobs)?;
        cells.push(SweepCell {
            label,
            init_gamma: cfg.init_gamma,
            outcomes,
        });
    }
    write_file(&dir.join("sweep_summary.csv"), |w| {
        writeln!(w, "{SWEEP_HEADER}")?;
        for c in &cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.label,
                c.init_gamma,
                c.outcomes.len(),
                fmt_f64(c.median_final_rel_dist()),
                fmt_f64(c.median_best_rel_dist()),
                fmt_f64(c.median_best_objective())
            )?;
        }
        Ok(())
    })?;
    Ok(cells)
}

fn write_matrix_csv<W: Write>(m: &DenseMatrix, w: &mut W) -> std::io::Result<()> {
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Write `dataset_seed<k>.txt` and `truth_seed<k>.csv` for every seed.
pub fn generate(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<()> {
    cfg.validate()?;
    create_dir(dir)?;
    par_seeds(&cfg.seeds, jobs, |seed| {
        let inst = build_instance(cfg, seed)?;
        let path = dir.join(format!("dataset_seed{seed}.txt"));
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write_dataset(&inst.dataset, &mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))?;
        write_file(&dir.join(format!("truth_seed{seed}.csv")), |w| write_matrix_csv(&inst.truth.x, w))
    })?;
    Ok(())
}
