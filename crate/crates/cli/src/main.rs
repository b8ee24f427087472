#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rglm_cli::config::{load_experiment, load_sweep, ExperimentConfig, SweepConfig};
use rglm_cli::experiment::{generate, run_experiment, run_sweep, SweepCell};
use rglm_cli::presets;
use rglm_cli::report::probe_report;

#[derive(Parser)]
#[command(name = "rglm", version, about = "Low-rank GLM recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the simulated datasets and true matrices.
    Gen(Common),
    /// Run the configured solver on every seed.
    Solve(Common),
    /// Report probed curvature constants and the implied schedule.
    Probe(Common),
    /// One-bit Gaussian sensing, constrained vs unconstrained.
    ReproOnebitSensing(Preset),
    /// One-bit matrix completion with factor row clipping vs unconstrained.
    ReproOnebitMc(Preset),
    /// Repeat a base config over constraints and init scales.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct Preset {
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct RunFlags {
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run this seed only.
    #[arg(long)]
    seed: Option<u64>,
    /// Seeds solved concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl RunFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) -> anyhow::Result<PathBuf> {
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        Ok(cfg.output_dir()?.to_path_buf())
    }
}

fn print_cells(cells: &[SweepCell], dir: &Path) {
    println!("{:<20} {:>8} {:>16} {:>16}", "label", "gamma", "median_final", "median_best");
    for c in cells {
        println!(
            "{:<20} {:>8} {:>16.6} {:>16.6}",
            c.label,
            c.init_gamma,
            c.median_final_rel_dist(),
            c.median_best_rel_dist()
        );
    }
    println!("wrote {}", dir.join("sweep_summary.csv").display());
}

fn sweep(mut sweep: SweepConfig, flags: &RunFlags) -> anyhow::Result<()> {
    let dir = flags.apply(&mut sweep.base)?;
    let cells = run_sweep(&sweep, &dir, flags.jobs)?;
    warn_diverged(cells.iter().flat_map(|c| &c.outcomes).filter(|o| o.diverged).map(|o| o.seed));
    print_cells(&cells, &dir);
    Ok(())
}

fn warn_diverged(seeds: impl Iterator<Item = u64>) {
    for seed in seeds {
        eprintln!("warning: seed {seed} diverged; its trace stops at the failing iteration");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(c) => {
            let mut cfg = load_experiment(&c.config)?;
            let dir = c.run.apply(&mut cfg)?;
            generate(&cfg, &dir, c.run.jobs)?;
            println!("wrote {} dataset(s) to {}", cfg.seeds.len(), dir.display());
        }
        Command::Solve(c) => {
            let mut cfg = load_experiment(&c.config)?;
            let dir = c.run.apply(&mut cfg)?;
            let outcomes = run_experiment(&cfg, &dir, c.run.jobs)?;
            warn_diverged(outcomes.iter().filter(|o| o.diverged).map(|o| o.seed));
            for o in &outcomes {
                println!("{}", o.summary_row());
            }
        }
        Command::Probe(c) => {
            let mut cfg = load_experiment(&c.config)?;
            let dir = c.run.apply(&mut cfg)?;
            for r in probe_report(&cfg, &dir, c.run.jobs)? {
                print!("{}", r.to_key_value());
            }
        }
        Command::Sweep(c) => {
            let s = load_sweep(&c.config)?;
            sweep(s, &c.run)?;
        }
        Command::ReproOnebitSensing(p) => sweep(presets::onebit_sensing(), &p.run)?,
        Command::ReproOnebitMc(p) => sweep(presets::onebit_mc(), &p.run)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
