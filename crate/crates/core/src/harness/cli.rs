//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{parse_list, Algorithm, ExperimentConfig};
use super::output::{write_csv, write_outputs, Summary};
use super::runner::{Experiment, RunOptions};
use crate::error::{Error, Result};
use crate::gradcheck::{run_suite, DEFAULT_STEP, DEFAULT_TOLERANCE};
use crate::simclock::run_timeline;

#[derive(Debug, Parser)]
#[command(name = "hsgd", version, about = "Simulate system-aware biased local SGD on heterogeneous workers")]
struct Cli {
    /// Run only this seed instead of the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (CSV). Defaults to the config's output.path, else stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every seed of a config and write per-round metrics.
    Run { config: PathBuf },
    /// Final accuracy over a (τ_F, τ_S) × λ grid; infeasible cells are NA.
    SweepLambda {
        config: PathBuf,
        /// Comma-separated λ values.
        #[arg(long, required = true)]
        lambdas: String,
        /// Comma-separated `tau_f:tau_s` pairs. Defaults to the config's τ_F and derived τ_S.
        #[arg(long)]
        taus: Option<String>,
    },
    /// Per-worker compute and blocking time per round and over the budget.
    Timing {
        config: PathBuf,
        /// Compare all four algorithms under the same profile.
        #[arg(long)]
        all: bool,
    },
    /// Check a config (and its dataset) without training.
    Validate { config: PathBuf },
    /// Compare analytic gradients against central differences.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        step: f64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
}

/// Entry point of the `hsgd` binary. Returns the process exit status.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_main`] with explicit output streams.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                let line = serde_json::json!({ "error": "usage", "message": e.kind().to_string() });
                let _ = writeln!(err, "{line}");
            } else {
                let _ = write!(out, "{}", e.render());
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            let _ = writeln!(err, "{line}");
            1
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let config = ExperimentConfig::from_file(path)?;
    match cli.seed {
        Some(seed) => config.with_override("seeds", &seed.to_string()),
        None => Ok(config),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run { config } => cmd_run(cli, &load(cli, config)?, out, err),
        Command::SweepLambda { config, lambdas, taus } => {
            cmd_sweep(cli, &load(cli, config)?, lambdas, taus.as_deref(), out, err)
        }
        Command::Timing { config, all } => cmd_timing(cli, &load(cli, config)?, *all, out),
        Command::Validate { config } => cmd_validate(&load(cli, config)?, out),
        Command::Gradcheck { instances, step, tolerance } => {
            let report = run_suite(*instances, cli.seed.unwrap_or(0), *step, *tolerance)?;
            let line = serde_json::json!({
                "passed": report.passed(),
                "instances": report.instances.len(),
                "max_rel_err": report.max_rel_err(),
                "tolerance": report.tolerance,
                "checked": report.checked(),
                "excluded": report.excluded(),
            });
            writeln!(out, "{line}")?;
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn cmd_run(cli: &Cli, config: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let exp = Experiment::new(config.clone())?;
    let options = RunOptions::from_env()?;
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let run = exp.run_seed(seed, options)?;
        if !cli.quiet {
            let last = run.final_record();
            writeln!(
                err,
                "seed {seed}: {} rounds, val_acc {:.4}, train_loss {:.4}, sim_wall {:.1} s",
                run.records.len(),
                last.val_acc,
                last.train_loss,
                last.sim_wall_s
            )?;
        }
        runs.push(run);
    }
    let summary = Summary::new(&config.config_hash(), &config.algorithm.to_string(), &runs)?;
    match cli.out.as_ref().or(config.output.as_ref()) {
        Some(path) => {
            write_outputs(path, &runs, &summary)?;
            writeln!(out, "{}", summary.to_json())?;
        }
        None => {
            write_csv(&runs, &mut *out)?;
            if !cli.quiet {
                writeln!(err, "{}", summary.to_json())?;
            }
        }
    }
    Ok(0)
}

fn parse_taus(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(|pair| {
            let bad = || Error::Config(format!("bad tau pair `{pair}`, expected tau_f:tau_s"));
            let (f, s) = pair.trim().split_once(':').ok_or_else(bad)?;
            let f: usize = f.trim().parse().map_err(|_| bad())?;
            let s: usize = s.trim().parse().map_err(|_| bad())?;
            if s == 0 || f < s {
                return Err(bad());
            }
            Ok((f, s))
        })
        .collect()
}

fn cmd_sweep(
    cli: &Cli,
    config: &ExperimentConfig,
    lambdas: &str,
    taus: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let lambdas: Vec<f64> =
        parse_list(lambdas).ok_or_else(|| Error::Config(format!("bad --lambdas list `{lambdas}`")))?;
    let pairs = match taus {
        Some(t) => parse_taus(t)?,
        None => {
            let tau_s = crate::workers::derive_tau_s(config.profile.tau_f, config.profile.alpha)?;
            vec![(config.profile.tau_f, tau_s)]
        }
    };
    let options = RunOptions::from_env()?;
    let mut grid = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tau_f".to_string(), "tau_s".to_string()];
    header.extend(lambdas.iter().map(|l| format!("lambda={l}")));
    grid.write_record(&header)?;
    for &(tau_f, tau_s) in &pairs {
        let alpha = (tau_f as f64 / tau_s as f64).to_string();
        let base = config.edit(&[
            ("profile.tau_f", Some(&tau_f.to_string())),
            ("profile.alpha", Some(&alpha)),
            ("cost.slow_iter_s", None),
        ])?;
        let mut row = vec![tau_f.to_string(), tau_s.to_string()];
        for &lambda in &lambdas {
            let cell_config = base.with_override("profile.lambda", &lambda.to_string())?;
            let cell = match Experiment::new(cell_config.clone()) {
                Err(Error::InvalidLambda { .. }) => "NA".to_string(),
                Err(e) => return Err(e),
                Ok(exp) => {
                    let runs = exp.run(options)?;
                    let s = Summary::new(&cell_config.config_hash(), &cell_config.algorithm.to_string(), &runs)?;
                    s.mean_pm_spread()
                }
            };
            if !cli.quiet {
                writeln!(err, "tau ({tau_f},{tau_s}) lambda {lambda}: {cell}")?;
            }
            row.push(cell);
        }
        grid.write_record(&row)?;
    }
    let bytes = grid.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    emit(cli, &bytes, out)?;
    Ok(0)
}

fn emit(cli: &Cli, bytes: &[u8], out: &mut dyn Write) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => out.write_all(bytes)?,
    }
    Ok(())
}

fn cmd_timing(cli: &Cli, config: &ExperimentConfig, all: bool, out: &mut dyn Write) -> Result<i32> {
    let configs = if all {
        Algorithm::ALL
            .iter()
            .map(|a| config.for_algorithm(*a))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![config.clone()]
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "algorithm",
        "worker",
        "class",
        "tau",
        "iter_cost_s",
        "compute_s",
        "blocking_s",
        "round_wall_s",
        "rounds",
        "total_wall_s",
        "total_blocking_s",
    ])?;
    for c in configs {
        let exp = Experiment::new(c)?;
        let tl = run_timeline(exp.rounds, &exp.workers, exp.config.cost.agg_s)?;
        for (i, worker) in exp.workers.iter().enumerate() {
            w.write_record([
                exp.config.algorithm.to_string(),
                worker.id.to_string(),
                worker.class.to_string(),
                worker.tau.to_string(),
                worker.iter_cost.to_string(),
                exp.timing.compute[i].to_string(),
                exp.timing.blocking[i].to_string(),
                exp.timing.round_wall.to_string(),
                exp.rounds.to_string(),
                tl.total_wall.to_string(),
                tl.total_blocking[i].to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    emit(cli, &bytes, out)?;
    Ok(0)
}

fn cmd_validate(config: &ExperimentConfig, out: &mut dyn Write) -> Result<i32> {
    let exp = Experiment::new(config.clone())?;
    let line = serde_json::json!({
        "ok": true,
        "config_hash": config.config_hash(),
        "algorithm": config.algorithm.to_string(),
        "samples": exp.dataset.len(),
        "train_samples": exp.n_train,
        "model": exp.model.kind.to_string(),
        "params": exp.model.param_count(),
        "taus": exp.taus(),
        "rounds": exp.rounds,
        "rounds_per_epoch": exp.rounds_per_epoch,
    });
    writeln!(out, "{line}")?;
    Ok(0)
}
