//! `coopnet` command-line driver.
//!
//! Worker threads come from `COOPNET_WORKERS` (default: one per core).

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::{env, fs};

use clap::{Args, Parser, Subcommand};
use coopnet::campaign::Strategy;
use coopnet::cli::{self, RunSpec, PRESETS};
use coopnet::optimizer::oracle::oracle_check;
use coopnet::protocol::Mode;
use coopnet::{Error, Result};

const WORKERS_ENV: &str = "COOPNET_WORKERS";
/// Oracle acceptance bound, dB.
const ORACLE_TOLERANCE_DB: f64 = 0.3;

#[derive(Parser)]
#[command(name = "coopnet", version, about = "Relay and RIS subnetwork power-allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign from a configuration file or preset.
    Run(RunArgs),
    /// Run the `[sweep]` of a configuration file or a sweep preset.
    Sweep(RunArgs),
    /// Run a named preset; without a name, list them.
    Preset {
        name: Option<String>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Compare the optimizer with exhaustive grid search on tiny instances.
    OracleCheck {
        /// Instances per mode.
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        mode: Option<Mode>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Required with `--config`; filters preset campaigns otherwise.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the seed of the configuration or preset.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn init_workers() -> Result<()> {
    let Ok(raw) = env::var(WORKERS_ENV) else { return Ok(()) };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w >= 1)
        .ok_or_else(|| Error::OutOfRange { key: WORKERS_ENV.into(), reason: format!("`{raw}` is not a positive integer") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn build_spec(args: &RunArgs, preset: Option<&str>, want_sweep: bool) -> Result<RunSpec> {
    let preset = preset.or(args.preset.as_deref());
    let mut spec = match (&args.config, preset) {
        (Some(_), Some(_)) => return Err(Error::Config("use either --config or --preset, not both".into())),
        (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let (config, sweep) = cli::parse_document(&text)?;
            let mode = args.mode.ok_or_else(|| Error::Config("--mode is required with --config".into()))?;
            let mut spec = RunSpec::single(config, Strategy::new(mode), cli::PRESET_TRIALS);
            spec.sweep = sweep;
            spec
        }
        (None, Some(name)) => {
            let spec = cli::preset(name)?;
            match args.mode {
                Some(mode) => spec.restricted_to(mode)?,
                None => spec,
            }
        }
    };
    if want_sweep && spec.sweep.is_none() {
        return Err(Error::Config("no sweep defined; add a [sweep] table with `param` and `values`".into()));
    }
    if !want_sweep && preset.is_none() {
        spec.sweep = None;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }
    spec.validate()?;
    Ok(spec)
}

/// Prints one item per line; a closed pipe (`| head`) just ends the listing.
fn print_lines(lines: impl IntoIterator<Item = impl std::fmt::Display>) {
    let mut stdout = io::stdout().lock();
    for line in lines {
        if writeln!(stdout, "{line}").is_err() {
            return;
        }
    }
}

fn execute(spec: &RunSpec, out: &Path) -> Result<()> {
    let campaigns = spec.items.len() * spec.sweep.as_ref().map_or(1, |s| s.values.len());
    eprintln!("{}: {campaigns} campaign(s) of {} trials", spec.name, spec.trials);
    let paths = cli::run(spec, out)?;
    print_lines(paths.iter().map(|p| p.display().to_string()));
    Ok(())
}

fn oracle(trials: usize, seed: u64, mode: Option<Mode>) -> Result<bool> {
    let modes = mode.map_or(Mode::ALL.to_vec(), |m| vec![m]);
    let mut ok = true;
    for report in oracle_check(&modes, trials, seed) {
        let infeasible = report.cases.iter().filter(|c| !c.solver_feasible).count();
        let pass = report.max_abs_deviation_db <= ORACLE_TOLERANCE_DB && infeasible == 0;
        ok &= pass;
        println!(
            "{:<10} instances={} max_dev_db={:.4} infeasible={} {}",
            report.mode.as_str(),
            report.cases.len(),
            report.max_abs_deviation_db,
            infeasible,
            if pass { "ok" } else { "FAIL" }
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|()| match cli.command {
        Command::Run(args) => build_spec(&args, None, false).and_then(|s| execute(&s, &args.out)).map(|()| true),
        Command::Sweep(args) => build_spec(&args, None, true).and_then(|s| execute(&s, &args.out)).map(|()| true),
        Command::Preset { name: None, args } if args.preset.is_none() => {
            print_lines(PRESETS);
            Ok(true)
        }
        Command::Preset { name, args } => {
            build_spec(&args, name.as_deref(), false).and_then(|s| execute(&s, &args.out)).map(|()| true)
        }
        Command::OracleCheck { trials, seed, mode } => oracle(trials, seed, mode),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
