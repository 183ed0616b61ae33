use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ScenarioConfig, BUNDLED};
use crate::error::{Error, Result};
use crate::metrics::MetricsOptions;
use crate::runner::simulate;
use crate::sweep::{run_sweep, write_comparison_csv, SweepSpec};

pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Parser)]
#[command(name = "abrsim", version, about = "Multi-client adaptive bitrate streaming simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write sessions.csv, metrics.csv and summary.txt.
    Run(RunArgs),
    /// Run a grid derived from a base scenario and write comparison.csv.
    Sweep(RunArgs),
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH", required_unless_present = "scenario", conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Bundled scenario name instead of a file.
    #[arg(long, value_name = "NAME")]
    pub scenario: Option<String>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (default: the config's output_dir, else out/<name>).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Parallel sweep cells; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub jobs: usize,
    /// Use the offset-free inefficiency and the k - d instability weight.
    #[arg(long)]
    pub strict_formulas: bool,
    /// Grid spec, e.g. "clients=2..15;capacity=10000;policies=tfdash,aimd;seeds=0..9".
    #[arg(long, value_name = "SPEC", default_value = "")]
    pub sweep: String,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParse { .. } | Error::TraceParse { .. } | Error::SweepSpec(_) => 2,
        Error::Validation { .. } | Error::NotInLadder(_) => 3,
        Error::Horizon(_) => 4,
        _ => 1,
    }
}

fn load(args: &RunArgs) -> Result<(ScenarioConfig, PathBuf)> {
    let (mut cfg, base_dir) = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let dir = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
            (ScenarioConfig::load(path)?, dir)
        }
        (None, Some(name)) => {
            let cfg = ScenarioConfig::bundled(name).ok_or_else(|| Error::ConfigParse {
                path: PathBuf::from(name),
                reason: format!(
                    "no bundled scenario named {name:?} (known: {})",
                    BUNDLED.map(|(n, _)| n).join(", ")
                ),
            })??;
            (cfg, PathBuf::from("."))
        }
        (None, None) => {
            return Err(Error::validation("config", "pass --config or --scenario"));
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.strict_formulas {
        cfg.strict_formulas = true;
    }
    Ok((cfg, base_dir))
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn out_dir(args: &RunArgs, cfg: &ScenarioConfig) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("out").join(cfg.display_name()))
}

fn run(args: &RunArgs) -> Result<()> {
    let (cfg, base_dir) = load(args)?;
    let spec = SweepSpec::parse(&args.sweep)?;
    let options = MetricsOptions {
        strict_formulas: cfg.strict_formulas,
        ..MetricsOptions::default()
    };
    let dir = out_dir(args, &cfg);
    if spec.is_empty() {
        let scenario = cfg.to_scenario(&base_dir)?;
        let output = simulate(cfg.display_name(), &scenario, options)?;
        output.write_to(&dir)?;
        emit(&output.table());
        emit(&format!("wrote {}\n", dir.display()));
        return Ok(());
    }
    let rows = run_sweep(&cfg, &base_dir, &spec, options, args.jobs)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(COMPARISON_FILE);
    let mut buf = Vec::new();
    write_comparison_csv(&rows, &mut buf).expect("writing to memory cannot fail");
    fs::write(&path, &buf).map_err(|e| Error::io(&path, e))?;
    emit(&String::from_utf8_lossy(&buf));
    emit(&format!("wrote {}\n", path.display()));
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(args) | Command::Sweep(args) => run(args),
        Command::Scenarios => {
            for (name, _) in BUNDLED {
                emit(&format!("{name}\n"));
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
