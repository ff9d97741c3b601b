//! Command-line front end: training runs, evaluations and sweeps driven by
//! a TOML configuration.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Axis;
pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mgrl", version, about = "Battery dispatch learning experiments")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed of the learners.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated methods, e.g. og,50-50,rl.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Checkpoint file, or directory of `checkpoint-<method>.json` files.
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    /// Sweep grid points run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the selected learned methods.
    Train,
    /// Evaluate the selected methods on the held-out year.
    Evaluate,
    /// Evaluate the rule-based methods only.
    Baseline,
    /// Train and evaluate across one configuration axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Load checkpoints from --checkpoint (or --out) instead of
        /// retraining at every grid point.
        #[arg(long)]
        reuse_checkpoints: bool,
    },
    /// Write the synthetic dataset as CSV files.
    SynthData,
    /// Re-render the tables of a finished evaluation.
    Report,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err(CliError::user("--jobs must be at least 1"));
    }
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        methods: cli.methods.clone(),
    };
    let cfg = ExperimentConfig::resolve(cli.config.as_deref(), &overrides)?;
    let out = cfg.out.display().to_string();
    match &cli.command {
        Command::Train => {
            for (m, t) in commands::cmd_train(&cfg)? {
                let last = t.episodes.last().map_or(f64::NAN, |e| e.economic_return);
                println!("{m}: {} episodes, last economic return {last:.2}", t.episodes.len());
            }
        }
        Command::Evaluate => print_report(&commands::cmd_evaluate(&cfg, cli.checkpoint.as_deref())?),
        Command::Baseline => print_report(&commands::cmd_baseline(&cfg)?),
        Command::Sweep { axis, reuse_checkpoints } => {
            let reuse = reuse_checkpoints.then(|| cli.checkpoint.clone().unwrap_or_else(|| cfg.out.clone()));
            let rows = commands::cmd_sweep(&cfg, *axis, cli.jobs, reuse.as_deref())?;
            for r in rows {
                println!("{}={} {}: {:.2}", axis.name(), r.value, r.method, r.r_total);
            }
        }
        Command::SynthData => {
            let d = commands::cmd_synth_data(&cfg)?;
            println!("{} rows, {} profiles", d.bundle.len(), d.bundle.n_profiles());
        }
        Command::Report => print_report(&commands::cmd_report(&cfg)?),
    }
    println!("results in {out}");
    Ok(())
}

fn print_report(report: &mgrl_core::metrics::EvaluationReport) {
    for m in &report.methods {
        println!("{:>14}  R_T = {:.2}", m.method, m.series.final_total());
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
