use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fastplr::harness::{self, ExperimentConfig, Init, Method, TruthModel};
use fastplr::io::{self, ModelFile};
use fastplr::srdf::{SrdfSnapshot, SrdfState};
use fastplr::Error;

/// Adaptive identification of innovations models with a fast square-root filter.
#[derive(Parser)]
#[command(name = "fastplr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured system and write the measurements as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true model as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run an estimator over a measurement file and report its accuracy.
    Identify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// True model JSON; regenerated from the config when omitted.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        init: Option<String>,
        /// Report destination; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Final filter state (square-root methods only).
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the square-root and the dense filter side by side.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-step timings of both filters over a range of orders.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimated impulse response from a saved filter state.
    Impulse {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 50)]
        lags: usize,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> fastplr::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> fastplr::Result<()> {
    match cli.command {
        Command::Simulate { config, out, truth } => {
            let cfg = ExperimentConfig::read(&config)?;
            let (model, series) = harness::synthesize(&cfg)?;
            io::write_series_file(&series, &out)?;
            if let Some(path) = truth {
                model.to_file().write(&path)?;
            }
            eprintln!("wrote {} samples to {}", series.len(), out.display());
        }
        Command::Identify { config, input, truth, method, init, report, snapshot } => {
            let mut cfg = ExperimentConfig::read(&config)?;
            if let Some(m) = method {
                cfg.method = m.parse::<Method>()?;
            }
            if let Some(i) = init {
                cfg.init = i.parse::<Init>()?;
            }
            let series = io::read_series_file(&input)?;
            cfg.t = series.len();
            let model = match truth {
                Some(path) => TruthModel::from_file(&ModelFile::read(&path)?)?,
                None => harness::build_truth(&cfg)?,
            };
            let (metrics, state) = harness::run_with_snapshot(&cfg, &model, &series)?;
            match report {
                Some(path) => std::fs::write(path, metrics.to_json()?)?,
                None => println!("{}", metrics.to_json()?),
            }
            if let Some(path) = snapshot {
                let state = state.ok_or_else(|| {
                    Error::Validation(format!("method {} has no square-root state to save", cfg.method))
                })?;
                std::fs::write(path, state.to_json()?)?;
            }
        }
        Command::Compare { config } => {
            let cfg = ExperimentConfig::read(&config)?;
            print_json(&harness::compare_fast_slow(&cfg)?)?;
        }
        Command::Bench { sizes, steps, seed } => {
            print_json(&harness::bench_scaling(&sizes, steps, seed)?)?;
        }
        Command::Impulse { state, lags } => {
            let snap = SrdfSnapshot::from_json(&std::fs::read_to_string(state)?)?;
            print_json(&SrdfState::from_snapshot(&snap)?.estimated_impulse_response(lags))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
