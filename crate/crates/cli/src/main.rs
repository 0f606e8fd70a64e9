use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use mchjm_cli::{run, CliError, Command, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Monte Carlo HJM paths, realization states and martingale tests.
    Simulate,
    /// Two-stage Hull–White calibration of a dataset.
    Calibrate,
    /// Lie-algebra spans, tangency and commutation checks.
    Check,
    /// Rolling-window parameter statistics.
    Stability,
    /// Fit quality against window length.
    Sweep,
    /// Synthetic dataset from the three-curve realization.
    Synth,
}

#[derive(Debug, Parser)]
#[command(name = "mchjm", version, about = "Multi-curve HJM realizations, consistency checks and calibration")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed (default 20211119).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Market dataset CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Configuration override `KEY=VALUE`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn overrides(args: &Args) -> Result<Vec<(String, String)>, CliError> {
    let mut o = Vec::new();
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
        o.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = args.seed {
        o.push(("seed".into(), s.to_string()));
    }
    if let Some(p) = &args.out {
        o.push(("out".into(), p.display().to_string()));
    }
    if let Some(p) = &args.dataset {
        o.push(("dataset".into(), p.display().to_string()));
    }
    Ok(o)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Calibrate => Command::Calibrate,
        Cmd::Check => Command::Check,
        Cmd::Stability => Command::Stability,
        Cmd::Sweep => Command::Sweep,
        Cmd::Synth => Command::Synth,
    };
    let result = overrides(&args)
        .and_then(|o| RunConfig::load(args.config.as_deref(), &o))
        .and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mchjm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
