//! Subcommand drivers. Each writes its files into the output directory and returns a summary.

mod calibrate;
mod check;
mod simulate;

pub use check::FAMILIES;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::Emitter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Calibrate,
    Check,
    Stability,
    Sweep,
    Synth,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<String> {
    let mut out = Emitter::new(cfg.out_dir());
    match cmd {
        Command::Simulate => simulate::run(cfg, &mut out),
        Command::Calibrate => calibrate::calibrate(cfg, &mut out),
        Command::Check => check::run(cfg, &mut out),
        Command::Stability => calibrate::stability(cfg, &mut out),
        Command::Sweep => calibrate::sweep(cfg, &mut out),
        Command::Synth => calibrate::synth(cfg, &mut out),
    }
}
