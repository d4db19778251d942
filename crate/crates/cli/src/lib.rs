//! Command-line workflows for coupled block-term hyperspectral fusion:
//! simulation, fusion, evaluation, Monte Carlo benchmarks and synthetic
//! data generation. Images are exchanged as [`tensor_file`]s.

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;
pub mod tensor_file;

use serde::Serialize;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

fn to_json<S: Serialize>(value: &S) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("cannot serialize summary: {e}")))
}

/// Runs one subcommand and returns its JSON summary.
pub fn run(command: &Command) -> CliResult<String> {
    match command {
        Command::Simulate(a) => to_json(&commands::cmd_simulate(a)?),
        Command::Fuse(a) => to_json(&commands::cmd_fuse(a)?),
        Command::Evaluate(a) => to_json(&commands::cmd_evaluate(a)?),
        Command::Bench(a) => to_json(&bench::cmd_bench(&a.config)?),
        Command::Generate(a) => to_json(&commands::cmd_generate(a)?),
    }
}
