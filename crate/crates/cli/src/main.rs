#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod config;
mod error;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRAJ_LOG", "warn")).init();
    let cli = args::Cli::parse();
    match run::dispatch(cli.command) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
