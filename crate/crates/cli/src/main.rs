//! `heron`: construct family curves, certify torsion, bound ranks, and run
//! sieve scans over parameter ranges.

mod commands;
mod config;
mod render;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::config::{Cli, RunConfig, OUT_DIR_ENV};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors.
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut err = io::stderr();
    let result = RunConfig::from_cli(cli, out_dir.as_deref())
        .and_then(|cfg| commands::run(&cfg, &mut out, &mut err));
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heron: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
