//! `peano`: command-line front end.
//!
//! Exit status: 0 success, 1 the computed answer is negative, 2 usage
//! error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(status) => ExitCode::from(status as u8),
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.status as u8)
        }
    }
}
