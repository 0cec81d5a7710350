//! `fhecnn`: key generation, encryption, encrypted classification and checks.

mod args;
mod commands;
mod convert;
mod files;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use fhecnn::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_SHAPE: u8 = 4;
const EXIT_NOISE: u8 = 5;
const EXIT_VERIFY: u8 = 6;
const EXIT_FORMAT: u8 = 7;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Params(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
        Error::Shape(_) | Error::WidthMismatch { .. } | Error::Range { .. } => EXIT_SHAPE,
        Error::NoiseExhausted { .. } => EXIT_NOISE,
        Error::Format(_) => EXIT_FORMAT,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(outcome) => {
            let _ = std::io::stdout().write_all(outcome.text.as_bytes());
            if outcome.failed {
                ExitCode::from(EXIT_VERIFY)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
