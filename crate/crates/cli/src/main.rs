//! `span`: generate graphs, optimise spectral augmentation schemes, sample
//! views, analyse spectra, train and probe contrastive encoders, and run the
//! numerical oracles.
//!
//! Every run writes its artifacts plus a `manifest.json` into `--out-dir`.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable inputs (exit 2).
    Usage(String),
    /// An oracle check failed (exit 1).
    Verification(String),
    /// A numerical routine failed (exit 3).
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<span_core::Error> for CliError {
    fn from(e: span_core::Error) -> Self {
        use span_core::Error as E;
        match e {
            E::Numerical(_) | E::NotSymmetric(_) | E::Disconnected => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn configure_threads() {
    if let Some(n) = std::env::var("SPAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not cap worker threads: {e}");
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("span: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    std::fs::create_dir_all(&cli.global.out_dir)?;
    let mut run = manifest::Run::new(cli);
    match &cli.command {
        Command::Gen(a) => commands::gen(&cli.global, a, &mut run),
        Command::Scheme(a) => commands::scheme(&cli.global, a, &mut run),
        Command::Sample(a) => commands::sample(&cli.global, a, &mut run),
        Command::Spectrum(a) => commands::spectrum(&cli.global, a, &mut run),
        Command::Casestudy(a) => commands::casestudy(&cli.global, a, &mut run),
        Command::Preanalysis(a) => commands::preanalysis(&cli.global, a, &mut run),
        Command::Train(a) => commands::train(&cli.global, a, &mut run),
        Command::Probe(a) => commands::probe(&cli.global, a, &mut run),
        Command::Verify(a) => commands::verify(&cli.global, a, &mut run),
    }
    .and_then(|_| run.write(&cli.global.out_dir))
    .or_else(|e| {
        // the manifest still records what was attempted
        if matches!(e, CliError::Verification(_)) {
            run.write(&cli.global.out_dir)?;
        }
        Err(e)
    })
}
