//! Command-line driver: argument parsing, config merging and the commands.
//!
//! Exit codes: 0 on success, 2 for invalid flags or settings, 1 for
//! failures while running.

pub mod args;
mod commands;
mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use clap::Parser;
use serde::de::DeserializeOwned;

use args::{Cli, Command, SEED_ENV};
use commands::RunContext;
pub use manifest::MANIFEST;

pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code; errors are printed to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            f.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(Failure::Usage(anyhow!("--jobs must be at least 1")));
    }
    let file = match &cli.config {
        Some(path) => Some(read_config(path).map_err(Failure::Usage)?),
        None => None,
    };
    let name = cli.command.name();
    let section = file.as_ref().and_then(|v| v.get(name)).cloned();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    let force = cli.force;
    pool.install(|| match cli.command {
        Command::Simulate(a) => {
            let mut s = settings(section)?;
            a.apply(&mut s);
            commands::simulate(&s, &context(s.seed, jobs, force)?)
        }
        Command::Stats(a) => {
            let mut s = settings(section)?;
            a.apply(&mut s);
            commands::stats(&s, &context(s.seed, jobs, force)?)
        }
        Command::Exchangeability(a) => {
            let mut s = settings(section)?;
            a.apply(&mut s);
            commands::exchangeability(&s, &context(s.seed, jobs, force)?)
        }
        Command::Cluster(a) => {
            let mut s = settings(section)?;
            a.apply(&mut s);
            commands::cluster(&s, &context(s.seed, jobs, force)?)
        }
        Command::Evaluate(a) => {
            let mut s = settings(section)?;
            a.apply(&mut s);
            commands::evaluate(&s, &context(s.seed, jobs, force)?)
        }
    })
}

fn read_config(path: &Path) -> anyhow::Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    if !value.is_object() {
        return Err(anyhow!("config {} must be a JSON object", path.display()));
    }
    Ok(value)
}

fn settings<T: DeserializeOwned + Default>(section: Option<serde_json::Value>) -> Result<T, Failure> {
    match section {
        Some(v) => serde_json::from_value(v).map_err(|e| Failure::Usage(anyhow!("config: {e}"))),
        None => Ok(T::default()),
    }
}

fn context(seed: Option<u64>, jobs: usize, force: bool) -> Result<RunContext, Failure> {
    let seed = match seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Failure::Usage(anyhow!("{SEED_ENV}={v} is not an unsigned integer")))?,
            Err(_) => 0,
        },
    };
    Ok(RunContext { seed, jobs, force })
}
