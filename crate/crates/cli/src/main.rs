//! `logcert`: experiments and certificates from the command line.
//!
//! Exit codes: 0 when every assertion holds, 2 when one fails, 1 on usage
//! or I/O errors.

// negated comparisons double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod fields;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use config::RunConfig;
use report::Ctx;

const THREADS_ENV: &str = "LOGMOD_THREADS";
const DEFAULT_SEED: u64 = 1;

fn threads(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?)),
        Err(_) => Ok(config),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let config = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = threads(cli.common.threads, config.threads)? {
        if n == 0 {
            anyhow::bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let out = cli.common.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let ctx = Ctx {
        out,
        seed: cli.common.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
        tol: config.tolerances,
        gnuplot: cli.common.gnuplot_script,
        selftest: cli.common.selftest,
    };
    let report = commands::dispatch(&ctx, &config, cli.command)?;
    let text = ctx.finish(&report)?;
    println!("{text}");
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
