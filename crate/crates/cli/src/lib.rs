//! Driver for the `psido` command-line tool.
//!
//! Every run writes `report.txt` (`key = value`), zero or more CSV tables, binary
//! artifacts in the container format of [`psido::io`], and `provenance.txt` with the
//! config hash, seed, versions and per-file checksums into the output directory.

pub mod commands;
pub mod config;
pub mod presets;
pub mod report;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use psido::io::sha256_hex;
use psido::{Error, Result};

use config::{Cli, Opts};
use report::Report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 2;

/// Provenance record; deliberately free of thread count, paths and timestamps.
pub fn provenance(command: &str, canonical: &str, seed: u64) -> String {
    let mut s = String::new();
    s.push_str(&format!("command = {command}\n"));
    s.push_str(&format!("config_sha256 = {}\n", sha256_hex(canonical.as_bytes())));
    s.push_str(&format!("seed = {seed}\n"));
    s.push_str(&format!("psido_core_version = {}\n", psido::VERSION));
    s.push_str(&format!("psido_cli_version = {}\n", env!("CARGO_PKG_VERSION")));
    for line in canonical.lines() {
        s.push_str(&format!("config.{line}\n"));
    }
    s
}

/// Runs one command and writes its artifacts. Returns the report.
pub fn execute(command: &str, opts: Opts) -> Result<Report> {
    let opts = opts.resolve()?;
    let canonical = opts.canonical(command)?;
    let threads = opts.thread_count()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let report = pool.install(|| commands::execute(command, &opts))?;
    report.write(&opts.out_dir(), &provenance(command, &canonical, opts.seed()))?;
    Ok(report)
}

fn print(report: &Report) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(report.text().as_bytes())?;
    for t in &report.tables {
        writeln!(out, "# {}.csv", t.name)?;
        let csv = t.to_csv().map_err(|e| std::io::Error::other(e.to_string()))?;
        out.write_all(&csv)?;
    }
    Ok(())
}

/// Full command-line entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return code;
        }
    };
    let (command, opts) = cli.command.split();
    match execute(command, opts.clone()) {
        Ok(report) => {
            if let Err(e) = print(&report) {
                eprintln!("error: {e}");
                return EXIT_ERROR;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
