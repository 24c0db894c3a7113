//! Batch driver: one experiment per invocation, driven by a flat key-value
//! config file. Writes `summary.json` (and per-command trace/field dumps)
//! into the output directory; on failure an `error.json` with the same shape
//! every time.
//!
//! Exit codes: 0 success, 2 config error, 3 precondition failure,
//! 4 non-convergence.

mod catalog;
mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use nondiv_core::report::Json;
use nondiv_core::Error;

use config::{ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "nondiv",
    about = "Fixed-point solvers and condition checkers for non-divergence-form equations",
    long_about = "Runs one experiment described by a flat key-value config file.\n\
                  Commands (selected by the `command` key): solve-linear, solve-nonlinear,\n\
                  check-cordes, check-nearness, heisenberg-norms, mt-identity, fiber-solve.\n\
                  \n\
                  Common keys and their defaults: seed = 0, tol = 1e-9, max_iter = 10000,\n\
                  out = out. Grid keys: dim = 2, points = 32. See the README for the\n\
                  per-command key reference and the coefficient/field selector catalog."
)]
struct Args {
    /// Path to the experiment config file.
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,

    /// Tolerance (overrides the config's `tol`).
    #[arg(long)]
    tol: Option<f64>,

    /// Iteration budget (overrides the config's `max_iter`).
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::NonConvergence { .. } => 4,
        _ => 3,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Config(_) => "config",
        Error::Data(_) => "data",
        Error::AxisOutOfRange { .. } => "axis-out-of-range",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::Solvability(_) => "solvability",
        Error::DegenerateInput(_) => "degenerate-input",
        Error::DegenerateCoefficients(_) => "degenerate-coefficients",
        Error::CordesFailed(_) => "cordes-failed",
        Error::NonConvergence { .. } => "non-convergence",
        Error::EmptySample => "empty-sample",
        Error::DegenerateSample(_) => "degenerate-sample",
        Error::SingularTruncation(_) => "singular-truncation",
        Error::NormNonConvergence => "norm-non-convergence",
    }
}

fn write_error_json(out: Option<&PathBuf>, err: &Error, code: u8) {
    let Some(dir) = out else { return };
    let mut doc = Json::object();
    doc.push("error", Json::from(error_kind(err)));
    doc.push("message", Json::from(err.to_string().as_str()));
    doc.push("exit_code", Json::from(code as u64));
    if fs::create_dir_all(dir).is_ok() {
        let _ = fs::write(dir.join("error.json"), doc.to_file_string());
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        tol: args.tol,
        max_iter: args.max_iter,
    };

    let text = match fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            let err = Error::Config(format!("cannot read config {:?}: {}", args.config, e));
            eprintln!("error: {}", err);
            write_error_json(args.out.as_ref(), &err, 2);
            return ExitCode::from(2);
        }
    };

    let cfg = match ExperimentConfig::from_text(&text, &overrides) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {}", err);
            write_error_json(args.out.as_ref(), &err, 2);
            return ExitCode::from(2);
        }
    };

    match commands::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code_for(&err);
            eprintln!("error: {}", err);
            write_error_json(Some(&cfg.out), &err, code);
            ExitCode::from(code)
        }
    }
}
