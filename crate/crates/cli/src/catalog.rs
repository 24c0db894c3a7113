//! Built-in catalogs of analytic coefficient families, right-hand sides and
//! nonlinear symbols, addressed by name in configs.
//!
//! Coefficient selectors are `+`-separated parts. The first part is a base:
//!
//! * `identity` — `c_ij = δ_ij`
//! * `diag:1,2` — constant diagonal (one value per axis)
//! * `constant:1,0,0,2` — full constant matrix, row-major `n²` values
//! * `csv:<dir>` — one dump-format CSV per entry, named `entry_<i>_<j>.csv`
//!
//! Later parts are additive perturbations:
//!
//! * `offdiag-sin:0.1` — adds `amp·sin(x₀)cos(x₁)` to the two off-diagonal
//!   entries of a 2-D field
//! * `random-sym:0.1,2` — adds a symmetric band-limited random perturbation
//!   of sup-amplitude `amp` and band `kmax`, drawn from the run seed
//!
//! Field selectors: `zero`, `constant:c`, `sin[:amp]`, `sin2[:amp]`,
//! `random:kmax`.
//! Symbol selectors: `trace`, `trace-scaled:s`, `trace-sin:amp`,
//! `coeff:<coefficient selector>`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand_chacha::ChaCha8Rng;

use nondiv_core::cordes::CoefficientField;
use nondiv_core::field::{Grid, ScalarField};
use nondiv_core::nonlinear::CaratheodoryFn;
use nondiv_core::{Error, Result};

pub fn coefficients(selector: &str, grid: &Grid, rng: &mut ChaCha8Rng) -> Result<CoefficientField> {
    let mut parts = selector.split('+');
    let base = parts
        .next()
        .ok_or_else(|| Error::Config("empty coefficient selector".into()))?;
    let mut field = coefficient_base(base.trim(), grid)?;
    for part in parts {
        field = apply_perturbation(field, part.trim(), grid, rng)?;
    }
    Ok(field)
}

fn coefficient_base(part: &str, grid: &Grid) -> Result<CoefficientField> {
    let (name, args) = split_selector(part);
    match name {
        "identity" => Ok(CoefficientField::identity(grid)),
        "diag" => {
            let diag = parse_f64_list(args, "diag")?;
            if diag.len() != grid.dim() {
                return Err(Error::Config(format!(
                    "diag needs {} values for this grid, got {}",
                    grid.dim(),
                    diag.len()
                )));
            }
            CoefficientField::diagonal(grid, &diag)
        }
        "constant" => {
            let values = parse_f64_list(args, "constant")?;
            let n = grid.dim();
            if values.len() != n * n {
                return Err(Error::Config(format!(
                    "constant needs {} values for this grid, got {}",
                    n * n,
                    values.len()
                )));
            }
            CoefficientField::constant_matrix(grid, &values)
        }
        "csv" => {
            let dir = args.ok_or_else(|| Error::Config("csv selector needs a directory".into()))?;
            coefficients_from_csv(Path::new(dir), grid)
        }
        other => Err(Error::Config(format!(
            "unknown coefficient base '{}'",
            other
        ))),
    }
}

fn apply_perturbation(
    base: CoefficientField,
    part: &str,
    grid: &Grid,
    rng: &mut ChaCha8Rng,
) -> Result<CoefficientField> {
    let (name, args) = split_selector(part);
    let n = base.n_gens();
    match name {
        "offdiag-sin" => {
            if grid.dim() != 2 || n != 2 {
                return Err(Error::Config(
                    "offdiag-sin is defined for 2-dimensional fields".into(),
                ));
            }
            let amp = parse_single_f64(args, "offdiag-sin")?;
            let bump = ScalarField::sample(grid, |x| amp * x[0].sin() * x[1].cos())?;
            let mut entries = base.entries().to_vec();
            entries[1] = entries[1].add(&bump);
            entries[2] = entries[2].add(&bump);
            CoefficientField::new(n, entries)
        }
        "random-sym" => {
            let values = parse_f64_list(args, "random-sym")?;
            if values.len() != 2 {
                return Err(Error::Config(
                    "random-sym needs amplitude and band limit, e.g. random-sym:0.1,2".into(),
                ));
            }
            let amp = values[0];
            let kmax = values[1] as usize;
            let mut entries = base.entries().to_vec();
            for i in 0..n {
                for j in i..n {
                    let g = ScalarField::random_band_limited(grid, kmax, false, rng)?;
                    let sup = g.values().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                    let scale = if sup > 0.0 { amp / sup } else { 0.0 };
                    let bump = g.scaled(scale);
                    entries[i * n + j] = entries[i * n + j].add(&bump);
                    if i != j {
                        entries[j * n + i] = entries[j * n + i].add(&bump);
                    }
                }
            }
            CoefficientField::new(n, entries)
        }
        other => Err(Error::Config(format!(
            "unknown coefficient perturbation '{}'",
            other
        ))),
    }
}

fn coefficients_from_csv(dir: &Path, grid: &Grid) -> Result<CoefficientField> {
    let n = grid.dim();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let path = dir.join(format!("entry_{}_{}.csv", i, j));
            let file = File::open(&path).map_err(|e| {
                Error::Config(format!("cannot open coefficient file {:?}: {}", path, e))
            })?;
            let field = ScalarField::read_csv(BufReader::new(file))?;
            if field.grid() != grid {
                return Err(Error::GridMismatch(format!(
                    "coefficient file {:?} has grid {}^{}, expected {}^{}",
                    path,
                    field.grid().points_per_axis(),
                    field.grid().dim(),
                    grid.points_per_axis(),
                    grid.dim()
                )));
            }
            entries.push(field);
        }
    }
    CoefficientField::new(n, entries)
}

/// Analytic or random right-hand-side / solution fields.
pub fn field(selector: &str, grid: &Grid, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let (name, args) = split_selector(selector);
    match name {
        "zero" => Ok(ScalarField::zero(grid)),
        "constant" => ScalarField::constant(grid, parse_single_f64(args, "constant")?),
        "sin" => {
            let amp = parse_optional_f64(args, "sin")?.unwrap_or(1.0);
            ScalarField::sample(grid, move |x| amp * x[0].sin())
        }
        "sin2" => {
            if grid.dim() < 2 {
                return Err(Error::Config("sin2 needs a grid of dimension >= 2".into()));
            }
            let amp = parse_optional_f64(args, "sin2")?.unwrap_or(1.0);
            ScalarField::sample(grid, move |x| amp * x[0].sin() * x[1].sin())
        }
        "random" => {
            let kmax = parse_single_f64(args, "random")? as usize;
            ScalarField::random_band_limited(grid, kmax, true, rng)
        }
        other => Err(Error::Config(format!("unknown field selector '{}'", other))),
    }
}

/// Nonlinear symbols by name.
pub fn symbol(
    selector: &str,
    grid: &Grid,
    rng: &mut ChaCha8Rng,
) -> Result<CaratheodoryFn> {
    if let Some(rest) = selector.strip_prefix("coeff:") {
        let coeffs = coefficients(rest, grid, rng)?;
        return Ok(CaratheodoryFn::from_coefficients(&coeffs));
    }
    let (name, args) = split_selector(selector);
    let n = grid.dim();
    match name {
        "trace" => Ok(CaratheodoryFn::trace(n)),
        "trace-scaled" => Ok(CaratheodoryFn::scaled_trace(
            n,
            parse_single_f64(args, "trace-scaled")?,
        )),
        "trace-sin" => Ok(CaratheodoryFn::trace_sin(
            n,
            parse_single_f64(args, "trace-sin")?,
        )),
        other => Err(Error::Config(format!(
            "unknown symbol selector '{}'",
            other
        ))),
    }
}

fn split_selector(part: &str) -> (&str, Option<&str>) {
    match part.split_once(':') {
        Some((name, args)) => (name.trim(), Some(args.trim())),
        None => (part.trim(), None),
    }
}

fn parse_f64_list(args: Option<&str>, what: &str) -> Result<Vec<f64>> {
    let args = args.ok_or_else(|| Error::Config(format!("{} needs arguments", what)))?;
    args.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: bad number '{}': {}", what, s, e)))
        })
        .collect()
}

fn parse_single_f64(args: Option<&str>, what: &str) -> Result<f64> {
    let list = parse_f64_list(args, what)?;
    if list.len() != 1 {
        return Err(Error::Config(format!(
            "{} takes exactly one argument",
            what
        )));
    }
    Ok(list[0])
}

fn parse_optional_f64(args: Option<&str>, what: &str) -> Result<Option<f64>> {
    match args {
        None => Ok(None),
        Some(_) => Ok(Some(parse_single_f64(args, what)?)),
    }
}
