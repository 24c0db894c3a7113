//! Command runners: each builds its inputs from the config, runs the
//! corresponding library calls, and writes `summary.json` plus any trace,
//! field or matrix dumps into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nondiv_core::field::{Grid, ScalarField};
use nondiv_core::linear::{self, IterationTrace, SolveOptions};
use nondiv_core::nearness::{self, OperatorPairSample};
use nondiv_core::nonlinear::{self, NonlinearOptions};
use nondiv_core::operators::{self, laplacian};
use nondiv_core::report::Json;
use nondiv_core::{cordes, heisenberg};
use nondiv_core::{Error, Result};

use crate::catalog;
use crate::config::{Command, ExperimentConfig};

pub fn run(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::Config(format!("cannot create output directory: {}", e)))?;
    match cfg.command {
        Command::SolveLinear => solve_linear(cfg),
        Command::SolveNonlinear => solve_nonlinear(cfg),
        Command::CheckCordes => check_cordes(cfg),
        Command::CheckNearness => check_nearness(cfg),
        Command::HeisenbergNorms => heisenberg_norms(cfg),
        Command::MtIdentity => mt_identity(cfg),
        Command::FiberSolve => fiber_solve(cfg),
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)
        .map_err(|e| Error::Config(format!("cannot write {}: {}", name, e)))
}

fn write_summary(cfg: &ExperimentConfig, doc: &Json) -> Result<()> {
    write_text(&cfg.out, "summary.json", &doc.to_file_string())
}

fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let file = File::create(dir.join(name))
        .map_err(|e| Error::Config(format!("cannot create {}: {}", name, e)))?;
    let mut out = BufWriter::new(file);
    field
        .write_csv(&mut out)
        .map_err(|e| Error::Config(format!("cannot write {}: {}", name, e)))
}

fn write_trace(dir: &Path, trace: &IterationTrace) -> Result<()> {
    let file = File::create(dir.join("trace.csv"))
        .map_err(|e| Error::Config(format!("cannot create trace.csv: {}", e)))?;
    let mut out = BufWriter::new(file);
    trace
        .write_csv(&mut out)
        .map_err(|e| Error::Config(format!("cannot write trace.csv: {}", e)))
}

fn summary_head(cfg: &ExperimentConfig) -> Json {
    let mut doc = Json::object();
    doc.push("command", Json::from(cfg.command.as_str()));
    doc.push("seed", Json::from(cfg.seed));
    doc
}

fn grid_from(cfg: &ExperimentConfig) -> Result<Grid> {
    let dim = cfg.raw.get_usize("dim", 2)?;
    let points = cfg.raw.get_usize("points", 32)?;
    Grid::new(dim, points)
}

fn push_grid(doc: &mut Json, grid: &Grid) {
    doc.push("dim", Json::from(grid.dim()));
    doc.push("points", Json::from(grid.points_per_axis()));
}

/// Resolve the `rhs` selector; `manufactured` builds `f` by applying the
/// given operator to the `solution` field and returns that field too.
fn resolve_rhs<F>(
    cfg: &ExperimentConfig,
    grid: &Grid,
    rng: &mut ChaCha8Rng,
    apply: F,
) -> Result<(ScalarField, Option<ScalarField>)>
where
    F: FnOnce(&ScalarField) -> Result<ScalarField>,
{
    let selector = cfg.raw.get_str("rhs")?;
    if selector == "manufactured" {
        let solution = catalog::field(cfg.raw.get_str("solution")?, grid, rng)?;
        let f = apply(&solution)?;
        Ok((f, Some(solution)))
    } else {
        Ok((catalog::field(selector, grid, rng)?, None))
    }
}

fn push_trace_stats(doc: &mut Json, trace: &IterationTrace) {
    doc.push("iterations", Json::from(trace.iterations));
    doc.push("converged", Json::Bool(trace.converged));
    doc.push("final_residual", Json::Float(trace.final_residual()));
    doc.push("final_increment", Json::Float(trace.final_increment()));
    doc.push(
        "final_projected_mass",
        Json::Float(trace.final_projected_mass()),
    );
    doc.push(
        "max_projected_mass",
        Json::Float(trace.max_projected_mass()),
    );
}

fn solve_linear(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw.ensure_known(&[
        "dim",
        "points",
        "coefficients",
        "rhs",
        "solution",
        "c0",
    ])?;
    let grid = grid_from(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coeffs = catalog::coefficients(cfg.raw.get_str("coefficients")?, &grid, &mut rng)?;
    let (f, solution) = resolve_rhs(cfg, &grid, &mut rng, |u| linear::apply_operator(&coeffs, u))?;

    let gate_c0 = cfg.raw.get_f64("c0", 1.0)?;
    let n = coeffs.n_gens() as f64;
    let report_sharp = cordes::check(&coeffs, 1.0)?;
    let report_paper = cordes::check(&coeffs, n)?;

    let opts = SolveOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        gate_c0,
        initial: None,
    };
    let solve_result = linear::solve(&coeffs, &f, &opts);

    let mut doc = summary_head(cfg);
    push_grid(&mut doc, &grid);
    doc.push("tol", Json::Float(cfg.tol));
    doc.push("max_iter", Json::from(cfg.max_iter));
    doc.push("coefficients", Json::from(cfg.raw.get_str("coefficients")?));
    doc.push("rhs", Json::from(cfg.raw.get_str("rhs")?));
    doc.push("epsilon", Json::Float(report_sharp.epsilon));
    doc.push("ratio_min", Json::Float(report_sharp.ratio_min));
    doc.push(
        "elliptic_margin",
        Json::Float(report_sharp.elliptic_margin),
    );
    doc.push("c0_sharp", Json::Float(1.0));
    doc.push("c0_paper", Json::Float(n));
    doc.push("bound", Json::Float(report_sharp.contraction_bound));
    doc.push("bound_paper", Json::Float(report_paper.contraction_bound));
    doc.push("gate_c0", Json::Float(gate_c0));
    doc.push("rhs_l2", Json::Float(f.l2_norm()));

    let (u, trace) = solve_result?;
    push_trace_stats(&mut doc, &trace);
    if let Some(u_star) = &solution {
        let err = u.sub(u_star).h2_seminorm();
        doc.push("solution_h2_error", Json::Float(err));
    }
    write_trace(&cfg.out, &trace)?;
    write_field(&cfg.out, "solution.csv", &u)?;
    write_summary(cfg, &doc)
}

fn solve_nonlinear(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw.ensure_known(&[
        "dim",
        "points",
        "function",
        "rhs",
        "solution",
        "alpha",
        "verify_c1",
        "m",
        "verify_c2",
        "gamma",
        "delta",
        "n_samples",
        "sample_box",
        "c0",
    ])?;
    let grid = grid_from(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let selector = cfg.raw.get_str("function")?;
    let sample_box = cfg.raw.get_f64("sample_box", nonlinear::DEFAULT_SAMPLE_BOX)?;
    let a = catalog::symbol(selector, &grid, &mut rng)?.with_sample_box(sample_box);
    let (f, solution) = resolve_rhs(cfg, &grid, &mut rng, |u| nonlinear::apply(&a, u))?;
    let alpha = cfg.raw.get_f64("alpha", 1.0)?;

    let mut doc = summary_head(cfg);
    push_grid(&mut doc, &grid);
    doc.push("tol", Json::Float(cfg.tol));
    doc.push("max_iter", Json::from(cfg.max_iter));
    doc.push("function", Json::from(selector));
    doc.push("rhs", Json::from(cfg.raw.get_str("rhs")?));
    doc.push("alpha", Json::Float(alpha));
    doc.push("rhs_l2", Json::Float(f.l2_norm()));

    // Condition verification, when requested.
    let n_samples = cfg.raw.get_usize("n_samples", 100_000)?;
    let mut m_constant = None;
    if cfg.raw.get_bool("verify_c1", false)? {
        let m = cfg.raw.require_f64("m")?;
        m_constant = Some(m);
        let report = nonlinear::verify_c1(&a, m, n_samples, cfg.seed)?;
        doc.push("c1_passed", Json::Bool(report.passed()));
        write_text(&cfg.out, "c1_report.json", &report.to_json().to_file_string())?;
    }
    if cfg.raw.get_bool("verify_c2", false)? {
        let gamma = cfg.raw.get_f64("gamma", 0.0)?;
        let delta = cfg.raw.get_f64("delta", 0.0)?;
        let report =
            nonlinear::verify_c2(&a, alpha, gamma, delta, n_samples, cfg.seed.wrapping_add(1))?;
        doc.push("c2_passed", Json::Bool(report.passed()));
        write_text(&cfg.out, "c2_report.json", &report.to_json().to_file_string())?;
        if let Some(m) = m_constant {
            let c0 = cfg.raw.get_f64("c0", 1.0)?;
            let adm = nonlinear::admissibility(alpha, m, gamma, delta, c0);
            doc.push("admissibility", adm.to_json());
        }
    }

    let opts = NonlinearOptions {
        alpha,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..NonlinearOptions::default()
    };
    let (u, trace) = nonlinear::solve(&a, &f, &opts)?;
    push_trace_stats(&mut doc, &trace);
    let residual = nonlinear::apply(&a, &u)?.sub(&f).l2_norm();
    doc.push("verified_residual", Json::Float(residual));
    if let Some(u_star) = &solution {
        doc.push(
            "solution_h2_error",
            Json::Float(u.sub(u_star).h2_seminorm()),
        );
    }
    write_trace(&cfg.out, &trace)?;
    write_field(&cfg.out, "solution.csv", &u)?;
    write_summary(cfg, &doc)
}

fn check_cordes(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw
        .ensure_known(&["dim", "points", "coefficients", "c0"])?;
    let grid = grid_from(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coeffs = catalog::coefficients(cfg.raw.get_str("coefficients")?, &grid, &mut rng)?;
    let n = coeffs.n_gens() as f64;
    let gate_c0 = cfg.raw.get_f64("c0", 1.0)?;
    let report = cordes::check(&coeffs, gate_c0)?;
    let report_paper = cordes::check(&coeffs, n)?;

    let mut doc = summary_head(cfg);
    push_grid(&mut doc, &grid);
    doc.push("coefficients", Json::from(cfg.raw.get_str("coefficients")?));
    doc.push("epsilon", Json::Float(report.epsilon));
    doc.push("ratio_min", Json::Float(report.ratio_min));
    doc.push("elliptic_margin", Json::Float(report.elliptic_margin));
    doc.push("coefficient_bound", Json::Float(coeffs.bound()));
    doc.push("c0_sharp", Json::Float(1.0));
    doc.push("c0_paper", Json::Float(n));
    doc.push("gate_c0", Json::Float(gate_c0));
    doc.push("bound", Json::Float(report.contraction_bound));
    doc.push(
        "bound_paper",
        Json::Float(report_paper.contraction_bound),
    );
    doc.push("passed", Json::Bool(report.passed));
    write_summary(cfg, &doc)
}

fn check_nearness(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw.ensure_known(&[
        "dim",
        "points",
        "mode",
        "coefficients",
        "pairs",
        "kmax",
        "alpha",
        "k",
        "m",
        "mu",
        "alphas",
    ])?;
    let grid = grid_from(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coeffs = catalog::coefficients(cfg.raw.get_str("coefficients")?, &grid, &mut rng)?;
    let pairs = cfg.raw.get_usize("pairs", 16)?;
    let kmax = cfg.raw.get_usize("kmax", 4)?;

    // Sampled difference images: the reference operator is the Laplacian,
    // the probe is the coefficient operator.
    let mut b_diffs = Vec::with_capacity(pairs);
    let mut a_diffs = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let u = ScalarField::random_band_limited(&grid, kmax, true, &mut rng)?;
        let v = ScalarField::random_band_limited(&grid, kmax, true, &mut rng)?;
        b_diffs.push(laplacian(&u).sub(&laplacian(&v)));
        a_diffs.push(
            linear::apply_operator(&coeffs, &u)?.sub(&linear::apply_operator(&coeffs, &v)?),
        );
    }
    let sample = OperatorPairSample::from_images(b_diffs, a_diffs)?;

    let mode = cfg.raw.get_str("mode")?;
    let mut doc = summary_head(cfg);
    push_grid(&mut doc, &grid);
    doc.push("coefficients", Json::from(cfg.raw.get_str("coefficients")?));
    doc.push("mode", Json::from(mode));
    doc.push("pairs", Json::from(pairs));
    doc.push("kmax", Json::from(kmax));
    match mode {
        "definition" => {
            let alpha = cfg.raw.get_f64("alpha", 1.0)?;
            let k = cfg.raw.require_f64("k")?;
            let report = nearness::check_near_definition(&sample, alpha, k)?;
            doc.push("alpha", Json::Float(alpha));
            doc.push("k", Json::Float(k));
            doc.push("report", report.to_json());
        }
        "sufficient" => {
            let alpha = cfg.raw.get_f64("alpha", 1.0)?;
            let m = cfg.raw.require_f64("m")?;
            let mu = cfg.raw.require_f64("mu")?;
            let report = nearness::check_near_sufficient(&sample, alpha, m, mu)?;
            doc.push("alpha", Json::Float(alpha));
            doc.push("m", Json::Float(m));
            doc.push("mu", Json::Float(mu));
            doc.push("report", report.to_json());
        }
        "estimate" => {
            let alphas = cfg.raw.get_f64_list("alphas", &[0.25, 0.5, 1.0])?;
            let estimate = nearness::estimate_constants(&sample, &alphas)?;
            doc.push("report", estimate.to_json());
        }
        other => {
            return Err(Error::Config(format!(
                "unknown nearness mode '{}'; expected definition, sufficient or estimate",
                other
            )))
        }
    }
    write_summary(cfg, &doc)
}

fn heisenberg_norms(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw
        .ensure_known(&["lambda", "sizes", "n", "c_pair", "dump_matrix"])?;
    let lambda = cfg.raw.get_f64("lambda", 1.0)?;
    let sizes = cfg.raw.get_usize_list("sizes", &[16, 64, 256])?;
    let n = cfg.raw.get_usize("n", 1)?;
    let c_pair = cfg.raw.get_f64("c_pair", 0.5)?;

    let norms = heisenberg::norm_report(lambda, &sizes)?;
    let constants = heisenberg::c0_report(n, c_pair)?;

    let mut doc = summary_head(cfg);
    doc.push("norm_report", norms.to_json());
    doc.push("c0_report", constants.to_json());
    if cfg.raw.get_bool("dump_matrix", false)? {
        let largest = *sizes.iter().max().expect("sizes is nonempty");
        let matrix = heisenberg::xy_linv(lambda, largest)?;
        let file = File::create(cfg.out.join("matrix.csv"))
            .map_err(|e| Error::Config(format!("cannot create matrix.csv: {}", e)))?;
        let mut out = BufWriter::new(file);
        matrix
            .write_csv(&mut out)
            .map_err(|e| Error::Config(format!("cannot write matrix.csv: {}", e)))?;
    }
    write_summary(cfg, &doc)
}

fn mt_identity(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw
        .ensure_known(&["dim", "points", "samples", "kmax"])?;
    let grid = grid_from(cfg)?;
    let samples = cfg.raw.get_usize("samples", 100)?;
    let kmax = cfg.raw.get_usize("kmax", 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut max_deviation = 0.0f64;
    let mut max_pair_ratio = 0.0f64;
    for _ in 0..samples {
        let u = ScalarField::random_band_limited(&grid, kmax, true, &mut rng)?;
        let ratio = operators::miranda_talenti_ratio(&u)?;
        max_deviation = max_deviation.max((ratio - 1.0).abs());
        for r in operators::miranda_talenti_pair_ratios(&u)? {
            max_pair_ratio = max_pair_ratio.max(r);
        }
    }

    let mut doc = summary_head(cfg);
    push_grid(&mut doc, &grid);
    doc.push("samples", Json::from(samples));
    doc.push("kmax", Json::from(kmax));
    doc.push("max_ratio_deviation", Json::Float(max_deviation));
    doc.push("max_pair_ratio", Json::Float(max_pair_ratio));
    doc.push("identity_holds", Json::Bool(max_deviation <= 1e-10));
    doc.push(
        "pairs_bounded",
        Json::Bool(max_pair_ratio <= 1.0 + 1e-12),
    );
    write_summary(cfg, &doc)
}

fn fiber_solve(cfg: &ExperimentConfig) -> Result<()> {
    cfg.raw
        .ensure_known(&["lambda", "size", "n", "coefficients", "rhs_index"])?;
    let lambda = cfg.raw.get_f64("lambda", 1.0)?;
    let size = cfg.raw.get_usize("size", 16)?;
    let n = cfg.raw.get_usize("n", 1)?;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let n_gens = 2 * n;
    let selector = cfg.raw.get("coefficients").unwrap_or("identity");
    let coeffs = match selector {
        "identity" => DMatrix::<f64>::identity(n_gens, n_gens),
        other => {
            let rest = other.strip_prefix("constant:").ok_or_else(|| {
                Error::Config(format!(
                    "fiber-solve coefficients must be 'identity' or 'constant:<{} values>'",
                    n_gens * n_gens
                ))
            })?;
            let values: Vec<f64> = rest
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::Config(format!("bad coefficient '{}': {}", s, e))
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != n_gens * n_gens {
                return Err(Error::Config(format!(
                    "constant coefficient matrix needs {} values, got {}",
                    n_gens * n_gens,
                    values.len()
                )));
            }
            DMatrix::from_row_slice(n_gens, n_gens, &values)
        }
    };
    let full = size.pow(n as u32);
    let rhs_index = cfg.raw.get_usize("rhs_index", 0)?;
    if rhs_index >= full {
        return Err(Error::Config(format!(
            "rhs_index {} out of range for dimension {}",
            rhs_index, full
        )));
    }
    let mut f_hat = DVector::<Complex64>::zeros(full);
    f_hat[rhs_index] = Complex64::new(1.0, 0.0);

    let solution = heisenberg::fiber_solve(lambda, &coeffs, &f_hat, size)?;

    let mut doc = summary_head(cfg);
    doc.push("lambda", Json::Float(lambda));
    doc.push("size", Json::from(size));
    doc.push("n", Json::from(n));
    doc.push("rhs_index", Json::from(rhs_index));
    doc.push("solution_norm", Json::Float(solution.norm()));

    let file = File::create(cfg.out.join("solution.csv"))
        .map_err(|e| Error::Config(format!("cannot create solution.csv: {}", e)))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "index,re,im").map_err(|e| Error::Config(e.to_string()))?;
    for (i, z) in solution.iter().enumerate() {
        writeln!(out, "{},{:.16e},{:.16e}", i, z.re, z.im)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    write_summary(cfg, &doc)
}
