//! Fixed-point solver for `Σ c_ij(x) ∂_i∂_j u = f` on the torus.
//!
//! One Picard step solves `Δv = Δu − c·(Au − f)` with the pointwise scaling
//! function `c(x)`; under the Cordes condition the step contracts in the
//! homogeneous-H² seminorm with factor at most `√(1−ε)·C₀`. On the torus the
//! Miranda–Talenti identity holds with constant 1, so the sharp aggregate
//! constant is `C₀ = 1` and the iteration is gated on that value by default;
//! the conservative dimension constant `C₀ = n` is reported alongside for
//! comparison.
//!
//! The right-hand side of each Poisson sub-step need not have zero mean even
//! when `f` does, so it is projected onto the zero-mean subspace before
//! inversion. The projected mass is recorded per iteration: it must decay to
//! zero for the iteration to converge to a genuine solution, and a stalled
//! mass is the visible symptom of an incompatible right-hand side.

use std::io::{self, Write};

use crate::cordes::{self, CoefficientField};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::operators::{invert_laplacian, laplacian, second_derivative};

/// One row of the solver instrumentation.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖A u_k − f‖_{L²}` after the step.
    pub residual: f64,
    /// `‖u_k − u_{k−1}‖` in the homogeneous-H² seminorm.
    pub increment: f64,
    /// Ratio of consecutive increments; defined from iteration 2 onward.
    pub contraction_factor: Option<f64>,
    /// Mean removed from the Poisson right-hand side before inversion.
    pub projected_mass: f64,
}

/// Per-iteration residuals, increments, and empirical contraction factors.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
}

impl IterationTrace {
    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn final_increment(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.increment)
    }

    pub fn max_projected_mass(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.projected_mass.abs())
            .fold(0.0, f64::max)
    }

    pub fn final_projected_mass(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.projected_mass)
    }

    /// CSV dump: `iter,residual,increment,contraction_factor` (the factor
    /// column is empty on the first row).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "iter,residual,increment,contraction_factor")?;
        for r in &self.records {
            match r.contraction_factor {
                Some(q) => writeln!(
                    out,
                    "{},{:.16e},{:.16e},{:.16e}",
                    r.iter, r.residual, r.increment, q
                )?,
                None => writeln!(out, "{},{:.16e},{:.16e},", r.iter, r.residual, r.increment)?,
            }
        }
        Ok(())
    }
}

/// Apply the non-divergence operator: `(Au)(x) = Σ_ij c_ij(x)·(∂_i∂_j u)(x)`.
pub fn apply_operator(coeffs: &CoefficientField, u: &ScalarField) -> Result<ScalarField> {
    if coeffs.grid() != u.grid() {
        return Err(Error::GridMismatch(
            "coefficients and field live on different grids".into(),
        ));
    }
    let n = coeffs.n_gens();
    if n != u.grid().dim() {
        return Err(Error::GridMismatch(format!(
            "{} generators but the grid has dimension {}",
            n,
            u.grid().dim()
        )));
    }
    let mut acc = ScalarField::zero(u.grid());
    for i in 0..n {
        for j in 0..n {
            let dij = second_derivative(u, i, j)?;
            acc = acc.add(&coeffs.entry(i, j).mul_pointwise(&dij));
        }
    }
    Ok(acc)
}

/// `‖A u − f‖_{L²}`.
pub fn residual_norm(
    coeffs: &CoefficientField,
    u: &ScalarField,
    f: &ScalarField,
) -> Result<f64> {
    if u.grid() != f.grid() {
        return Err(Error::GridMismatch(
            "iterate and right-hand side live on different grids".into(),
        ));
    }
    Ok(apply_operator(coeffs, u)?.sub(f).l2_norm())
}

/// One step of the contraction map: solve `Δv = Δu − c·Au + c·f`.
///
/// The right-hand side is projected onto zero mean before inversion; the
/// removed mass is available through [`solve`]'s trace.
pub fn picard_step(
    coeffs: &CoefficientField,
    u: &ScalarField,
    f: &ScalarField,
) -> Result<ScalarField> {
    let scaling = cordes::scaling_function(coeffs)?;
    let (v, _mass) = step_inner(coeffs, &scaling, u, f)?;
    Ok(v)
}

fn step_inner(
    coeffs: &CoefficientField,
    scaling: &ScalarField,
    u: &ScalarField,
    f: &ScalarField,
) -> Result<(ScalarField, f64)> {
    let au = apply_operator(coeffs, u)?;
    let rhs = laplacian(u)
        .sub(&scaling.mul_pointwise(&au))
        .add(&scaling.mul_pointwise(f));
    let mass = rhs.mean();
    let projected = rhs.shifted(mass);
    let v = invert_laplacian(&projected)?;
    Ok((v, mass))
}

/// Options for [`solve`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative tolerance on both the L² residual and the H² increment.
    pub tol: f64,
    pub max_iter: usize,
    /// Aggregate constant used by the Cordes gate. The sharp torus value is
    /// 1; pass the dimension to gate on the conservative constant instead.
    pub gate_c0: f64,
    /// Starting iterate; zero if absent.
    pub initial: Option<ScalarField>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 10_000,
            gate_c0: 1.0,
            initial: None,
        }
    }
}

/// Iterate the contraction map from `u₀ = 0` (or the provided iterate) until
/// the relative residual and the relative increment both drop below `tol`.
///
/// The increment criterion is active from iteration 2 onward: the first
/// increment measures the solution itself, not the convergence, and in the
/// isotropic case the first step already lands on the exact solution.
pub fn solve(
    coeffs: &CoefficientField,
    f: &ScalarField,
    opts: &SolveOptions,
) -> Result<(ScalarField, IterationTrace)> {
    if coeffs.grid() != f.grid() {
        return Err(Error::GridMismatch(
            "coefficients and right-hand side live on different grids".into(),
        ));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config(
            "solver needs tol > 0 and max_iter >= 1".into(),
        ));
    }
    let report = cordes::check(coeffs, opts.gate_c0)?;
    if !report.passed {
        return Err(Error::CordesFailed(format!(
            "epsilon {:e}, elliptic margin {:e}, bound {:e} with C0 {:e}",
            report.epsilon, report.elliptic_margin, report.contraction_bound, report.c0
        )));
    }
    let scaling = cordes::scaling_function(coeffs)?;
    let f_norm = f.l2_norm();

    let mut u = match &opts.initial {
        Some(u0) => {
            if u0.grid() != f.grid() {
                return Err(Error::GridMismatch(
                    "starting iterate lives on a different grid".into(),
                ));
            }
            u0.clone()
        }
        None => ScalarField::zero(f.grid()),
    };

    let mut trace = IterationTrace::default();
    let mut prev_increment: Option<f64> = None;
    for iter in 1..=opts.max_iter {
        let (v, mass) = step_inner(coeffs, &scaling, &u, f)?;
        let increment = v.sub(&u).h2_seminorm();
        let residual = residual_norm(coeffs, &v, f)?;
        let contraction_factor = match prev_increment {
            Some(prev) if prev > 0.0 => Some(increment / prev),
            _ => None,
        };
        trace.records.push(IterationRecord {
            iter,
            residual,
            increment,
            contraction_factor,
            projected_mass: mass,
        });
        trace.iterations = iter;
        prev_increment = Some(increment);
        u = v;

        let residual_ok = residual <= opts.tol * f_norm;
        let scale = u.h2_seminorm().max(f_norm);
        let increment_ok = iter == 1 || increment <= opts.tol * scale;
        if residual_ok && increment_ok {
            trace.converged = true;
            return Ok((u, trace));
        }
    }
    Err(Error::NonConvergence {
        trace: Box::new(trace),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(&x, &y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn sin_sin(grid: &Grid) -> ScalarField {
        ScalarField::sample(grid, |x| x[0].sin() * x[1].sin()).unwrap()
    }

    #[test]
    fn apply_matches_laplacian_for_identity() {
        let g = Grid::new(2, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = ScalarField::random_band_limited(&g, 6, true, &mut rng).unwrap();
        let c = CoefficientField::identity(&g);
        let au = apply_operator(&c, &u).unwrap();
        let lap = laplacian(&u);
        assert!(au.sub(&lap).l2_norm() <= 1e-12 * lap.l2_norm());
    }

    #[test]
    fn apply_closed_form_and_edge_cases() {
        let g = Grid::new(2, 32).unwrap();
        let u = sin_sin(&g);
        let c = CoefficientField::diagonal(&g, &[1.0, 2.0]).unwrap();
        let au = apply_operator(&c, &u).unwrap();
        assert!(max_abs_diff(&au, &u.scaled(-3.0)) < 1e-12);

        let constant = ScalarField::constant(&g, 4.0).unwrap();
        assert!(apply_operator(&c, &constant).unwrap().l2_norm() < 1e-10);

        let other = Grid::new(2, 16).unwrap();
        let c_other = CoefficientField::identity(&other);
        assert!(matches!(
            apply_operator(&c_other, &u),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn picard_step_examples() {
        let g = Grid::new(2, 32).unwrap();
        let f = sin_sin(&g).scaled(-2.0);

        // Identity coefficients: one step from anywhere lands on Δ⁻¹f.
        let c = CoefficientField::identity(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u0 = ScalarField::random_band_limited(&g, 4, true, &mut rng).unwrap();
        let v = picard_step(&c, &u0, &f).unwrap();
        let direct = invert_laplacian(&f).unwrap();
        assert!(max_abs_diff(&v, &direct) < 1e-12);

        // A fixed point stays fixed.
        let v2 = picard_step(&c, &direct, &f).unwrap();
        assert!(max_abs_diff(&v2, &direct) < 1e-13);

        // diag(1,2), u = 0, f = -3·sin·sin steps to (9/10)·sin·sin.
        let c12 = CoefficientField::diagonal(&g, &[1.0, 2.0]).unwrap();
        let f3 = sin_sin(&g).scaled(-3.0);
        let v = picard_step(&c12, &ScalarField::zero(&g), &f3).unwrap();
        assert!(max_abs_diff(&v, &sin_sin(&g).scaled(0.9)) < 1e-12);
    }

    #[test]
    fn poisson_case_converges_in_one_iteration() {
        let g = Grid::new(2, 32).unwrap();
        let c = CoefficientField::identity(&g);
        let f = sin_sin(&g).scaled(-2.0);
        let (u, trace) = solve(&c, &f, &SolveOptions::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations, 1);
        assert!(trace.final_residual() < 1e-10);
        assert!(max_abs_diff(&u, &sin_sin(&g)) < 1e-12);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let g = Grid::new(2, 32).unwrap();
        let c = CoefficientField::diagonal(&g, &[1.0, 2.0]).unwrap();
        let u_star = sin_sin(&g);
        let f = apply_operator(&c, &u_star).unwrap();
        assert!(max_abs_diff(&f, &u_star.scaled(-3.0)) < 1e-12);
        let (u, trace) = solve(&c, &f, &SolveOptions::default()).unwrap();
        assert!(trace.converged);
        assert!(residual_norm(&c, &u, &f).unwrap() <= 1e-9 * f.l2_norm());
        assert!(u.sub(&u_star).h2_seminorm() <= 1e-8 * u_star.h2_seminorm());
    }

    #[test]
    fn failing_gate_is_rejected_before_iterating() {
        let g = Grid::new(2, 16).unwrap();
        let c = CoefficientField::diagonal(&g, &[1.0, -1.0]).unwrap();
        let f = sin_sin(&g);
        assert!(matches!(
            solve(&c, &f, &SolveOptions::default()),
            Err(Error::CordesFailed(_))
        ));
    }

    #[test]
    fn residual_examples() {
        let g = Grid::new(2, 32).unwrap();
        let c = CoefficientField::diagonal(&g, &[1.0, 2.0]).unwrap();
        let u_star = sin_sin(&g);
        let f = apply_operator(&c, &u_star).unwrap();

        assert!(residual_norm(&c, &u_star, &f).unwrap() <= 1e-10 * f.l2_norm());
        assert!(
            (residual_norm(&c, &ScalarField::zero(&g), &f).unwrap() - f.l2_norm()).abs()
                < 1e-12 * f.l2_norm()
        );

        // The residual grows linearly in the size of a perturbation.
        let bump = ScalarField::sample(&g, |x| x[0].sin()).unwrap();
        let r1 = residual_norm(&c, &u_star.add(&bump.scaled(1e-3)), &f).unwrap();
        let r2 = residual_norm(&c, &u_star.add(&bump.scaled(2e-3)), &f).unwrap();
        assert!((r2 / r1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn contraction_factors_respect_the_bound() {
        let g = Grid::new(2, 32).unwrap();
        // diag(1,2) plus a smooth symmetric off-diagonal perturbation.
        let p = ScalarField::sample(&g, |x| 0.1 * x[0].sin() * x[1].cos()).unwrap();
        let c = CoefficientField::new(
            2,
            vec![
                ScalarField::constant(&g, 1.0).unwrap(),
                p.clone(),
                p,
                ScalarField::constant(&g, 2.0).unwrap(),
            ],
        )
        .unwrap();
        let eps = cordes::cordes_epsilon(&c).unwrap();
        assert!(eps >= 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u_star = ScalarField::random_band_limited(&g, 5, true, &mut rng).unwrap();
        let f = apply_operator(&c, &u_star).unwrap();
        let (u, trace) = solve(&c, &f, &SolveOptions::default()).unwrap();
        assert!(u.sub(&u_star).h2_seminorm() <= 1e-8 * u_star.h2_seminorm());
        let bound = (1.0 - eps).sqrt() + 0.02;
        for r in &trace.records {
            if let Some(q) = r.contraction_factor {
                assert!(q <= bound, "iter {} factor {} > {}", r.iter, q, bound);
            }
        }
        // The projected mass must decay along the iteration.
        assert!(trace.final_projected_mass().abs() <= 1e-12);
    }

    #[test]
    fn trace_csv_shape() {
        let g = Grid::new(2, 16).unwrap();
        let c = CoefficientField::diagonal(&g, &[1.0, 2.0]).unwrap();
        let f = sin_sin(&g).scaled(-3.0);
        let (_, trace) = solve(&c, &f, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,residual,increment,contraction_factor"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("1,"));
        assert!(first.ends_with(','), "no factor on the first row: {}", first);
    }
}
