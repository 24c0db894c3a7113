//! Nonlinear operators `a(x, {∂_i∂_j u})`, sampling-based falsification of
//! the structure conditions, and a damped image-space iteration.
//!
//! The two structure conditions on the symbol `a : 𝔾 × ℝ^{N²} → ℝ` are
//!
//! * (C1)  `|a(x, ξ+τ) − a(x, ξ)| ≥ M·|Tr τ|`
//! * (C2)  `|Tr τ − α(a(x, ξ+τ) − a(x, ξ))| ≤ γ‖τ‖ + δ|Tr τ|`
//!
//! for all `ξ, τ` and almost all `x`. These quantify over all of `ℝ^{N²}`,
//! so they cannot be certified by sampling; the verifiers here have
//! falsification-only semantics. Samples come from a low-discrepancy
//! sequence with a seeded random shift, so reports are reproducible and the
//! seed is part of the report.
//!
//! No constructive scheme comes with the underlying existence argument; the
//! solver used here iterates on the image variable `w = Δu`,
//! `w ← w − t·α·(a(x, D²u) − f)`, with the step `t` halved whenever the
//! residual increases. When the verified constants make the operator near
//! the Laplacian with constant `K < 1`, the undamped step `t = 1` contracts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::linear::{IterationRecord, IterationTrace};
use crate::operators::{invert_laplacian, second_derivative, MEAN_COMPATIBILITY_TOL};
use crate::report::Json;

/// Default sampling box half-width for condition verification.
pub const DEFAULT_SAMPLE_BOX: f64 = 10.0;

/// Margin above which a sampled violation counts as a genuine counterexample
/// rather than rounding noise.
const VIOLATION_MARGIN: f64 = 1e-12;

/// Evaluation function of a [`CaratheodoryFn`]: arguments are the point `x`
/// and the derivative array `ξ`.
pub type SymbolFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// A Carathéodory symbol `a(x, ξ)` with `ξ ∈ ℝ^{N²}` in row-major order
/// (`ξ_{iN+j}` pairs with `∂_i∂_j`), together with the box `[−R, R]^{N²}`
/// on which conditions are sampled.
pub struct CaratheodoryFn {
    n_gens: usize,
    sample_box: f64,
    eval: Box<SymbolFn>,
}

impl CaratheodoryFn {
    pub fn new<F>(n_gens: usize, eval: F) -> CaratheodoryFn
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        CaratheodoryFn {
            n_gens,
            sample_box: DEFAULT_SAMPLE_BOX,
            eval: Box::new(eval),
        }
    }

    pub fn with_sample_box(mut self, half_width: f64) -> CaratheodoryFn {
        self.sample_box = half_width;
        self
    }

    /// The trace symbol `a(x, ξ) = Tr ξ`, whose operator is the Laplacian.
    pub fn trace(n_gens: usize) -> CaratheodoryFn {
        CaratheodoryFn::new(n_gens, move |_x, xi| trace_of(xi, n_gens))
    }

    /// `a(x, ξ) = s · Tr ξ`.
    pub fn scaled_trace(n_gens: usize, s: f64) -> CaratheodoryFn {
        CaratheodoryFn::new(n_gens, move |_x, xi| s * trace_of(xi, n_gens))
    }

    /// `a(x, ξ) = Tr ξ + amp · sin(Tr ξ)`: a bounded nonlinear perturbation
    /// of the Laplacian.
    pub fn trace_sin(n_gens: usize, amp: f64) -> CaratheodoryFn {
        CaratheodoryFn::new(n_gens, move |_x, xi| {
            let t = trace_of(xi, n_gens);
            t + amp * t.sin()
        })
    }

    /// The linear symbol `a(x, ξ) = Σ c_ij(x) ξ_{ij}` of a coefficient
    /// field. Off-grid points use the nearest grid node.
    pub fn from_coefficients(coeffs: &crate::cordes::CoefficientField) -> CaratheodoryFn {
        let n = coeffs.n_gens();
        let grid = coeffs.grid().clone();
        let tables: Vec<Vec<f64>> = coeffs
            .entries()
            .iter()
            .map(|e| e.values().to_vec())
            .collect();
        CaratheodoryFn::new(n, move |x, xi| {
            let m = grid.points_per_axis();
            let h = grid.spacing();
            let mut flat = 0usize;
            for &coord in x {
                let j = (coord / h).round().rem_euclid(m as f64) as usize % m;
                flat = flat * m + j;
            }
            tables
                .iter()
                .zip(xi.iter())
                .map(|(t, &v)| t[flat] * v)
                .sum()
        })
    }

    pub fn n_gens(&self) -> usize {
        self.n_gens
    }

    pub fn sample_box(&self) -> f64 {
        self.sample_box
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.eval)(x, xi)
    }
}

fn trace_of(xi: &[f64], n: usize) -> f64 {
    (0..n).map(|i| xi[i * n + i]).sum()
}

/// Pointwise evaluation of `a` at the grid nodes and the N² second
/// derivatives of `u`.
pub fn apply(a: &CaratheodoryFn, u: &ScalarField) -> Result<ScalarField> {
    let n = a.n_gens();
    if n != u.grid().dim() {
        return Err(Error::GridMismatch(format!(
            "symbol with {} generators applied on a {}-dimensional grid",
            n,
            u.grid().dim()
        )));
    }
    let grid = u.grid().clone();
    let mut derivs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            derivs.push(second_derivative(u, i, j)?);
        }
    }
    let mut xi = vec![0.0; n * n];
    let mut x = vec![0.0; grid.dim()];
    let mut values = Vec::with_capacity(grid.total_points());
    for flat in 0..grid.total_points() {
        grid.coords(flat, &mut x);
        for (slot, d) in xi.iter_mut().zip(derivs.iter()) {
            *slot = d.values()[flat];
        }
        values.push(a.eval(&x, &xi));
    }
    ScalarField::from_values(grid, values)
}

/// Which structure condition a report is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionKind {
    C1,
    C2,
}

impl ConditionKind {
    fn as_str(self) -> &'static str {
        match self {
            ConditionKind::C1 => "C1",
            ConditionKind::C2 => "C2",
        }
    }
}

/// Constants a condition was checked with.
#[derive(Debug, Clone, Copy)]
pub enum ConditionParams {
    C1 { m: f64 },
    C2 { alpha: f64, gamma: f64, delta: f64 },
}

/// A sampled violation: re-evaluating `a` at these coordinates reproduces
/// `lhs` and `rhs` with the inequality genuinely broken.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub tau: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Result of a falsification run.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub condition: ConditionKind,
    pub params: ConditionParams,
    pub samples_tested: usize,
    pub seed: u64,
    pub sample_box: f64,
    pub counterexample: Option<Counterexample>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }

    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("condition", Json::from(self.condition.as_str()));
        match self.params {
            ConditionParams::C1 { m } => {
                doc.push("m", Json::Float(m));
            }
            ConditionParams::C2 {
                alpha,
                gamma,
                delta,
            } => {
                doc.push("alpha", Json::Float(alpha));
                doc.push("gamma", Json::Float(gamma));
                doc.push("delta", Json::Float(delta));
            }
        }
        doc.push("samples_tested", Json::from(self.samples_tested));
        doc.push("seed", Json::from(self.seed));
        doc.push("sample_box", Json::Float(self.sample_box));
        doc.push("passed", Json::Bool(self.passed()));
        match &self.counterexample {
            None => {
                doc.push("counterexample", Json::Null);
            }
            Some(ce) => {
                let mut c = Json::object();
                c.push(
                    "x",
                    Json::Array(ce.x.iter().map(|&v| Json::Float(v)).collect()),
                );
                c.push(
                    "xi",
                    Json::Array(ce.xi.iter().map(|&v| Json::Float(v)).collect()),
                );
                c.push(
                    "tau",
                    Json::Array(ce.tau.iter().map(|&v| Json::Float(v)).collect()),
                );
                c.push("lhs", Json::Float(ce.lhs));
                c.push("rhs", Json::Float(ce.rhs));
                doc.push("counterexample", c);
            }
        }
        doc
    }
}

/// Additive-recurrence low-discrepancy sequence in `[0, 1)^dim` with a
/// seeded starting shift. The step vector uses powers of the generalized
/// golden ratio, the root of `x^{dim+1} = x + 1`.
struct QuasiSampler {
    steps: Vec<f64>,
    state: Vec<f64>,
}

impl QuasiSampler {
    fn new(dim: usize, seed: u64) -> QuasiSampler {
        let d = dim as f64;
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (phi + 1.0).powf(1.0 / (d + 1.0));
        }
        let mut steps = Vec::with_capacity(dim);
        let mut a = 1.0;
        for _ in 0..dim {
            a /= phi;
            steps.push(a);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = (0..dim).map(|_| rng.gen::<f64>()).collect();
        QuasiSampler { steps, state }
    }

    fn next_into(&mut self, out: &mut [f64]) {
        for (slot, (s, step)) in out
            .iter_mut()
            .zip(self.state.iter_mut().zip(self.steps.iter()))
        {
            *s = (*s + step).fract();
            *slot = *s;
        }
    }
}

/// Falsification run for (C1) with constant `M > 0`.
pub fn verify_c1(
    a: &CaratheodoryFn,
    m: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if !(m > 0.0) {
        return Err(Error::Config(format!("M must be positive, got {}", m)));
    }
    sample_condition(
        a,
        ConditionKind::C1,
        ConditionParams::C1 { m },
        n_samples,
        seed,
    )
}

/// Falsification run for (C2) with `α > 0`, `γ, δ ≥ 0`.
pub fn verify_c2(
    a: &CaratheodoryFn,
    alpha: f64,
    gamma: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if !(alpha > 0.0) || gamma < 0.0 || delta < 0.0 {
        return Err(Error::Config(format!(
            "need alpha > 0 and gamma, delta >= 0; got alpha {}, gamma {}, delta {}",
            alpha, gamma, delta
        )));
    }
    sample_condition(
        a,
        ConditionKind::C2,
        ConditionParams::C2 {
            alpha,
            gamma,
            delta,
        },
        n_samples,
        seed,
    )
}

fn sample_condition(
    a: &CaratheodoryFn,
    kind: ConditionKind,
    params: ConditionParams,
    n_samples: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if n_samples == 0 {
        return Err(Error::EmptySample);
    }
    let n = a.n_gens();
    let width = n * n;
    let r = a.sample_box();
    let dim = n + 2 * width;
    let mut sampler = QuasiSampler::new(dim, seed);
    let mut unit = vec![0.0; dim];
    let mut x = vec![0.0; n];
    let mut xi = vec![0.0; width];
    let mut tau = vec![0.0; width];
    let mut xi_plus = vec![0.0; width];
    let period = std::f64::consts::TAU;

    let mut counterexample = None;
    for _ in 0..n_samples {
        sampler.next_into(&mut unit);
        for (i, slot) in x.iter_mut().enumerate() {
            *slot = period * unit[i];
        }
        for (i, slot) in xi.iter_mut().enumerate() {
            *slot = r * (2.0 * unit[n + i] - 1.0);
        }
        for (i, slot) in tau.iter_mut().enumerate() {
            *slot = r * (2.0 * unit[n + width + i] - 1.0);
        }
        for ((p, &base), &t) in xi_plus.iter_mut().zip(xi.iter()).zip(tau.iter()) {
            *p = base + t;
        }
        let delta_a = a.eval(&x, &xi_plus) - a.eval(&x, &xi);
        let trace_tau = trace_of(&tau, n);
        let (lhs, rhs, violated) = match params {
            ConditionParams::C1 { m } => {
                let lhs = delta_a.abs();
                let rhs = m * trace_tau.abs();
                (lhs, rhs, rhs - lhs > VIOLATION_MARGIN)
            }
            ConditionParams::C2 {
                alpha,
                gamma,
                delta,
            } => {
                let lhs = (trace_tau - alpha * delta_a).abs();
                let norm_tau = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
                let rhs = gamma * norm_tau + delta * trace_tau.abs();
                (lhs, rhs, lhs - rhs > VIOLATION_MARGIN)
            }
        };
        if violated {
            counterexample = Some(Counterexample {
                x: x.clone(),
                xi: xi.clone(),
                tau: tau.clone(),
                lhs,
                rhs,
            });
            break;
        }
    }
    Ok(ConditionReport {
        condition: kind,
        params,
        samples_tested: n_samples,
        seed,
        sample_box: r,
        counterexample,
    })
}

/// The admissibility quantity `√((γ+δ)(γC₀² + δ))` against its limit
/// `1 + αM`.
#[derive(Debug, Clone, Copy)]
pub struct Admissibility {
    pub value: f64,
    pub limit: f64,
    pub satisfied: bool,
}

pub fn admissibility(alpha: f64, m: f64, gamma: f64, delta: f64, c0: f64) -> Admissibility {
    let value = ((gamma + delta) * (gamma * c0 * c0 + delta)).sqrt();
    let limit = 1.0 + alpha * m;
    Admissibility {
        value,
        limit,
        satisfied: value < limit,
    }
}

impl Admissibility {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("value", Json::Float(self.value));
        doc.push("limit", Json::Float(self.limit));
        doc.push("satisfied", Json::Bool(self.satisfied));
        doc
    }
}

/// Options for [`solve`].
#[derive(Debug, Clone)]
pub struct NonlinearOptions {
    /// Nearness scaling of the update step.
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Initial damping factor in `(0, 1]`.
    pub initial_step: f64,
    /// Budget of step halvings before giving up.
    pub max_halvings: usize,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        NonlinearOptions {
            alpha: 1.0,
            tol: 1e-9,
            max_iter: 10_000,
            initial_step: 1.0,
            max_halvings: 20,
        }
    }
}

/// Damped image-space iteration for `a(x, {∂_i∂_j u}) = f`.
///
/// Iterates `w ← w − t·α·(a(x, D²u) − f)` with `u = Δ⁻¹w`, projecting the
/// image variable onto zero mean each step. Requires `mean(f) = 0`; returns
/// the iterate once `‖a(x, D²u) − f‖_{L²} ≤ tol·‖f‖_{L²}`.
pub fn solve(
    a: &CaratheodoryFn,
    f: &ScalarField,
    opts: &NonlinearOptions,
) -> Result<(ScalarField, IterationTrace)> {
    if !(opts.alpha > 0.0) || !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config(
            "nonlinear solver needs alpha > 0, tol > 0 and max_iter >= 1".into(),
        ));
    }
    if !(opts.initial_step > 0.0 && opts.initial_step <= 1.0) {
        return Err(Error::Config(format!(
            "damping step must lie in (0, 1], got {}",
            opts.initial_step
        )));
    }
    let f_norm = f.l2_norm();
    if f.mean().abs() > MEAN_COMPATIBILITY_TOL * f_norm {
        return Err(Error::Solvability(format!(
            "right-hand side has mean {:e}; the torus problem requires zero mean",
            f.mean()
        )));
    }

    let grid = f.grid().clone();
    let mut w = ScalarField::zero(&grid);
    let mut u = ScalarField::zero(&grid);
    let mut res_field = apply(a, &u)?.sub(f);
    let mut res_norm = res_field.l2_norm();
    let mut t = opts.initial_step;
    let mut halvings = 0usize;

    let mut trace = IterationTrace::default();
    let mut prev_increment: Option<f64> = None;

    if res_norm <= opts.tol * f_norm {
        trace.converged = true;
        return Ok((u, trace));
    }

    for iter in 1..=opts.max_iter {
        let (w_next, u_next, res_next, res_next_norm, mass) = loop {
            let raw = w.sub(&res_field.scaled(t * opts.alpha));
            let mass = raw.mean();
            let w_cand = raw.shifted(mass);
            let u_cand = invert_laplacian(&w_cand)?;
            let res_cand = apply(a, &u_cand)?.sub(f);
            let cand_norm = res_cand.l2_norm();
            if cand_norm <= res_norm || cand_norm <= opts.tol * f_norm {
                break (w_cand, u_cand, res_cand, cand_norm, mass);
            }
            if halvings >= opts.max_halvings {
                return Err(Error::NonConvergence {
                    trace: Box::new(trace),
                });
            }
            t *= 0.5;
            halvings += 1;
        };
        let increment = w_next.sub(&w).l2_norm();
        let contraction_factor = match prev_increment {
            Some(prev) if prev > 0.0 => Some(increment / prev),
            _ => None,
        };
        trace.records.push(IterationRecord {
            iter,
            residual: res_next_norm,
            increment,
            contraction_factor,
            projected_mass: mass,
        });
        trace.iterations = iter;
        prev_increment = Some(increment);
        w = w_next;
        u = u_next;
        res_field = res_next;
        res_norm = res_next_norm;

        if res_norm <= opts.tol * f_norm {
            trace.converged = true;
            return Ok((u, trace));
        }
    }
    Err(Error::NonConvergence {
        trace: Box::new(trace),
    })
}
