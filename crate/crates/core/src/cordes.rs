//! Coefficient-field validation: ellipticity, the Cordes condition, the
//! pointwise scaling function, and the contraction bound.
//!
//! For an N×N field of bounded coefficients `c_ij(x)` the Cordes condition
//! asks for `(Σ_i c_ii)² / Σ_{ij} c_ij² ≥ N − 1 + ε` at every point, for some
//! `ε ∈ (0, 1)`. Together with the quadratic-form lower bound it makes the
//! scaled operator `I − c(x)·C(x)` pointwise small in Frobenius norm
//! (`‖I − cC‖²_F = N − ratio ≤ 1 − ε`), which is what drives the fixed-point
//! solver's contraction.
//!
//! All infima here are taken over the grid samples only. A report is a
//! pointwise verification on the grid, not a certificate for the essential
//! infimum of an L^∞ coefficient.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use crate::report::Json;

/// N×N array of bounded scalar coefficient fields on one shared grid.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    n_gens: usize,
    entries: Vec<ScalarField>, // row-major, length n_gens²
    bound: f64,
}

impl CoefficientField {
    /// Wrap `n × n` entry fields given in row-major order. All entries must
    /// share one grid. The sup bound is computed from the samples.
    pub fn new(n_gens: usize, entries: Vec<ScalarField>) -> Result<CoefficientField> {
        if n_gens == 0 {
            return Err(Error::Config("coefficient field needs n >= 1".into()));
        }
        if entries.len() != n_gens * n_gens {
            return Err(Error::Config(format!(
                "expected {} entry fields, got {}",
                n_gens * n_gens,
                entries.len()
            )));
        }
        let grid = entries[0].grid().clone();
        for (idx, e) in entries.iter().enumerate() {
            if e.grid() != &grid {
                return Err(Error::GridMismatch(format!(
                    "coefficient entry {} lives on a different grid",
                    idx
                )));
            }
        }
        let bound = entries
            .iter()
            .flat_map(|e| e.values().iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        Ok(CoefficientField {
            n_gens,
            entries,
            bound,
        })
    }

    /// The identity coefficients `c_ij = δ_ij` with `n = dim(grid)`.
    pub fn identity(grid: &Grid) -> CoefficientField {
        Self::constant_matrix(grid, &identity_values(grid.dim())).unwrap()
    }

    /// Constant diagonal coefficients.
    pub fn diagonal(grid: &Grid, diag: &[f64]) -> Result<CoefficientField> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            m[i * n + i] = d;
        }
        Self::constant_matrix(grid, &m)
    }

    /// Constant coefficients from a row-major `n²` slice.
    pub fn constant_matrix(grid: &Grid, matrix: &[f64]) -> Result<CoefficientField> {
        let n = (matrix.len() as f64).sqrt().round() as usize;
        if n * n != matrix.len() || n == 0 {
            return Err(Error::Config(format!(
                "constant coefficient matrix must be square, got {} entries",
                matrix.len()
            )));
        }
        let entries = matrix
            .iter()
            .map(|&v| ScalarField::constant(grid, v))
            .collect::<Result<Vec<_>>>()?;
        CoefficientField::new(n, entries)
    }

    pub fn n_gens(&self) -> usize {
        self.n_gens
    }

    pub fn grid(&self) -> &Grid {
        self.entries[0].grid()
    }

    /// Sup of `|c_ij(x)|` over all entries and grid samples.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.n_gens + j]
    }

    pub fn entries(&self) -> &[ScalarField] {
        &self.entries
    }

    /// All entries multiplied by `s`.
    pub fn scaled(&self, s: f64) -> CoefficientField {
        let entries = self.entries.iter().map(|e| e.scaled(s)).collect();
        CoefficientField::new(self.n_gens, entries).expect("scaling preserves validity")
    }

    /// Gather the N² coefficient values at one grid point (row-major).
    pub fn matrix_at(&self, flat: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_gens * self.n_gens);
        for (slot, entry) in out.iter_mut().zip(self.entries.iter()) {
            *slot = entry.values()[flat];
        }
    }
}

fn identity_values(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Infimum over grid points of the smallest eigenvalue of the symmetric part
/// `(c_ij + c_ji)/2`. A negative return value reports the violation; it is
/// not an error.
pub fn ellipticity_margin(coeffs: &CoefficientField) -> f64 {
    let n = coeffs.n_gens();
    let total = coeffs.grid().total_points();
    let mut buf = vec![0.0; n * n];
    let mut margin = f64::INFINITY;
    for flat in 0..total {
        coeffs.matrix_at(flat, &mut buf);
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (buf[i * n + j] + buf[j * n + i]));
        let eigen = sym.symmetric_eigen();
        let smallest = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if smallest < margin {
            margin = smallest;
        }
    }
    margin
}

/// Infimum over grid points of `(Σ_i c_ii)² / Σ_{ij} c_ij²  −  (N − 1)`.
///
/// The returned ε lies in `(0, 1]` exactly when the Cordes condition holds
/// pointwise on the grid; ε = 1 is attained by scalar multiples of the
/// identity.
pub fn cordes_epsilon(coeffs: &CoefficientField) -> Result<f64> {
    Ok(min_trace_ratio(coeffs)? - (coeffs.n_gens() as f64 - 1.0))
}

/// Infimum over grid points of the ratio `(Σ_i c_ii)² / Σ_{ij} c_ij²`.
pub fn min_trace_ratio(coeffs: &CoefficientField) -> Result<f64> {
    let n = coeffs.n_gens();
    let total = coeffs.grid().total_points();
    let mut buf = vec![0.0; n * n];
    let mut min_ratio = f64::INFINITY;
    for flat in 0..total {
        coeffs.matrix_at(flat, &mut buf);
        let (trace, frob2) = trace_and_frob2(&buf, n);
        if frob2 == 0.0 {
            return Err(Error::DegenerateCoefficients(format!(
                "all coefficients vanish at grid point {}",
                flat
            )));
        }
        let ratio = trace * trace / frob2;
        if ratio < min_ratio {
            min_ratio = ratio;
        }
    }
    Ok(min_ratio)
}

/// Pointwise scaling function `c(x) = Σ_i c_ii(x) / Σ_{ij} c_ij(x)²`.
pub fn scaling_function(coeffs: &CoefficientField) -> Result<ScalarField> {
    let n = coeffs.n_gens();
    let total = coeffs.grid().total_points();
    let mut buf = vec![0.0; n * n];
    let mut values = Vec::with_capacity(total);
    for flat in 0..total {
        coeffs.matrix_at(flat, &mut buf);
        let (trace, frob2) = trace_and_frob2(&buf, n);
        if frob2 == 0.0 {
            return Err(Error::DegenerateCoefficients(format!(
                "all coefficients vanish at grid point {}",
                flat
            )));
        }
        values.push(trace / frob2);
    }
    ScalarField::from_values(coeffs.grid().clone(), values)
}

fn trace_and_frob2(matrix: &[f64], n: usize) -> (f64, f64) {
    let mut trace = 0.0;
    let mut frob2 = 0.0;
    for i in 0..n {
        trace += matrix[i * n + i];
    }
    for v in matrix {
        frob2 += v * v;
    }
    (trace, frob2)
}

/// The bound `√(1−ε) · C₀` that must stay below 1 for the fixed-point map to
/// contract. Strictly requires `ε ∈ (0, 1)` and `c0 > 0`.
pub fn contraction_bound(epsilon: f64, c0_const: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 1), got {}",
            epsilon
        )));
    }
    if c0_const <= 0.0 {
        return Err(Error::Config(format!(
            "the aggregate constant must be positive, got {}",
            c0_const
        )));
    }
    Ok((1.0 - epsilon).sqrt() * c0_const)
}

/// Aggregated verdict of the coefficient checks.
///
/// `passed` requires a positive ellipticity margin, `ε ∈ (0, 1]`, and a
/// contraction bound below 1. `ε = 1` (the isotropic limit, attained by
/// multiples of the identity) collapses the bound to 0 and passes.
#[derive(Debug, Clone)]
pub struct CordesReport {
    pub epsilon: f64,
    pub ratio_min: f64,
    pub elliptic_margin: f64,
    /// Aggregate constant used for the contraction bound.
    pub c0: f64,
    pub contraction_bound: f64,
    pub passed: bool,
}

impl CordesReport {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("epsilon", Json::Float(self.epsilon));
        doc.push("ratio_min", Json::Float(self.ratio_min));
        doc.push("elliptic_margin", Json::Float(self.elliptic_margin));
        doc.push("c0", Json::Float(self.c0));
        doc.push("contraction_bound", Json::Float(self.contraction_bound));
        doc.push("passed", Json::Bool(self.passed));
        doc
    }
}

/// Run all coefficient checks with the given aggregate constant.
pub fn check(coeffs: &CoefficientField, c0_const: f64) -> Result<CordesReport> {
    if c0_const <= 0.0 {
        return Err(Error::Config(format!(
            "the aggregate constant must be positive, got {}",
            c0_const
        )));
    }
    let ratio_min = min_trace_ratio(coeffs)?;
    let epsilon = ratio_min - (coeffs.n_gens() as f64 - 1.0);
    let elliptic_margin = ellipticity_margin(coeffs);
    // At ε = 1 the bound is exactly 0; (1 - ε) is clamped so rounding noise
    // above 1 cannot produce a NaN.
    let contraction_bound = (1.0 - epsilon).max(0.0).sqrt() * c0_const;
    let passed = elliptic_margin > 0.0 && epsilon > 0.0 && contraction_bound < 1.0;
    Ok(CordesReport {
        epsilon,
        ratio_min,
        elliptic_margin,
        c0: c0_const,
        contraction_bound,
        passed,
    })
}

/// `‖I − c(x)·C(x)‖²_F` at a single grid point, straight from the entries.
/// Used by tests to confirm the algebraic identity with `N − ratio(x)`.
pub fn frobenius_defect_at(coeffs: &CoefficientField, scaling: &ScalarField, flat: usize) -> f64 {
    let n = coeffs.n_gens();
    let c = scaling.values()[flat];
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let term = delta - c * coeffs.entry(i, j).values()[flat];
            sum += term * term;
        }
    }
    sum
}
