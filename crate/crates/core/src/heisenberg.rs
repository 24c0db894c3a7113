//! Truncated Schrödinger-representation matrices of the Heisenberg group.
//!
//! At parameter `λ ≠ 0` the group generators and the positive sub-Laplacian
//! `L = −Σ(X_i² + Y_i²)` become infinite matrices in the Hermite-function
//! basis: `π_λ(L)` is diagonal with entries `|λ|(2k+1)` and `π_λ(X)`,
//! `π_λ(Y)` are banded with bandwidth 1. This module builds finite
//! truncations of those matrices, the product `X·Y·L⁻¹` whose entries have
//! closed forms, and norm reports comparing the max-entry value against the
//! truncated spectral norm.
//!
//! Two sign conventions for the second generator are in circulation and they
//! are **not** equivalent:
//!
//! * [`rep_y`] uses the closed-form convention, with `−i√(k/2)` on the
//!   subdiagonal. That is the convention under which the entry formulas of
//!   `X·Y·L⁻¹` (constant `−i/2` diagonal and the two band formulas) hold
//!   verbatim, and it is the one all entry-level reports use. Under it,
//!   however, `π(Y) = i·π(X)`: the pair commutes and `X² + Y² = 0`.
//! * [`rep_y_canonical`] flips the subdiagonal sign (and carries `sgn λ`),
//!   which makes `π(Y)` skew-Hermitian, restores the commutation relation
//!   `[π(X), π(Y)] = iλ·I`, and gives `−(X² + Y²) = π(L)`. Fiberwise solves
//!   use this convention, since they rely on the sub-Laplacian identity.
//!
//! Truncation cuts sums at the matrix edge, so products of banded matrices
//! are only trustworthy away from the last rows and columns; "interior"
//! indices (at most `size − 3` for bandwidth-2 products) are exactly the
//! entries of the untruncated operator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::report::Json;
use std::io::{self, Write};

/// Row/column margin that truncation can corrupt in a bandwidth-2 product.
pub const INTERIOR_MARGIN: usize = 3;

/// Truncated matrix of an infinitesimal representation at fixed `λ`.
#[derive(Debug, Clone)]
pub struct RepMatrix {
    lambda: f64,
    size: usize,
    entries: DMatrix<Complex64>,
    bandwidth: usize,
}

impl RepMatrix {
    fn new(lambda: f64, entries: DMatrix<Complex64>) -> RepMatrix {
        let size = entries.nrows();
        let mut bandwidth = 0usize;
        for k in 0..size {
            for l in 0..size {
                if entries[(k, l)].norm_sqr() != 0.0 {
                    bandwidth = bandwidth.max(k.abs_diff(l));
                }
            }
        }
        RepMatrix {
            lambda,
            size,
            entries,
            bandwidth,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Largest `|k − l|` carrying a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn entry(&self, k: usize, l: usize) -> Complex64 {
        self.entries[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Largest index that truncation provably does not affect for
    /// bandwidth-2 products.
    pub fn interior_limit(&self) -> usize {
        self.size.saturating_sub(INTERIOR_MARGIN)
    }

    /// CSV dump: `row,col,re,im,interior`, nonzero entries only.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "row,col,re,im,interior")?;
        let limit = self.interior_limit();
        for k in 0..self.size {
            for l in 0..self.size {
                let z = self.entries[(k, l)];
                if z.norm_sqr() == 0.0 {
                    continue;
                }
                let interior = k <= limit && l <= limit;
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e},{}",
                    k,
                    l,
                    z.re,
                    z.im,
                    if interior { 1 } else { 0 }
                )?;
            }
        }
        Ok(())
    }
}

fn validate(lambda: f64, size: usize) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Config(format!(
            "representation parameter must be finite and nonzero, got {}",
            lambda
        )));
    }
    if size < 4 {
        return Err(Error::Config(format!(
            "truncation size must be at least 4, got {}",
            size
        )));
    }
    Ok(lambda.abs())
}

/// Diagonal matrix of the positive sub-Laplacian: `|λ|(2k+1)` at `(k, k)`.
pub fn rep_l(lambda: f64, size: usize) -> Result<RepMatrix> {
    let al = validate(lambda, size)?;
    let mut m = DMatrix::zeros(size, size);
    for k in 0..size {
        m[(k, k)] = Complex64::new(al * (2 * k + 1) as f64, 0.0);
    }
    Ok(RepMatrix::new(lambda, m))
}

/// First generator: `√|λ|·√((k+1)/2)` at `(k, k+1)` and `−√|λ|·√(k/2)` at
/// `(k, k−1)` (a real skew-symmetric ladder matrix).
pub fn rep_x(lambda: f64, size: usize) -> Result<RepMatrix> {
    let al = validate(lambda, size)?;
    let s = al.sqrt();
    let mut m = DMatrix::zeros(size, size);
    for k in 0..size {
        if k + 1 < size {
            m[(k, k + 1)] = Complex64::new(s * (((k + 1) as f64) / 2.0).sqrt(), 0.0);
        }
        if k >= 1 {
            m[(k, k - 1)] = Complex64::new(-s * ((k as f64) / 2.0).sqrt(), 0.0);
        }
    }
    Ok(RepMatrix::new(lambda, m))
}

/// Second generator, closed-form convention: `i√|λ|·√((k+1)/2)` at
/// `(k, k+1)` and `−i√|λ|·√(k/2)` at `(k, k−1)`.
///
/// Equals `i·rep_x`, so it commutes with [`rep_x`]; this is the convention
/// the `X·Y·L⁻¹` entry formulas are written in. For the variant satisfying
/// the canonical commutation relation see [`rep_y_canonical`].
pub fn rep_y(lambda: f64, size: usize) -> Result<RepMatrix> {
    let al = validate(lambda, size)?;
    let s = al.sqrt();
    let mut m = DMatrix::zeros(size, size);
    for k in 0..size {
        if k + 1 < size {
            m[(k, k + 1)] = Complex64::new(0.0, s * (((k + 1) as f64) / 2.0).sqrt());
        }
        if k >= 1 {
            m[(k, k - 1)] = Complex64::new(0.0, -s * ((k as f64) / 2.0).sqrt());
        }
    }
    Ok(RepMatrix::new(lambda, m))
}

/// Second generator, canonical convention: `i·sgn(λ)·√|λ|` times the
/// position ladder matrix (both bands positive).
///
/// Skew-Hermitian, with `[rep_x, rep_y_canonical] = iλ·I` and
/// `−(rep_x² + rep_y_canonical²) = rep_l` on interior indices. It differs
/// from [`rep_y`] only in the sign of the subdiagonal band.
pub fn rep_y_canonical(lambda: f64, size: usize) -> Result<RepMatrix> {
    let al = validate(lambda, size)?;
    let s = lambda.signum() * al.sqrt();
    let mut m = DMatrix::zeros(size, size);
    for k in 0..size {
        if k + 1 < size {
            m[(k, k + 1)] = Complex64::new(0.0, s * (((k + 1) as f64) / 2.0).sqrt());
        }
        if k >= 1 {
            m[(k, k - 1)] = Complex64::new(0.0, s * ((k as f64) / 2.0).sqrt());
        }
    }
    Ok(RepMatrix::new(lambda, m))
}

/// The product `π(X)·π(Y)·π(L)⁻¹` on the truncation, with the diagonal
/// inverse formed entrywise (never numerically).
///
/// On interior indices the entries have λ-independent closed forms, exposed
/// by [`xy_linv_closed_entry`]: `−i/2` on the diagonal,
/// `(i/2)·√((l+1)(l+2))/(2l+5)` at `(l, l+2)` and
/// `(i/2)·√((l+2)(l+1))/(2l+1)` at `(l+2, l)`.
pub fn xy_linv(lambda: f64, size: usize) -> Result<RepMatrix> {
    let al = validate(lambda, size)?;
    let x = rep_x(lambda, size)?;
    let y = rep_y(lambda, size)?;
    let mut product = x.entries * y.entries;
    for l in 0..size {
        let inv = 1.0 / (al * (2 * l + 1) as f64);
        for k in 0..size {
            product[(k, l)] *= inv;
        }
    }
    Ok(RepMatrix::new(lambda, product))
}

/// Closed form for the `(row, col)` entry of `X·Y·L⁻¹`, valid on interior
/// indices of any truncation.
pub fn xy_linv_closed_entry(row: usize, col: usize) -> Complex64 {
    if row == col {
        Complex64::new(0.0, -0.5)
    } else if col == row + 2 {
        let l = row as f64;
        Complex64::new(0.0, 0.5 * ((l + 1.0) * (l + 2.0)).sqrt() / (2.0 * l + 5.0))
    } else if row == col + 2 {
        let l = col as f64;
        Complex64::new(0.0, 0.5 * ((l + 2.0) * (l + 1.0)).sqrt() / (2.0 * l + 1.0))
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Largest entry modulus of the truncation.
pub fn max_entry_norm(m: &RepMatrix) -> f64 {
    m.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value of the truncation.
pub fn spectral_norm(m: &RepMatrix) -> Result<f64> {
    let svd = m
        .entries
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or(Error::NormNonConvergence)?;
    Ok(svd
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max))
}

/// Aggregate constant `(Σ_{i,j=1..2n} c_pair²)^{1/2} = 2n·c_pair` obtained
/// by putting the same pairwise constant into every slot of the sum.
pub fn c0_constant(n: usize, c_pair: f64) -> f64 {
    let count = (2 * n) * (2 * n);
    (count as f64 * c_pair * c_pair).sqrt()
}

/// Norm table for `X·Y·L⁻¹` across truncation sizes, with the closed-form
/// `(2, 0)` entry and the comparison against the classical value 1/2 quoted
/// for this operator's norm.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub lambda: f64,
    pub rows: Vec<NormRow>,
    /// Closed-form `(2, 0)` entry, `i·√2/2`.
    pub closed_form_entry_2_0: Complex64,
    /// The classical claimed value for the operator norm.
    pub claimed_max_entry: f64,
    pub max_entry_exceeds_claimed: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NormRow {
    pub size: usize,
    pub max_entry: f64,
    pub spectral_norm: f64,
}

/// Build the norm table at the given truncation sizes.
pub fn norm_report(lambda: f64, sizes: &[usize]) -> Result<NormReport> {
    if sizes.is_empty() {
        return Err(Error::Config("norm report needs at least one size".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let m = xy_linv(lambda, size)?;
        rows.push(NormRow {
            size,
            max_entry: max_entry_norm(&m),
            spectral_norm: spectral_norm(&m)?,
        });
    }
    let claimed = 0.5;
    let max_entry_exceeds_claimed = rows.iter().any(|r| r.max_entry > claimed + 1e-12);
    Ok(NormReport {
        lambda,
        rows,
        closed_form_entry_2_0: xy_linv_closed_entry(2, 0),
        claimed_max_entry: claimed,
        max_entry_exceeds_claimed,
    })
}

impl NormReport {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("lambda", Json::Float(self.lambda));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = Json::object();
                row.push("size", Json::from(r.size));
                row.push("max_entry", Json::Float(r.max_entry));
                row.push("spectral_norm_truncated", Json::Float(r.spectral_norm));
                row
            })
            .collect();
        doc.push("sizes", Json::Array(rows));
        doc.push(
            "closed_form_entry_2_0_re",
            Json::Float(self.closed_form_entry_2_0.re),
        );
        doc.push(
            "closed_form_entry_2_0_im",
            Json::Float(self.closed_form_entry_2_0.im),
        );
        doc.push("claimed_max_entry", Json::Float(self.claimed_max_entry));
        doc.push(
            "max_entry_exceeds_claimed",
            Json::Bool(self.max_entry_exceeds_claimed),
        );
        doc
    }
}

/// The aggregate constant for the group of `2n` generators, reported next to
/// the alternative value `n√2` that circulates for the same quantity; the
/// two disagree by a factor `√2` and both ε-ranges are printed.
#[derive(Debug, Clone, Copy)]
pub struct C0Report {
    pub n: usize,
    pub c_pair: f64,
    /// `2n·c_pair`, from summing the pairwise constant over all slots.
    pub c0: f64,
    /// The alternative value, `n√2` at `c_pair = 1/2` (scaled accordingly).
    pub c0_alt: f64,
    /// Lower end of the ε-range `√(1−ε)·c0 < 1`.
    pub epsilon_min: f64,
    /// Lower end of the ε-range for `c0_alt`; equals `1 − 1/(2n²)` at
    /// `c_pair = 1/2`.
    pub epsilon_min_alt: f64,
    pub values_disagree: bool,
}

pub fn c0_report(n: usize, c_pair: f64) -> Result<C0Report> {
    if n == 0 || !(c_pair > 0.0) {
        return Err(Error::Config(
            "c0 report needs n >= 1 and a positive pairwise constant".into(),
        ));
    }
    let c0 = c0_constant(n, c_pair);
    let c0_alt = (n as f64) * std::f64::consts::SQRT_2 * (2.0 * c_pair);
    Ok(C0Report {
        n,
        c_pair,
        c0,
        c0_alt,
        epsilon_min: 1.0 - 1.0 / (c0 * c0),
        epsilon_min_alt: 1.0 - 1.0 / (c0_alt * c0_alt),
        values_disagree: (c0 - c0_alt).abs() > 1e-15 * c0.max(1.0),
    })
}

impl C0Report {
    pub fn to_json(&self) -> Json {
        let mut doc = Json::object();
        doc.push("n", Json::from(self.n));
        doc.push("c_pair", Json::Float(self.c_pair));
        doc.push("c0", Json::Float(self.c0));
        doc.push("c0_alt", Json::Float(self.c0_alt));
        doc.push("epsilon_min", Json::Float(self.epsilon_min));
        doc.push("epsilon_min_alt", Json::Float(self.epsilon_min_alt));
        doc.push("values_disagree", Json::Bool(self.values_disagree));
        doc
    }
}

/// Solve the constant-coefficient fiber system
/// `(Σ c_ij·π_λ(Z_i)π_λ(Z_j)) û = f̂` on a truncation.
///
/// The generators are `Z_i = X_i` for `i < n` and `Z_{n+i} = Y_i`, built in
/// the canonical convention (so that the identity coefficients reproduce
/// `−π(L)`); for `n > 1` the one-dimensional ladder matrices are lifted by
/// Kronecker products and the full dimension is `size^n`.
pub fn fiber_solve(
    lambda: f64,
    coeffs: &DMatrix<f64>,
    f_hat: &DVector<Complex64>,
    size: usize,
) -> Result<DVector<Complex64>> {
    validate(lambda, size)?;
    let n_gens = coeffs.nrows();
    if coeffs.ncols() != n_gens || n_gens < 2 || !n_gens.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "coefficient matrix must be square with an even side >= 2, got {}x{}",
            n_gens,
            coeffs.ncols()
        )));
    }
    let n = n_gens / 2;
    let full = size
        .checked_pow(n as u32)
        .filter(|&d| d <= 1 << 14)
        .ok_or_else(|| {
            Error::Config(format!(
                "truncation {}^{} is too large for a dense fiber solve",
                size, n
            ))
        })?;
    if f_hat.len() != full {
        return Err(Error::Config(format!(
            "right-hand side has length {}, expected {}^{} = {}",
            f_hat.len(),
            size,
            n,
            full
        )));
    }

    let x1 = rep_x(lambda, size)?.entries;
    let y1 = rep_y_canonical(lambda, size)?.entries;
    let generators: Vec<DMatrix<Complex64>> = (0..n_gens)
        .map(|g| {
            let (axis, one_d) = if g < n { (g, &x1) } else { (g - n, &y1) };
            lift_to_axis(one_d, axis, n, size)
        })
        .collect();

    let mut system = DMatrix::<Complex64>::zeros(full, full);
    for i in 0..n_gens {
        for j in 0..n_gens {
            let c = coeffs[(i, j)];
            if c == 0.0 {
                continue;
            }
            system += (&generators[i] * &generators[j]).scale(c);
        }
    }

    let solution = system
        .clone()
        .lu()
        .solve(f_hat)
        .ok_or_else(|| Error::SingularTruncation("fiber system matrix is singular".into()))?;
    let residual = (&system * &solution - f_hat).norm();
    if residual > 1e-10 * f_hat.norm() {
        return Err(Error::SingularTruncation(format!(
            "fiber solve residual {:e} exceeds tolerance",
            residual
        )));
    }
    Ok(solution)
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with `m` in slot `axis` of `n` factors.
fn lift_to_axis(
    m: &DMatrix<Complex64>,
    axis: usize,
    n: usize,
    size: usize,
) -> DMatrix<Complex64> {
    let mut acc = DMatrix::<Complex64>::identity(1, 1);
    for slot in 0..n {
        let factor = if slot == axis {
            m.clone()
        } else {
            DMatrix::identity(size, size)
        };
        acc = acc.kronecker(&factor);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn assert_close(z: Complex64, re: f64, im: f64, tol: f64) {
        assert!(
            (z.re - re).abs() <= tol && (z.im - im).abs() <= tol,
            "expected {}+{}i, got {}",
            re,
            im,
            z
        );
    }

    #[test]
    fn rep_l_entries() {
        let l = rep_l(1.0, 8).unwrap();
        assert_close(l.entry(0, 0), 1.0, 0.0, 0.0);
        assert_close(l.entry(1, 1), 3.0, 0.0, 0.0);
        assert_close(l.entry(0, 1), 0.0, 0.0, 0.0);
        assert_eq!(l.bandwidth(), 0);

        let l2 = rep_l(2.0, 8).unwrap();
        assert_close(l2.entry(1, 1), 6.0, 0.0, 0.0);

        assert!(matches!(rep_l(0.0, 8), Err(Error::Config(_))));
        assert!(matches!(rep_l(1.0, 3), Err(Error::Config(_))));
    }

    #[test]
    fn generator_entries() {
        let x = rep_x(1.0, 8).unwrap();
        assert_close(x.entry(0, 1), SQRT_HALF, 0.0, 1e-16);
        assert_close(x.entry(1, 0), -SQRT_HALF, 0.0, 1e-16);
        assert_eq!(x.bandwidth(), 1);

        let y = rep_y(1.0, 8).unwrap();
        assert_close(y.entry(0, 1), 0.0, SQRT_HALF, 1e-16);
        assert_close(y.entry(1, 0), 0.0, -SQRT_HALF, 1e-16);

        let yc = rep_y_canonical(1.0, 8).unwrap();
        assert_close(yc.entry(0, 1), 0.0, SQRT_HALF, 1e-16);
        assert_close(yc.entry(1, 0), 0.0, SQRT_HALF, 1e-16);
    }

    #[test]
    fn lambda_scaling_laws() {
        let base_x = rep_x(1.0, 16).unwrap();
        let base_l = rep_l(1.0, 16).unwrap();
        for &lambda in &[0.5, 3.0, -2.0] {
            let x = rep_x(lambda, 16).unwrap();
            let l = rep_l(lambda, 16).unwrap();
            let s = lambda.abs().sqrt();
            for k in 0..16 {
                for m in 0..16 {
                    let expect = base_x.entry(k, m) * s;
                    assert!((x.entry(k, m) - expect).norm() < 1e-12);
                    let expect_l = base_l.entry(k, m) * lambda.abs();
                    assert!((l.entry(k, m) - expect_l).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn xy_linv_matches_closed_forms_on_interior() {
        for &lambda in &[0.5, 1.0, 3.0] {
            let m = xy_linv(lambda, 64).unwrap();
            assert_eq!(m.bandwidth(), 2);
            let limit = m.interior_limit();
            for row in 0..=limit {
                for col in 0..=limit {
                    let expect = xy_linv_closed_entry(row, col);
                    let got = m.entry(row, col);
                    assert!(
                        (got - expect).norm() <= 1e-14,
                        "lambda {} entry ({}, {}): {} vs {}",
                        lambda,
                        row,
                        col,
                        got,
                        expect
                    );
                }
            }
        }
    }

    #[test]
    fn xy_linv_specific_entries() {
        let m = xy_linv(1.0, 16).unwrap();
        for l in 0..=m.interior_limit() {
            assert_close(m.entry(l, l), 0.0, -0.5, 1e-15);
        }
        // (0, 2): (i/2)·√2/5 = i·0.1414...
        assert_close(m.entry(0, 2), 0.0, 0.5 * 2.0f64.sqrt() / 5.0, 1e-15);
        // (2, 0): (i/2)·√2/1 = i·√2/2 = i·0.7071...
        assert_close(m.entry(2, 0), 0.0, 2.0f64.sqrt() / 2.0, 1e-15);
    }

    #[test]
    fn xy_linv_is_lambda_independent() {
        let a = xy_linv(0.5, 32).unwrap();
        let b = xy_linv(1.0, 32).unwrap();
        let c = xy_linv(3.0, 32).unwrap();
        let limit = a.interior_limit();
        for row in 0..=limit {
            for col in 0..=limit {
                assert!((a.entry(row, col) - b.entry(row, col)).norm() < 1e-12);
                assert!((b.entry(row, col) - c.entry(row, col)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn generator_products_have_band_structure() {
        let size = 16;
        let x = rep_x(1.3, size).unwrap();
        let y = rep_y_canonical(1.3, size).unwrap();
        for (zi, zj) in [(&x, &x), (&x, &y), (&y, &x), (&y, &y)] {
            let product = zi.matrix() * zj.matrix();
            for k in 0..size {
                for l in 0..size {
                    let d = k.abs_diff(l);
                    if d != 0 && d != 2 {
                        assert!(
                            product[(k, l)].norm() < 1e-14,
                            "entry ({}, {}) outside the band: {}",
                            k,
                            l,
                            product[(k, l)]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_commutator_is_i_lambda() {
        for &lambda in &[0.5, 1.0, 3.0, -1.5] {
            let size = 32;
            let x = rep_x(lambda, size).unwrap();
            let y = rep_y_canonical(lambda, size).unwrap();
            let comm = x.matrix() * y.matrix() - y.matrix() * x.matrix();
            let limit = size - INTERIOR_MARGIN;
            for k in 0..=limit {
                for l in 0..=limit {
                    let expect = if k == l {
                        Complex64::new(0.0, lambda)
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    assert!(
                        (comm[(k, l)] - expect).norm() < 1e-12,
                        "lambda {}: commutator ({}, {}) = {}",
                        lambda,
                        k,
                        l,
                        comm[(k, l)]
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_convention_commutes() {
        // Under the closed-form convention Y = i·X, so the commutator is
        // exactly zero; this is what forces the dual-convention split.
        let x = rep_x(1.0, 16).unwrap();
        let y = rep_y(1.0, 16).unwrap();
        let comm = x.matrix() * y.matrix() - y.matrix() * x.matrix();
        assert!(comm.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sub_laplacian_is_minus_sum_of_squares() {
        for &lambda in &[0.5, 1.0, 3.0] {
            let size = 32;
            let x = rep_x(lambda, size).unwrap();
            let y = rep_y_canonical(lambda, size).unwrap();
            let l = rep_l(lambda, size).unwrap();
            let sum = -(x.matrix() * x.matrix() + y.matrix() * y.matrix());
            let limit = size - INTERIOR_MARGIN;
            for k in 0..=limit {
                for m in 0..=limit {
                    assert!(
                        (sum[(k, m)] - l.entry(k, m)).norm() < 1e-12,
                        "lambda {}: -(X²+Y²) vs L at ({}, {})",
                        lambda,
                        k,
                        m
                    );
                }
            }
        }
    }

    #[test]
    fn max_entry_examples() {
        let m = xy_linv(1.0, 64).unwrap();
        let max = max_entry_norm(&m);
        // Largest modulus is the (2, 0)-type entry at l = 0: √2/2, above
        // the classical 1/2.
        assert!((max - 2.0f64.sqrt() / 2.0).abs() < 1e-13);
        assert!(max > 0.5);

        let l8 = rep_l(1.0, 8).unwrap();
        assert_eq!(max_entry_norm(&l8), 15.0);

        let zero = RepMatrix::new(1.0, DMatrix::zeros(4, 4));
        assert_eq!(max_entry_norm(&zero), 0.0);
    }

    #[test]
    fn spectral_norm_examples() {
        let l = rep_l(1.0, 8).unwrap();
        assert!((spectral_norm(&l).unwrap() - 15.0).abs() < 1e-10);

        let eye = RepMatrix::new(1.0, DMatrix::identity(8, 8));
        assert!((spectral_norm(&eye).unwrap() - 1.0).abs() < 1e-12);

        // The truncated spectral norm grows past both the claimed 1/2 and
        // the max entry; record the growth across sizes.
        let mut prev = 0.0;
        for &size in &[16usize, 64, 256] {
            let m = xy_linv(1.0, size).unwrap();
            let s = spectral_norm(&m).unwrap();
            assert!(s >= prev - 1e-12);
            assert!(s >= max_entry_norm(&m) - 1e-12);
            prev = s;
        }
        assert!(prev > 0.5);
    }

    #[test]
    fn c0_examples() {
        assert_eq!(c0_constant(1, 0.5), 1.0);
        assert_eq!(c0_constant(2, 0.5), 2.0);
        assert_eq!(c0_constant(1, 1.0), 2.0);

        let report = c0_report(2, 0.5).unwrap();
        assert_eq!(report.c0, 2.0);
        assert!((report.c0_alt - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-15);
        assert!((report.epsilon_min_alt - (1.0 - 1.0 / 8.0)).abs() < 1e-15);
        assert!(report.values_disagree);
    }

    #[test]
    fn fiber_solve_examples() {
        // Identity coefficients on {X, Y}: the system matrix is -π(L).
        let c = DMatrix::<f64>::identity(2, 2);
        let mut f = DVector::<Complex64>::zeros(8);
        f[0] = Complex64::new(1.0, 0.0);
        let u = fiber_solve(1.0, &c, &f, 8).unwrap();
        assert!((u[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        for k in 1..8 {
            assert!(u[k].norm() < 1e-13);
        }

        let zero_rhs = DVector::<Complex64>::zeros(8);
        let u = fiber_solve(1.0, &c, &zero_rhs, 8).unwrap();
        assert!(u.norm() < 1e-14);

        // Zero coefficients: a rank-deficient system.
        let singular = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(
            fiber_solve(1.0, &singular, &f, 8),
            Err(Error::SingularTruncation(_))
        ));
    }

    #[test]
    fn fiber_solve_two_pairs() {
        // n = 2: identity coefficients give -π(L) on the tensor basis,
        // whose ground diagonal entry is |λ|(1+1) = 2.
        let c = DMatrix::<f64>::identity(4, 4);
        let size = 6;
        let full = size * size;
        let mut f = DVector::<Complex64>::zeros(full);
        f[0] = Complex64::new(1.0, 0.0);
        let u = fiber_solve(1.0, &c, &f, size).unwrap();
        assert!((u[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn matrix_csv_has_interior_flags() {
        let m = xy_linv(1.0, 8).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,re,im,interior\n"));
        assert!(text.lines().any(|l| l.ends_with(",0")));
        assert!(text.lines().any(|l| l.ends_with(",1")));
    }

    #[test]
    fn norm_report_contents() {
        let report = norm_report(1.0, &[16, 64]).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_close(
            report.closed_form_entry_2_0,
            0.0,
            std::f64::consts::SQRT_2 / 2.0,
            1e-15,
        );
        assert!(report.max_entry_exceeds_claimed);
        let json = report.to_json().to_string();
        assert!(json.contains("claimed_max_entry"));
        assert!(json.contains("spectral_norm_truncated"));
    }
}
