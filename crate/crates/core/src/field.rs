//! Periodic-grid fields and the norms every estimate is stated in.
//!
//! A [`ScalarField`] is a real function sampled on the uniform grid of
//! `[0, 2π)ⁿ` together with a lazily computed cache of its Fourier
//! coefficients. Fields are treated as trigonometric polynomials: the grid
//! values and the coefficient table carry exactly the same information, so
//! transforms round-trip to machine precision and the trapezoid rule is an
//! exact quadrature for products of band-limited fields.
//!
//! Fields are immutable after construction and all operations are pure, so
//! sharing across threads is safe.

use std::io::{self, BufRead, Write};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Largest number of grid points a single field may hold.
const MAX_TOTAL_POINTS: usize = 1 << 26;

/// Uniform periodic grid over `[0, period)^dim` with the same resolution on
/// every axis. The period is fixed to `2π`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    points_per_axis: usize,
    period: f64,
}

impl Grid {
    /// Build a grid; `points_per_axis` must be a power of two `≥ 4`.
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Grid> {
        if dim < 1 {
            return Err(Error::Config("grid dimension must be at least 1".into()));
        }
        if points_per_axis < 4 || !points_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 4, got {}",
                points_per_axis
            )));
        }
        let total = points_per_axis
            .checked_pow(dim as u32)
            .filter(|&t| t <= MAX_TOTAL_POINTS);
        if total.is_none() {
            return Err(Error::Config(format!(
                "grid of {}^{} points exceeds the supported size",
                points_per_axis, dim
            )));
        }
        Ok(Grid {
            dim,
            points_per_axis,
            period: std::f64::consts::TAU,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Grid spacing `period / points_per_axis`.
    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_axis as f64
    }

    /// Quadrature weight of one grid cell, `spacing^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Decompose a flat row-major index into per-axis indices.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dim);
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points_per_axis;
            flat /= self.points_per_axis;
        }
    }

    /// Coordinates of the grid node with the given flat index.
    pub fn coords(&self, flat: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let h = self.spacing();
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = (rest % self.points_per_axis) as f64 * h;
            rest /= self.points_per_axis;
        }
    }

    /// Signed integer frequency of spectral slot `j` on one axis.
    pub fn frequency(&self, j: usize) -> i64 {
        let m = self.points_per_axis;
        if j < m / 2 {
            j as i64
        } else {
            j as i64 - m as i64
        }
    }

    /// Frequency vector of a flat spectral index.
    pub fn frequency_vector(&self, mut flat: usize, out: &mut [i64]) {
        debug_assert_eq!(out.len(), self.dim);
        for a in (0..self.dim).rev() {
            out[a] = self.frequency(flat % self.points_per_axis);
            flat /= self.points_per_axis;
        }
    }

    fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Real function sampled on a [`Grid`], with cached Fourier coefficients.
///
/// The coefficients follow the convention `u(x) = Σ_k û_k e^{i k·x}` with
/// integer frequency vectors `k`; the cache is populated on first use and is
/// always consistent with `values`.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl ScalarField {
    /// Wrap raw grid values. Fails if the length does not match the grid or
    /// any value is non-finite.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.total_points() {
            return Err(Error::Data(format!(
                "expected {} values for the grid, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at flat index {}",
                values[i], i
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            spectral: OnceLock::new(),
        })
    }

    /// The zero field.
    pub fn zero(grid: &Grid) -> ScalarField {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.total_points()],
            spectral: OnceLock::new(),
        }
    }

    /// The constant field `c`.
    pub fn constant(grid: &Grid, c: f64) -> Result<ScalarField> {
        ScalarField::from_values(grid.clone(), vec![c; grid.total_points()])
    }

    /// Evaluate `f` at every grid node.
    pub fn sample<F>(grid: &Grid, f: F) -> Result<ScalarField>
    where
        F: Fn(&[f64]) -> f64,
    {
        let mut values = Vec::with_capacity(grid.total_points());
        let mut x = vec![0.0; grid.dim()];
        for flat in 0..grid.total_points() {
            grid.coords(flat, &mut x);
            values.push(f(&x));
        }
        ScalarField::from_values(grid.clone(), values)
    }

    /// Build a field from Fourier coefficients. The coefficient table must be
    /// Hermitian-symmetric (`û_{-k} = conj(û_k)`) so that the inverse
    /// transform is real; this is an internal constructor used by symbol
    /// multiplication, which preserves the symmetry.
    pub(crate) fn from_spectral(grid: Grid, spectral: Vec<Complex64>) -> ScalarField {
        debug_assert_eq!(spectral.len(), grid.total_points());
        let mut data = spectral.clone();
        transform_axes(&grid, &mut data, false);
        #[cfg(debug_assertions)]
        {
            let max_re = data.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
            let max_im = data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            debug_assert!(
                max_im <= 1e-8 * max_re.max(1.0),
                "non-Hermitian coefficient table (imag residue {:e})",
                max_im
            );
        }
        let values = data.iter().map(|z| z.re).collect();
        let field = ScalarField {
            grid,
            values,
            spectral: OnceLock::new(),
        };
        let _ = field.spectral.set(spectral);
        field
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fourier coefficients, computed on first call and cached.
    pub fn spectral(&self) -> &[Complex64] {
        self.spectral.get_or_init(|| {
            let mut data: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            transform_axes(&self.grid, &mut data, true);
            let scale = 1.0 / self.grid.total_points() as f64;
            for z in &mut data {
                *z *= scale;
            }
            data
        })
    }

    /// Average value over the grid (equals the zero-frequency coefficient).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `(∫ |u|² dx)^{1/2}` by the trapezoid rule, which is exact for
    /// band-limited fields.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * sum).sqrt()
    }

    /// Homogeneous-H² seminorm `‖Δu‖_{L²}`, the solver's convergence metric.
    ///
    /// Computed from the Parseval identity `‖Δu‖² = (2π)ⁿ Σ |k|⁴ |û_k|²`,
    /// which agrees with `l2_norm(laplacian(u))` to machine precision.
    pub fn h2_seminorm(&self) -> f64 {
        let spec = self.spectral();
        let mut k = vec![0i64; self.grid.dim()];
        let mut sum = 0.0;
        for (flat, coeff) in spec.iter().enumerate() {
            self.grid.frequency_vector(flat, &mut k);
            let k2: f64 = k.iter().map(|&ki| (ki * ki) as f64).sum();
            sum += k2 * k2 * coeff.norm_sqr();
        }
        (self.grid.period().powi(self.grid.dim() as i32) * sum).sqrt()
    }

    /// Pointwise sum; panics if the grids differ.
    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip(other, |a, b| a + b)
    }

    /// Pointwise difference; panics if the grids differ.
    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip(other, |a, b| a - b)
    }

    /// Pointwise product; panics if the grids differ.
    pub fn mul_pointwise(&self, other: &ScalarField) -> ScalarField {
        self.zip(other, |a, b| a * b)
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            spectral: OnceLock::new(),
        }
    }

    /// Subtract a constant from every value.
    pub fn shifted(&self, c: f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v - c).collect(),
            spectral: OnceLock::new(),
        }
    }

    fn zip<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> ScalarField {
        assert!(
            self.grid.same_as(&other.grid),
            "fields live on different grids"
        );
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
            spectral: OnceLock::new(),
        }
    }

    /// Random band-limited field with unit L² norm.
    ///
    /// Coefficients on frequencies with `|k_a| ≤ max_freq` on every axis are
    /// drawn uniformly and Hermitian-symmetrized; everything above the band
    /// is zero. With `zero_mean` the constant mode is dropped.
    pub fn random_band_limited<R: Rng + ?Sized>(
        grid: &Grid,
        max_freq: usize,
        zero_mean: bool,
        rng: &mut R,
    ) -> Result<ScalarField> {
        let m = grid.points_per_axis();
        if max_freq == 0 || max_freq >= m / 2 {
            return Err(Error::Config(format!(
                "band limit must satisfy 1 <= max_freq < {}, got {}",
                m / 2,
                max_freq
            )));
        }
        let total = grid.total_points();
        let mut spectral = vec![Complex64::new(0.0, 0.0); total];
        let mut idx = vec![0usize; grid.dim()];
        let mut k = vec![0i64; grid.dim()];
        for flat in 0..total {
            grid.frequency_vector(flat, &mut k);
            if k.iter().any(|&ki| ki.unsigned_abs() as usize > max_freq) {
                continue;
            }
            if zero_mean && k.iter().all(|&ki| ki == 0) {
                continue;
            }
            grid.multi_index(flat, &mut idx);
            let partner = idx
                .iter()
                .fold(0usize, |acc, &j| acc * m + (m - j) % m);
            if partner < flat {
                continue; // already assigned together with its partner
            }
            let re = rng.gen_range(-1.0..1.0);
            let im = rng.gen_range(-1.0..1.0);
            if partner == flat {
                spectral[flat] = Complex64::new(re, 0.0);
            } else {
                spectral[flat] = Complex64::new(re, im);
                spectral[partner] = Complex64::new(re, -im);
            }
        }
        // Normalize in spectral space via Parseval before synthesizing.
        let volume = grid.period().powi(grid.dim() as i32);
        let norm = (volume * spectral.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        if norm > 0.0 {
            let s = 1.0 / norm;
            for z in &mut spectral {
                *z *= s;
            }
        }
        Ok(ScalarField::from_spectral(grid.clone(), spectral))
    }

    /// Dump as CSV: header `index_0,...,index_{dim-1},value`, row-major, full
    /// double precision (17 significant digits).
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let d = self.grid.dim();
        for a in 0..d {
            write!(out, "index_{},", a)?;
        }
        writeln!(out, "value")?;
        let mut idx = vec![0usize; d];
        for (flat, v) in self.values.iter().enumerate() {
            self.grid.multi_index(flat, &mut idx);
            for j in &idx {
                write!(out, "{},", j)?;
            }
            writeln!(out, "{:.16e}", v)?;
        }
        Ok(())
    }

    /// Read a field back from the CSV dump format. The grid is inferred from
    /// the header and the row count; rows must be complete and in row-major
    /// order.
    pub fn read_csv<R: BufRead>(input: R) -> Result<ScalarField> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty field CSV".into()))?
            .map_err(|e| Error::Data(format!("read error: {}", e)))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "value" {
            return Err(Error::Data("field CSV header must end in 'value'".into()));
        }
        let dim = cols.len() - 1;
        for (a, col) in cols[..dim].iter().enumerate() {
            if *col != format!("index_{}", a) {
                return Err(Error::Data(format!(
                    "unexpected header column '{}', expected 'index_{}'",
                    col, a
                )));
            }
        }
        let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::Data(format!("read error: {}", e)))?;
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != dim + 1 {
                return Err(Error::Data(format!(
                    "row has {} columns, expected {}",
                    parts.len(),
                    dim + 1
                )));
            }
            let mut idx = Vec::with_capacity(dim);
            for p in &parts[..dim] {
                idx.push(
                    p.parse::<usize>()
                        .map_err(|e| Error::Data(format!("bad index '{}': {}", p, e)))?,
                );
            }
            let v = parts[dim]
                .parse::<f64>()
                .map_err(|e| Error::Data(format!("bad value '{}': {}", parts[dim], e)))?;
            rows.push((idx, v));
        }
        let total = rows.len();
        let mut m = 4usize;
        loop {
            let t = m.checked_pow(dim as u32);
            match t {
                Some(t) if t == total => break,
                Some(t) if t < total => m *= 2,
                _ => {
                    return Err(Error::Data(format!(
                        "row count {} is not a power-of-two grid of dimension {}",
                        total, dim
                    )))
                }
            }
        }
        let grid = Grid::new(dim, m)?;
        let mut idx = vec![0usize; dim];
        let mut values = Vec::with_capacity(total);
        for (flat, (row_idx, v)) in rows.iter().enumerate() {
            grid.multi_index(flat, &mut idx);
            if *row_idx != idx {
                return Err(Error::Data(format!(
                    "row {} out of row-major order: {:?}",
                    flat, row_idx
                )));
            }
            values.push(*v);
        }
        ScalarField::from_values(grid, values)
    }
}

/// In-place complex FFT along every axis of a row-major hypercube.
fn transform_axes(grid: &Grid, data: &mut [Complex64], forward: bool) {
    let m = grid.points_per_axis();
    let d = grid.dim();
    let total = grid.total_points();
    let mut planner = FftPlanner::new();
    let fft = if forward {
        planner.plan_fft_forward(m)
    } else {
        planner.plan_fft_inverse(m)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); m];
    for axis in 0..d {
        let stride = m.pow((d - 1 - axis) as u32);
        let block = stride * m;
        let mut base_block = 0;
        while base_block < total {
            for offset in 0..stride {
                let base = base_block + offset;
                for t in 0..m {
                    line[t] = data[base + t * stride];
                }
                fft.process(&mut line);
                for t in 0..m {
                    data[base + t * stride] = line[t];
                }
            }
            base_block += block;
        }
    }
}
