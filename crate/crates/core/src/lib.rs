//! Spectral machinery for second-order equations in non-divergence form.
//!
//! The crate solves `Σ c_ij(x) ∂_i∂_j u = f` with merely bounded coefficients
//! on the periodic torus `[0, 2π)ⁿ` by Picard iteration of a contraction map,
//! gated by the Cordes condition. Everything the solver relies on is exposed
//! as a checkable piece:
//!
//! * [`field`] — band-limited fields on a uniform periodic grid, their L² and
//!   homogeneous-H² norms, and exact spectral transforms.
//! * [`operators`] — spectral derivatives, the Laplacian and its inverse on
//!   the zero-mean subspace, and Miranda–Talenti ratio measurement.
//! * [`cordes`] — ellipticity and Cordes-condition verification of
//!   coefficient fields, the pointwise scaling function, and the contraction
//!   bound `√(1−ε)·C₀`.
//! * [`linear`] — the fixed-point solver together with per-iteration
//!   contraction instrumentation.
//! * [`nonlinear`] — Carathéodory operators `a(x, {∂_i∂_j u})`, sampling-based
//!   falsification of the structure conditions (C1)/(C2), and a damped
//!   image-space iteration.
//! * [`nearness`] — Campanato-style nearness checks on sampled operator
//!   pairs.
//! * [`heisenberg`] — truncated Schrödinger-representation matrices of the
//!   Heisenberg group generators and sub-Laplacian, their norms, and
//!   fiberwise constant-coefficient solves.
//!
//! The whole-space setting in which the underlying estimates are usually
//! stated is replaced by the periodic torus: band-limited fields make every
//! derivative an exact symbol multiplication, so identities such as the
//! Miranda–Talenti equality hold at machine precision instead of being
//! polluted by discretization error. The price is a compatibility condition
//! at the zero frequency, which the solvers surface explicitly rather than
//! hide (see [`operators::invert_laplacian`] and the projected-mass column of
//! [`linear::IterationTrace`]).

pub mod cordes;
pub mod error;
pub mod field;
pub mod heisenberg;
pub mod linear;
pub mod nearness;
pub mod nonlinear;
pub mod operators;
pub mod report;

pub use error::{Error, Result};
