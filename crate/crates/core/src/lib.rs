//! Convex (anisotropic) symmetrization for elliptic equations with a first-order term.
//!
//! The crate is organised bottom-up:
//!
//! - [`gauge`]: gauge functions `H`, their polars `H0`, and the bodies `K`, `K0`.
//! - [`rearrange`]: distribution functions, decreasing/convex rearrangements and the
//!   pseudo-rearrangement of a drift coefficient.
//! - [`geomeasure`]: anisotropic total variation, perimeter, coarea and isoperimetric checks.
//! - [`symsol`]: the explicit convexly symmetric comparison solution and its gradient integrals.
//! - [`pdesolve`]: a finite-difference Picard solver for the original problem.
//! - [`harness`]: end-to-end comparison experiments and suites.
//!
//! The geometric and quadrature layers are generic over [`Scalar`] (`f32`/`f64`); the
//! finite-difference solver and the experiment harness work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gauge;
pub mod geomeasure;
pub mod grid;
pub mod harness;
pub mod pdesolve;
pub mod quad;
pub mod rearrange;
pub mod scalar;
pub mod symsol;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Gauge = gauge::Gauge<f64>;
pub type Gauge32 = gauge::Gauge<f32>;
pub type GridFunction = grid::GridFunction<f64>;
pub type GridFunction32 = grid::GridFunction<f32>;
pub type MonotoneProfile = rearrange::MonotoneProfile<f64>;
pub type PseudoRearrangement = rearrange::PseudoRearrangement<f64>;
pub type Polygon = geomeasure::Polygon<f64>;
pub type SymmetrizedProblem = symsol::SymmetrizedProblem<f64>;
pub type RadialSolution = symsol::RadialSolution<f64>;
