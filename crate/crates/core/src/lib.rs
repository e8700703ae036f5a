//! Harmonic functions, level-set fluxes, and discretized Laplace operators on
//! metric graphs whose completion has a compact, totally disconnected boundary.
//!
//! The library is organized around a small set of value types:
//!
//! * [`graph::MetricGraph`] — finite metric graphs and depth-truncated
//!   self-similar trees, with geodesic distances, volume/diameter reports,
//!   and ε-cores.
//! * [`boundary`] — the end space of a truncated tree: address words, clopen
//!   cylinder partitions, Bernoulli-type boundary measures, separating vertex
//!   sets, and eventually-flat cutoff functions.
//! * [`harmonic`] — exact solutions of the Dirichlet problem for step
//!   boundary data, energy reports, harmonic measure, and the structural
//!   checks (mean value, maximum principle, orthogonality).
//! * [`levelset`] — level crossings, super-level subgraphs, fluxes, and
//!   descent paths of piecewise-linear harmonic functions.
//! * [`operator`] — symmetric finite-element discretizations of the second
//!   derivative with Kirchhoff interior conditions and Dirichlet / Neumann /
//!   Robin / clamp boundary conditions, plus generalized eigensolves.
//! * [`verify`] — the named invariant suite driven by the CLI.
//!
//! All values are immutable after construction and safe to share across
//! threads.

// `!(x > 0.0)` guards reject NaN along with nonpositive values; index loops
// walk several parallel per-vertex arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod boundary;
pub mod error;
pub mod graph;
pub mod harmonic;
pub mod levelset;
pub mod operator;
pub mod piecewise;
pub mod verify;

pub use error::{Error, Result};
