//! The Korteweg-de Vries equation on a metric star graph.
//!
//! `u_t + u_x + u_xxx + gamma u u_x = f` on `N` edges `(0, l_j)` joined at
//! `x = 0`, with continuity and a flux balance at the vertex and
//! Dirichlet/Neumann data at the outer ends. The crate provides exact
//! polynomial tools (compatibility conditions, boundary liftings,
//! manufactured solutions), a finite-difference theta-scheme with Picard
//! iteration for the nonlinearity, and diagnostics (energy audit,
//! reconstruction and decomposition checks, convergence studies).

// `!(x > 0.0)` is used on purpose so NaN is rejected; index loops mirror
// the stencil and factorization formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod compat;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod graph;
pub mod integrator;
pub mod lifting;
pub mod linalg;
pub mod poly;
pub mod series;

pub use error::{Error, Result};
