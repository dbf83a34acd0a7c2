//! Numerical toolkit for almost isometries of Finsler metrics.
//!
//! The crate is organized bottom-up:
//!
//! - [`chart`]: coordinate boxes, tensor-field evaluators, finite-difference
//!   exterior and Lie calculus, RK4 flows.
//! - [`metric`]: Finsler norms, the Randers family, symmetrization and the
//!   `F -> F + sigma` transform.
//! - [`grid`]: direction grids and sphere quadrature.
//! - [`duality`]: polar bodies, dual norms, barycenters and the betterment map
//!   that turns a Randers metric back into its Riemannian part.
//! - [`geodesic`]: nonsymmetric distances by path minimization, the triangular
//!   function and almost-isometry checks.
//! - [`curvature`]: Christoffel symbols and sectional curvature.
//! - [`symmetry`]: Killing and almost-Killing dimension counts.
//! - [`gallery`]: certified example metrics.

pub mod chart;
pub mod curvature;
pub mod duality;
pub mod error;
pub mod gallery;
pub mod geodesic;
pub mod grid;
pub mod metric;
pub mod symmetry;

pub use error::{Error, Result};
