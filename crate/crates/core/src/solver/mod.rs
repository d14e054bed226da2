//! Boundary solvers.
//!
//! All solvers work in whitened coordinates `D = S^{-1} sigma S^{-1}` with
//! `S = sigma_x^{1/2}`, so the feasible interval `0 < sigma <= sigma_x`
//! becomes `0 < D <= I`. A symmetric `D` is stored as a vector over the basis
//! `{e_i e_i^T} U {e_i e_j^T + e_j e_i^T : i < j}`.

mod ascent;
mod grid;
mod inner;
mod newton;
mod sweep;
mod whiten;

pub use ascent::{ascent_boundary, ascent_boundary_general, ascent_boundary_with, AscentConfig};
pub use grid::brute_force_grid;
pub use inner::{inner_convex, inner_convex_with, InnerConfig, SolveReport, SweepParams};
pub use sweep::{sweep_boundary, sweep_boundary_with, SweepConfig};
