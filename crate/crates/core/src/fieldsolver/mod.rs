//! Finite-difference Laplace solver for voxelised electrode geometries.
//!
//! A geometry is rasterised onto a uniform grid in which every voxel is either
//! free or belongs to a named electrode. Fields are obtained by red-black
//! successive over-relaxation, optionally started from a prolonged solution of
//! the same problem on a grid of half the resolution. Harmonic coefficients are
//! then read off by quadratic fits along the principal axes.

mod basis;
mod extract;
mod geometry;
mod grid;
mod sor;

pub use basis::{superpose, unit_electrode_basis, BasisSet};
pub use extract::{
    axis_profile, default_window_mm, extract_coefficient, extract_coefficients, field_at_center, CoefficientFit,
    ExtractedCoefficients, AXIAL_WINDOW_MM, RADIAL_WINDOW_MM,
};
pub use geometry::{TrapGeometry, ELECTRODE_NAMES};
pub use grid::{ElectrodeGrid, PotentialField};
pub use sor::{solve_laplace, solve_prescribed, DirichletProblem, SolverSettings};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("unknown electrode '{0}'")]
    UnknownElectrode(String),
    #[error("solver did not converge within {max_iters} sweeps (last relative update {residual:.3e})")]
    NonConvergence { max_iters: usize, residual: f64 },
    #[error("fields were computed on different grids")]
    GridMismatch,
    #[error("fit error: {0}")]
    FitError(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("cache i/o: {0}")]
    Cache(String),
}
