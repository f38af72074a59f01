//! Periodic 1-D finite differences, RK4 time stepping and Burgers right-hand sides.

mod grid;
mod rk4;
mod snapshot;
mod solver;
mod stencil;

pub use grid::{Field, Grid, GridConfig, MIN_POINTS};
pub use rk4::{rk4_step, Rhs, Rk4};
pub use snapshot::write_snapshots_csv;
pub use solver::{
    burgers_rhs, integrate, integrate_from, modeled_rhs, rectangular_ic, BurgersRhs,
    IntegrationStatus, ModeledRhs, RectangularIc, Snapshot, SolverConfig, StabilityNumbers,
    Trajectory, ADVECTIVE_LIMIT, DIFFUSIVE_LIMIT,
};
pub use stencil::{d2dx2, d2dx2_into, ddx, ddx_into};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("grid needs at least {MIN_POINTS} points, got {0}")]
    GridTooSmall(usize),
    #[error("invalid domain [{x0}, {x1})")]
    InvalidDomain { x0: f64, x1: f64 },
    #[error("field has {field} values but the grid has {grid} points")]
    LengthMismatch { field: usize, grid: usize },
    #[error("pulse [{a}, {b}) must be a non-empty interval inside [{x0}, {x1})")]
    InvalidPulse { a: f64, b: f64, x0: f64, x1: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
