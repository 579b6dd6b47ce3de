//! Time-discrete geodesic calculus on spaces described by a deformation
//! energy `W[x, y]`.
//!
//! The crate is layered: [`model`] defines the energy interface, [`geodesic`]
//! computes discrete geodesics, [`ops`] builds logarithm, exponential and
//! parallel transport on top, [`zoo`] holds concrete spaces and [`study`]
//! runs the numerical experiments.

pub mod consistency;
pub mod error;
pub mod fd;
pub mod geodesic;
pub mod linalg;
pub mod model;
pub mod ops;
pub mod study;
pub mod zoo;

pub use consistency::{check_consistency, ConsistencyReport};
pub use error::{Error, Result};
pub use fd::{fd_derivatives, EnergyFunction, FdModel, FdScheme};
pub use geodesic::{
    discrete_energy, discrete_length, el_residual, solve_geodesic, solve_geodesic_constrained, ConstraintModel,
    Damping, GeodesicResult, Init, SolverConfig,
};
pub use model::{coord, Coord, DiscretePath, EnergyModel, Gauge, Matrix, MetricValue};
pub use ops::{OpConfig, Space};

/// Formats a float so that it reads back bit-identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
