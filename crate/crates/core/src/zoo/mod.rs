//! Concrete energies and surfaces.

pub mod flat;
pub mod rod;
pub mod sdf;
pub mod sphere;

pub use flat::{flat_energy, FlatEnergy};
pub use rod::{rod_curvature, rod_energy, simplified_rod, FullRod, RodCurve, RodEnergyKind, SimplifiedRod};
pub use sdf::{sdf_spring_model, spring_exp2_line_search, SdfSurface};
pub use sphere::{sphere_chart_energy, sphere_oracles, SphereChart, SphereChartEnergy};
