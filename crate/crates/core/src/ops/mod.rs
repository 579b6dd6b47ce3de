//! Discrete logarithm, exponential, parallel transport and connection.
//!
//! Every operator is assembled from two-point problems on the path energy of
//! order 2:
//!
//! * [`log2`]: the midpoint `x₀ + ζ` minimizing `W[x₀,·] + W[·,x₂]`;
//! * [`exp2`]: the endpoint `x₂` for which `x + ζ` is that minimizer, i.e.
//!   `W_,2[x, x+ζ] + W_,1[x+ζ, x₂] = 0`.
//!
//! On a [`Space`] with a level-set constraint the same problems are solved
//! with a Lagrange multiplier at the constrained points.

mod transport;
mod two_point;

use serde::{Deserialize, Serialize};

pub use transport::{
    discrete_connection, inverse_transport, inverse_transport_step, parallel_transport, transport_step, TransportStep,
    TransportTrace,
};
pub use two_point::{exp2, log2};

use crate::error::{Error, Result};
use crate::geodesic::{check_on_surface, solve_geodesic, solve_geodesic_constrained, ConstraintModel, GeodesicResult, SolverConfig};
use crate::linalg::StepSolve;
use crate::model::{check_point, Coord, EnergyModel, Gauge};

/// An energy, optionally restricted to the zero set of a constraint.
#[derive(Clone, Copy)]
pub struct Space<'a> {
    pub energy: &'a dyn EnergyModel,
    pub constraint: Option<&'a dyn ConstraintModel>,
}

impl<'a> Space<'a> {
    pub fn new(energy: &'a dyn EnergyModel) -> Self {
        Self {
            energy,
            constraint: None,
        }
    }

    pub fn constrained(energy: &'a dyn EnergyModel, constraint: &'a dyn ConstraintModel) -> Self {
        Self {
            energy,
            constraint: Some(constraint),
        }
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    /// Discrete geodesic of order `steps`, constrained when the space is.
    pub fn geodesic(&self, xa: &Coord, xb: &Coord, steps: usize, cfg: &SolverConfig) -> Result<GeodesicResult> {
        match self.constraint {
            None => solve_geodesic(xa, xb, steps, self.energy, cfg),
            Some(c) => solve_geodesic_constrained(xa, xb, steps, self.energy, c, cfg),
        }
    }

    pub(crate) fn step_mode(&self) -> StepSolve {
        match self.energy.gauge() {
            Gauge::None => StepSolve::Exact,
            Gauge::MeanPosition { .. } => StepSolve::MinNorm,
        }
    }

    pub(crate) fn check(&self, x: &Coord, label: &str) -> Result<()> {
        check_point(self.energy, x)?;
        if let Some(c) = self.constraint {
            check_on_surface(c, x, label)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exp2Method {
    /// Newton on the Euler–Lagrange equation in `x₂`.
    #[default]
    Newton,
    /// The contraction `x₂ ↦ x₂ + ζ - LOG²_x(x₂)`.
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpConfig {
    /// Settings for the embedded two-point and geodesic solves.
    pub inner: SolverConfig,
    pub fixed_point_tol: f64,
    pub method: Exp2Method,
}

impl Default for OpConfig {
    fn default() -> Self {
        Self {
            inner: SolverConfig::default(),
            fixed_point_tol: 1e-12,
            method: Exp2Method::Newton,
        }
    }
}

impl OpConfig {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::InvalidInput("fixed_point_tol must be positive".into()));
        }
        Ok(())
    }
}

/// `LOG^K_{xa}(xb) = x₁ - x₀` of the order-`K` discrete geodesic.
/// The factor `1/K` is part of the operator: `K · LOG^K` approximates `log`.
pub fn discrete_log(space: &Space<'_>, xa: &Coord, xb: &Coord, steps: usize, cfg: &OpConfig) -> Result<Coord> {
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    space.check(xa, "x_A")?;
    space.check(xb, "x_B")?;
    if steps == 1 {
        return Ok(xb - xa);
    }
    let geo = space.geodesic(xa, xb, steps, &cfg.inner)?.into_converged()?;
    Ok(geo.path.point(1) - geo.path.point(0))
}

/// `EXP^k_x(ζ)` by the two-step recursion
/// `x_k = EXP²_{x_{k-2}}(x_{k-1} - x_{k-2})`, starting from `x₀ = x`, `x₁ = x + ζ`.
pub fn discrete_exp(space: &Space<'_>, x: &Coord, zeta: &Coord, k: usize, cfg: &OpConfig) -> Result<Coord> {
    Ok(discrete_exp_path(space, x, zeta, k, cfg)?.pop().expect("path is never empty"))
}

/// All iterates `(x₀, …, x_k)` of the discrete exponential recursion.
pub fn discrete_exp_path(space: &Space<'_>, x: &Coord, zeta: &Coord, k: usize, cfg: &OpConfig) -> Result<Vec<Coord>> {
    cfg.validate()?;
    check_point(space.energy, x)?;
    check_point(space.energy, zeta)?;
    let mut points = Vec::with_capacity(k + 1);
    points.push(x.clone());
    if k == 0 {
        return Ok(points);
    }
    points.push(x + zeta);
    for i in 2..=k {
        let (before, last) = (&points[i - 2], &points[i - 1]);
        let next = exp2(space, before, &(last - before), cfg).map_err(|e| e.at_step(i))?;
        points.push(next);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coord;
    use crate::zoo::flat_energy;

    #[test]
    fn flat_log_and_exp() {
        let m = flat_energy(2);
        let s = Space::new(&m);
        let cfg = OpConfig::default();
        let (a, b) = (coord(&[0.0, 0.0]), coord(&[1.0, 0.0]));
        assert_eq!(discrete_log(&s, &a, &b, 1, &cfg).unwrap(), &b - &a);
        assert!((discrete_log(&s, &a, &b, 4, &cfg).unwrap() - coord(&[0.25, 0.0])).amax() < 1e-14);
        let e = discrete_exp(&s, &a, &coord(&[0.25, 0.0]), 4, &cfg).unwrap();
        assert!((e - coord(&[1.0, 0.0])).amax() < 1e-14);
        assert_eq!(discrete_exp(&s, &a, &coord(&[0.3, 0.1]), 1, &cfg).unwrap(), coord(&[0.3, 0.1]));
        assert_eq!(discrete_exp(&s, &a, &coord(&[0.3, 0.1]), 0, &cfg).unwrap(), a);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OpConfig::default();
        cfg.fixed_point_tol = 0.0;
        assert!(cfg.validate().is_err());
        let json = serde_json::to_string(&OpConfig::default()).unwrap();
        let back: OpConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, OpConfig::default());
        assert!(serde_json::from_str::<OpConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
