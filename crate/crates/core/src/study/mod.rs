//! Experiment runner: model registry, convergence studies, consistency
//! audits and rod morphs.

mod audit;
mod convergence;
mod morph;
pub mod oracle;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use audit::{run_consistency_audit, AuditReport};
pub use convergence::{fit_order, run_convergence_study, ConvergenceReport, ConvergenceRow, Orders, COLUMNS};
pub use morph::{rod_morph, run_rod_morph, RodMorph};
pub use oracle::{FlatOracle, Oracle, RoundSphereOracle};

use crate::error::{Error, Result};
use crate::geodesic::{ConstraintModel, SolverConfig, LEVEL_SET_TOL};
use crate::model::{coord, Coord, EnergyModel};
use crate::ops::{OpConfig, Space};
use crate::zoo::rod::{DEFAULT_DELTA, DEFAULT_NODES, MIN_NODES};
use crate::zoo::{flat_energy, rod_energy, sphere_chart_energy, sphere_oracles, RodCurve, RodEnergyKind, SdfSurface};

/// Seed used whenever randomness is involved and none is given.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Flat,
    SphereChart,
    SdfSphere,
    SdfCircle,
    RodSimplified,
    RodFull,
}

impl ModelName {
    pub const ALL: [ModelName; 6] = [
        ModelName::Flat,
        ModelName::SphereChart,
        ModelName::SdfSphere,
        ModelName::SdfCircle,
        ModelName::RodSimplified,
        ModelName::RodFull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Flat => "flat",
            ModelName::SphereChart => "sphere-chart",
            ModelName::SdfSphere => "sdf-sphere",
            ModelName::SdfCircle => "sdf-circle",
            ModelName::RodSimplified => "rod-simplified",
            ModelName::RodFull => "rod-full",
        }
    }

    pub fn is_rod(self) -> bool {
        matches!(self, ModelName::RodSimplified | ModelName::RodFull)
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelName::ALL.iter().map(|m| m.as_str()).collect();
                Error::InvalidInput(format!("unknown model '{s}' (expected one of {})", known.join(", ")))
            })
    }
}

/// A model ready for use: energy, optional constraint and optional oracle.
pub struct ModelSpace {
    pub name: ModelName,
    energy: Box<dyn EnergyModel>,
    constraint: Option<SdfSurface>,
    oracle: Option<Box<dyn Oracle>>,
}

impl ModelSpace {
    pub fn space(&self) -> Space<'_> {
        match &self.constraint {
            None => Space::new(self.energy.as_ref()),
            Some(c) => Space::constrained(self.energy.as_ref(), c),
        }
    }

    pub fn energy(&self) -> &dyn EnergyModel {
        self.energy.as_ref()
    }

    pub fn constraint(&self) -> Option<&SdfSurface> {
        self.constraint.as_ref()
    }

    pub fn oracle(&self) -> Option<&dyn Oracle> {
        self.oracle.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.energy.dim()
    }

    /// Projects onto the constraint surface, if any.
    pub fn project(&self, x: &Coord) -> Result<Coord> {
        match &self.constraint {
            None => Ok(x.clone()),
            Some(c) => c.project(x),
        }
    }

    /// Endpoint admissibility: finite, right dimension, on the surface.
    pub fn check_point(&self, x: &Coord, label: &str) -> Result<()> {
        crate::model::check_point(self.energy(), x)?;
        if let Some(c) = &self.constraint {
            let d = c.value(x)?;
            if d.abs() > LEVEL_SET_TOL {
                return Err(Error::InvalidInput(format!("{label} is off the {} (d = {d:e})", c.name())));
            }
        }
        Ok(())
    }

    /// A random admissible point, for audits and property tests.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Result<Coord> {
        let d = self.dim();
        match self.name {
            ModelName::Flat | ModelName::SphereChart => {
                Ok(Coord::from_iterator(d, (0..d).map(|_| rng.random_range(-2.0..2.0))))
            }
            ModelName::SdfSphere | ModelName::SdfCircle => loop {
                let v = Coord::from_iterator(d, (0..d).map(|_| rng.random_range(-1.0..1.0)));
                if v.norm() > 0.1 {
                    break self.project(&v);
                }
            },
            ModelName::RodSimplified | ModelName::RodFull => {
                // a wobbly circle with random radius and phase
                let n = d / 2;
                let r = rng.random_range(0.8..1.2);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let mut x = Coord::zeros(d);
                for i in 0..n {
                    let t = phase + std::f64::consts::TAU * i as f64 / n as f64;
                    let ri = r * (1.0 + rng.random_range(-0.02..0.02));
                    x[2 * i] = ri * t.cos();
                    x[2 * i + 1] = ri * t.sin();
                }
                Ok(x)
            }
        }
    }
}

/// Builds a registered model.
///
/// `dim` selects the ambient dimension where the model allows a choice:
/// any `dim ≥ 1` for `flat` (default 2) and `2N` for the rods (default
/// `N = 64`). It must match the fixed dimension of the other models.
pub fn build_model(name: ModelName, dim: Option<usize>) -> Result<ModelSpace> {
    let fixed = |expected: usize| -> Result<()> {
        match dim {
            Some(found) if found != expected => Err(Error::InvalidInput(format!(
                "model {name} lives in dimension {expected}, got {found}"
            ))),
            _ => Ok(()),
        }
    };
    let (energy, constraint, oracle): (Box<dyn EnergyModel>, _, Option<Box<dyn Oracle>>) = match name {
        ModelName::Flat => {
            let d = dim.unwrap_or(2);
            if d == 0 {
                return Err(Error::InvalidInput("flat model needs dimension ≥ 1".into()));
            }
            (Box::new(flat_energy(d)), None, Some(Box::new(FlatOracle)))
        }
        ModelName::SphereChart => {
            fixed(2)?;
            (Box::new(sphere_chart_energy()), None, Some(Box::new(sphere_oracles())))
        }
        ModelName::SdfSphere | ModelName::SdfCircle => {
            let surface = if name == ModelName::SdfSphere {
                SdfSurface::unit_sphere()
            } else {
                SdfSurface::unit_circle()
            };
            fixed(surface.dim())?;
            (
                Box::new(flat_energy(surface.dim())),
                Some(surface),
                Some(Box::new(RoundSphereOracle { radius: 1.0 })),
            )
        }
        ModelName::RodSimplified | ModelName::RodFull => {
            let d = dim.unwrap_or(2 * DEFAULT_NODES);
            if d % 2 != 0 || d / 2 < MIN_NODES {
                return Err(Error::InvalidInput(format!(
                    "rod coordinates must hold 2N values with N ≥ {MIN_NODES}, got {d}"
                )));
            }
            let kind = if name == ModelName::RodSimplified {
                RodEnergyKind::Simplified
            } else {
                RodEnergyKind::Full
            };
            (rod_energy(kind, d / 2, DEFAULT_DELTA)?, None, None)
        }
    };
    Ok(ModelSpace {
        name,
        energy,
        constraint,
        oracle,
    })
}

/// Inclusive range of exponents `k`, studied at `K = 2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRange {
    pub start: u32,
    pub end: u32,
}

impl Default for KRange {
    fn default() -> Self {
        Self { start: 1, end: 10 }
    }
}

impl KRange {
    pub fn resolutions(&self) -> Vec<usize> {
        (self.start..=self.end).map(|k| 1usize << k).collect()
    }
}

/// Settings of a study run; the JSON config file mirrors these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelName,
    pub xa: Vec<f64>,
    pub xb: Vec<f64>,
    /// Vector transported along the geodesic from `xa`.
    pub w: Vec<f64>,
    #[serde(default)]
    pub k_exponents: KRange,
    /// Settings for the geodesic boundary value problems.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Settings for the embedded two-point solves.
    #[serde(default)]
    pub op_config: OpConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for StudyConfig {
    /// The sphere-chart test problem: `x_A = (½, 0)`, `x_B = (-½, 2)`, `w = (-2/5, 0)`.
    fn default() -> Self {
        Self {
            model: ModelName::SphereChart,
            xa: vec![0.5, 0.0],
            xb: vec![-0.5, 2.0],
            w: vec![-0.4, 0.0],
            k_exponents: KRange::default(),
            solver: SolverConfig::default(),
            op_config: OpConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the invariants and builds the model.
    pub fn validate(&self) -> Result<ModelSpace> {
        if self.k_exponents.start > self.k_exponents.end {
            return Err(Error::InvalidInput("k_exponents range is empty".into()));
        }
        if self.k_exponents.end > 20 {
            return Err(Error::InvalidInput("k_exponents above 20 are not supported".into()));
        }
        self.solver.validate()?;
        self.op_config.validate()?;
        let model = build_model(self.model, Some(self.xa.len()))?;
        for (label, v) in [("xa", &self.xa), ("xb", &self.xb), ("w", &self.w)] {
            if v.len() != model.dim() {
                return Err(Error::InvalidInput(format!(
                    "{label} has {} components, model {} needs {}",
                    v.len(),
                    self.model,
                    model.dim()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{label} has non-finite entries")));
            }
        }
        model.check_point(&coord(&self.xa), "xa")?;
        model.check_point(&coord(&self.xb), "xb")?;
        Ok(model)
    }
}

/// Rod curves of `N` nodes as model coordinates.
pub fn rod_endpoints(a: &RodCurve, b: &RodCurve) -> Result<(Coord, Coord)> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "curves have different node counts ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok((a.to_coord(), b.to_coord()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_round_trip() {
        for m in ModelName::ALL {
            assert_eq!(m.as_str().parse::<ModelName>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("torus".parse::<ModelName>().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = StudyConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.k_exponents.resolutions().len(), 10);
        let back = StudyConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_bad_input() {
        let mut cfg = StudyConfig::default();
        cfg.k_exponents = KRange { start: 4, end: 3 };
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::default();
        cfg.w = vec![1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::default();
        cfg.model = ModelName::SdfSphere;
        cfg.xa = vec![0.0, 0.0, 2.0];
        cfg.xb = vec![1.0, 0.0, 0.0];
        cfg.w = vec![0.0, 1.0, 0.0];
        assert!(cfg.validate().is_err());
        assert!(StudyConfig::from_json(r#"{"model":"flat","xa":[0],"xb":[1],"w":[0],"extra":1}"#).is_err());
        let minimal = StudyConfig::from_json(r#"{"model":"flat","xa":[0],"xb":[1],"w":[0]}"#).unwrap();
        assert_eq!(minimal.k_exponents, KRange::default());
    }

    #[test]
    fn samples_are_admissible() {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        for name in ModelName::ALL {
            let m = build_model(name, if name.is_rod() { Some(32) } else { None }).unwrap();
            for _ in 0..5 {
                let x = m.sample_point(&mut rng).unwrap();
                m.check_point(&x, "sample").unwrap();
            }
        }
        assert!(build_model(ModelName::SphereChart, Some(3)).is_err());
        assert!(build_model(ModelName::RodFull, Some(9)).is_err());
    }
}
