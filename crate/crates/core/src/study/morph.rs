use std::path::Path;

use serde::Serialize;

use super::rod_endpoints;
use crate::error::Result;
use crate::geodesic::{GeodesicResult, SolverConfig};
use crate::zoo::{rod_energy, RodCurve, RodEnergyKind};

/// A discrete geodesic between two rods.
#[derive(Debug, Clone)]
pub struct RodMorph {
    pub result: GeodesicResult,
    pub curves: Vec<RodCurve>,
    /// `K · W[x_{k-1}, x_k]` for `k = 1..=K`.
    pub segment_energies: Vec<f64>,
}

#[derive(Serialize)]
struct SummaryRow {
    k: usize,
    segment_energy: String,
}

impl RodMorph {
    /// Largest relative deviation of a segment energy from their mean.
    pub fn segment_spread(&self) -> f64 {
        let n = self.segment_energies.len() as f64;
        let mean = self.segment_energies.iter().sum::<f64>() / n;
        if mean == 0.0 {
            return 0.0;
        }
        self.segment_energies
            .iter()
            .fold(0.0_f64, |m, e| m.max((e - mean).abs() / mean))
    }

    /// Writes `curve_000.csv … curve_K.csv` and `summary.csv` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (k, c) in self.curves.iter().enumerate() {
            c.save(&dir.join(format!("curve_{k:03}.csv")))?;
        }
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for (i, e) in self.segment_energies.iter().enumerate() {
            w.serialize(SummaryRow {
                k: i + 1,
                segment_energy: crate::fmt_f64(*e),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Discrete geodesic of order `steps` from rod `a` to rod `b`.
///
/// Fails with the solver residual when Newton does not converge.
pub fn rod_morph(
    a: &RodCurve,
    b: &RodCurve,
    steps: usize,
    kind: RodEnergyKind,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<RodMorph> {
    let (xa, xb) = rod_endpoints(a, b)?;
    let model = rod_energy(kind, a.len(), delta)?;
    let result = crate::geodesic::solve_geodesic(&xa, &xb, steps, model.as_ref(), cfg)?.into_converged()?;
    let pts = result.path.points();
    let segment_energies = pts
        .windows(2)
        .map(|p| model.energy(&p[0], &p[1]).map(|w| w * steps as f64))
        .collect::<Result<Vec<_>>>()?;
    let curves = pts.iter().map(RodCurve::from_coord).collect::<Result<Vec<_>>>()?;
    Ok(RodMorph {
        result,
        curves,
        segment_energies,
    })
}

/// [`rod_morph`] between two curve files, writing the results to `out_dir`.
pub fn run_rod_morph(
    curve_a: &Path,
    curve_b: &Path,
    steps: usize,
    kind: RodEnergyKind,
    out_dir: &Path,
    cfg: &SolverConfig,
) -> Result<RodMorph> {
    let a = RodCurve::load(curve_a)?;
    let b = RodCurve::load(curve_b)?;
    let morph = rod_morph(&a, &b, steps, kind, crate::zoo::rod::DEFAULT_DELTA, cfg)?;
    morph.write_to_dir(out_dir)?;
    Ok(morph)
}
