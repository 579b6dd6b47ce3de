//! Executable form of the consistency conditions that tie `W` to its metric:
//! `W[x,x] = 0`, `W_,1[x,x] = W_,2[x,x] = 0`, `W_,22[x,x] = 2 g_x` and
//! `W_,11 = -W_,12 = -W_,21 = W_,22` on the diagonal.

use serde::Serialize;

use crate::error::Result;
use crate::model::{check_point, max_abs, metric_from_energy, Coord, EnergyModel};

/// One consistency identity: its residual and whether it met the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Identity {
    pub residual: f64,
    pub passed: bool,
}

impl Identity {
    fn new(residual: f64, tol: f64) -> Self {
        Self {
            residual,
            passed: residual <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub tol: f64,
    pub energy_vanishes: Identity,
    pub grad1_vanishes: Identity,
    pub grad2_vanishes: Identity,
    pub hess22_is_twice_metric: Identity,
    pub hess11_equals_hess22: Identity,
    pub hess12_opposes_hess22: Identity,
    pub hess21_opposes_hess22: Identity,
}

impl ConsistencyReport {
    pub fn identities(&self) -> [(&'static str, Identity); 7] {
        [
            ("W[x,x]=0", self.energy_vanishes),
            ("W_,1[x,x]=0", self.grad1_vanishes),
            ("W_,2[x,x]=0", self.grad2_vanishes),
            ("W_,22=2g", self.hess22_is_twice_metric),
            ("W_,11=W_,22", self.hess11_equals_hess22),
            ("W_,12=-W_,22", self.hess12_opposes_hess22),
            ("W_,21=-W_,22", self.hess21_opposes_hess22),
        ]
    }

    pub fn passed(&self) -> bool {
        self.identities().iter().all(|(_, id)| id.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.identities()
            .iter()
            .fold(0.0_f64, |acc, (_, id)| acc.max(id.residual))
    }
}

/// Evaluates every consistency identity at `x`. Matrix residuals use the
/// max-abs-entry norm, vector residuals the Euclidean norm.
///
/// The metric compared against `W_,22` is the model's independently coded
/// metric when it has one, otherwise [`metric_from_energy`].
pub fn check_consistency(model: &dyn EnergyModel, x: &Coord, tol: f64) -> Result<ConsistencyReport> {
    check_point(model, x)?;
    let w = model.energy(x, x)?;
    let g1 = model.grad1(x, x)?;
    let g2 = model.grad2(x, x)?;
    let h11 = model.hess11(x, x)?;
    let h12 = model.hess12(x, x)?;
    let h21 = model.hess21(x, x)?;
    let h22 = model.hess22(x, x)?;
    let metric = match model.reference_metric(x) {
        Some(g) => g?,
        None => metric_from_energy(model, x)?.matrix,
    };

    Ok(ConsistencyReport {
        tol,
        energy_vanishes: Identity::new(w.abs(), tol),
        grad1_vanishes: Identity::new(g1.norm(), tol),
        grad2_vanishes: Identity::new(g2.norm(), tol),
        hess22_is_twice_metric: Identity::new(max_abs(&(&h22 - metric * 2.0)), tol),
        hess11_equals_hess22: Identity::new(max_abs(&(&h11 - &h22)), tol),
        hess12_opposes_hess22: Identity::new(max_abs(&(&h12 + &h22)), tol),
        hess21_opposes_hess22: Identity::new(max_abs(&(&h21 + &h22)), tol),
    })
}
