//! Discrete geodesics on a hypersurface `M = {d = 0}` of the ambient space,
//! via the Lagrangian `E(X) - Σ_k λ_k d(x_k)`.

use super::{finish, initial_interior, solve_chain, GeodesicResult, PointConstraints, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{check_point, Coord, EnergyModel, Matrix};

/// Points with `|d| ≤ LEVEL_SET_TOL` count as lying on the surface.
pub const LEVEL_SET_TOL: f64 = 1e-10;

const HESSIAN_FD_STEP: f64 = 1e-6;
const PROJECTION_MAX_ITER: usize = 50;

/// Level-set description of a hypersurface. `d` should be a local signed
/// distance, so `‖∇d‖ ≈ 1` near the zero set.
pub trait ConstraintModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &Coord) -> Result<f64>;
    fn gradient(&self, x: &Coord) -> Result<Coord>;

    /// Hessian of `d`; central differences of the gradient unless overridden.
    fn hessian(&self, x: &Coord) -> Result<Matrix> {
        let n = x.len();
        let h = HESSIAN_FD_STEP;
        let mut m = Matrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            m.set_column(j, &((self.gradient(&xp)? - self.gradient(&xm)?) / (2.0 * h)));
        }
        Ok((&m + m.transpose()) * 0.5)
    }

    /// Nearest-point projection onto `{d = 0}` by Newton steps on `d`.
    fn project(&self, x: &Coord) -> Result<Coord> {
        let mut p = x.clone();
        for _ in 0..PROJECTION_MAX_ITER {
            let v = self.value(&p)?;
            if v.abs() <= 1e-15 {
                return Ok(p);
            }
            let g = self.gradient(&p)?;
            let gg = g.norm_squared();
            if !(gg > 0.0) {
                return Err(Error::Domain(format!("{}: vanishing gradient", self.name())));
            }
            let next = &p - g * (v / gg);
            if (&next - &p).amax() <= 1e-16 * (1.0 + p.amax()) {
                return Ok(next);
            }
            p = next;
        }
        Ok(p)
    }
}

pub(crate) fn check_on_surface(c: &dyn ConstraintModel, x: &Coord, label: &str) -> Result<()> {
    let v = c.value(x)?;
    if v.abs() > LEVEL_SET_TOL {
        return Err(Error::Precondition(format!(
            "{label} is off the level set of {} (d = {v:e})",
            c.name()
        )));
    }
    Ok(())
}

/// Least-squares multiplier `μ` with `r ≈ μ ∇d`.
pub(crate) fn ls_multiplier(grad: &Coord, r: &Coord) -> f64 {
    let gg = grad.norm_squared();
    if gg > 0.0 {
        grad.dot(r) / gg
    } else {
        0.0
    }
}

/// Discrete geodesic on `{d = 0}` between surface points `xa` and `xb`.
///
/// Solves `W_,2[x_{k-1},x_k] + W_,1[x_k,x_{k+1}] = μ_k ∇d(x_k)` together with
/// `d(x_k) = 0` by Newton on the block-tridiagonal KKT system. The reported
/// multipliers are `λ_k = K μ_k`, matching the Lagrangian `E - Σ λ_k d(x_k)`.
pub fn solve_geodesic_constrained(
    xa: &Coord,
    xb: &Coord,
    steps: usize,
    model: &dyn EnergyModel,
    constraint: &dyn ConstraintModel,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    check_point(model, xa)?;
    check_point(model, xb)?;
    if constraint.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: constraint.dim(),
        });
    }
    check_on_surface(constraint, xa, "x_A")?;
    check_on_surface(constraint, xb, "x_B")?;
    if steps == 1 {
        let path = crate::model::DiscretePath::new(vec![xa.clone(), xb.clone()])?;
        return finish(path, model, 0.0, 0, true, Some(Vec::new()));
    }

    let interior = initial_interior(xa, xb, steps, &cfg.init)?
        .iter()
        .map(|x| constraint.project(x))
        .collect::<Result<Vec<_>>>()?;
    // initial multipliers from a least-squares fit of the unconstrained residual
    let multipliers = (1..steps)
        .map(|k| {
            let prev = if k == 1 { xa } else { &interior[k - 2] };
            let next = if k + 1 == steps { xb } else { &interior[k] };
            let here = &interior[k - 1];
            let r = model.grad2(prev, here)? + model.grad1(here, next)?;
            Ok(Coord::from_element(1, ls_multiplier(&constraint.gradient(here)?, &r)))
        })
        .collect::<Result<Vec<_>>>()?;

    let constraints = PointConstraints::LevelSet(constraint);
    let (path, mus, residual, iterations, converged) =
        solve_chain(xa, xb, interior, multipliers, model, &constraints, cfg)?;
    let lambdas = mus.iter().map(|m| m[0] * steps as f64).collect();
    finish(path, model, residual, iterations, converged, Some(lambdas))
}
