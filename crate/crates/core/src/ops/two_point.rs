use super::{Exp2Method, OpConfig, Space};
use crate::error::{Error, Result};
use crate::geodesic::ls_multiplier;
use crate::linalg::newton_dense;
use crate::model::{Coord, Matrix};

const FIXED_POINT_MAX_ITER: usize = 1000;

/// `LOG²_{x₀}(x₂)`: displacement from `x₀` to the midpoint of the order-2
/// discrete geodesic between `x₀` and `x₂`.
pub fn log2(space: &Space<'_>, x0: &Coord, x2: &Coord, cfg: &OpConfig) -> Result<Coord> {
    space.check(x0, "x_0")?;
    space.check(x2, "x_2")?;
    if x0 == x2 {
        return Ok(Coord::zeros(x0.len()));
    }
    let geo = space
        .geodesic(x0, x2, 2, &cfg.inner)
        .and_then(|g| g.into_converged())
        .map_err(|e| e.in_stage("log2"))?;
    Ok(geo.path.point(1) - x0)
}

/// `EXP²_x(ζ)`: the point `x₂` with `W_,2[x, x+ζ] + W_,1[x+ζ, x₂] = 0`.
///
/// Newton starts from `x + 2ζ`. On a constrained space both `x` and `x + ζ`
/// must lie on the surface; the result does too.
pub fn exp2(space: &Space<'_>, x: &Coord, zeta: &Coord, cfg: &OpConfig) -> Result<Coord> {
    let x1 = x + zeta;
    space.check(x, "x")?;
    space.check(&x1, "x + zeta")?;
    if zeta.iter().all(|v| *v == 0.0) {
        return Ok(x.clone());
    }
    match cfg.method {
        Exp2Method::Newton => exp2_newton(space, x, &x1, zeta, cfg),
        Exp2Method::FixedPoint => exp2_fixed_point(space, x, zeta, cfg),
    }
}

fn exp2_newton(space: &Space<'_>, x: &Coord, x1: &Coord, zeta: &Coord, cfg: &OpConfig) -> Result<Coord> {
    let model = space.energy;
    let d = model.dim();
    let g0 = model.grad2(x, x1)?;
    let tol = cfg.inner.newton_tol;
    let max_iter = cfg.inner.max_iter;
    let guess = x + zeta * 2.0;
    match space.constraint {
        None => {
            let out = newton_dense(guess, tol, max_iter, space.step_mode(), "exp2", |x2| {
                Ok((&g0 + model.grad1(x1, x2)?, model.hess12(x1, x2)?))
            })?;
            Ok(out.solution)
        }
        Some(c) => {
            let n1 = c.gradient(x1)?;
            let x2 = c.project(&guess)?;
            let mu = ls_multiplier(&n1, &(&g0 + model.grad1(x1, &x2)?));
            let mut z0 = Coord::zeros(d + 1);
            z0.rows_mut(0, d).copy_from(&x2);
            z0[d] = mu;
            let out = newton_dense(z0, tol, max_iter, space.step_mode(), "exp2", |z| {
                let x2 = z.rows(0, d).clone_owned();
                let mu = z[d];
                let mut r = Coord::zeros(d + 1);
                r.rows_mut(0, d).copy_from(&(&g0 + model.grad1(x1, &x2)? - &n1 * mu));
                r[d] = c.value(&x2)?;
                let mut j = Matrix::zeros(d + 1, d + 1);
                j.view_mut((0, 0), (d, d)).copy_from(&model.hess12(x1, &x2)?);
                j.view_mut((0, d), (d, 1)).copy_from(&(-&n1));
                j.view_mut((d, 0), (1, d)).copy_from(&c.gradient(&x2)?.transpose());
                Ok((r, j))
            })?;
            Ok(out.solution.rows(0, d).clone_owned())
        }
    }
}

fn exp2_fixed_point(space: &Space<'_>, x: &Coord, zeta: &Coord, cfg: &OpConfig) -> Result<Coord> {
    if space.constraint.is_some() {
        return Err(Error::InvalidInput(
            "fixed-point EXP² is only available on unconstrained spaces".into(),
        ));
    }
    let mut x2 = x + zeta * 2.0;
    let mut step = f64::INFINITY;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = &x2 + zeta - log2(space, x, &x2, cfg)?;
        step = (&next - &x2).norm();
        x2 = next;
        if step < cfg.fixed_point_tol {
            return Ok(x2);
        }
    }
    Err(Error::NotConverged {
        stage: "exp2 fixed point",
        iterations: FIXED_POINT_MAX_ITER,
        residual: step,
    })
}
