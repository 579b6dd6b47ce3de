use std::io::Write;

use super::{exp2, log2, OpConfig, Space};
use crate::error::{Error, Result};
use crate::geodesic::ls_multiplier;
use crate::linalg::newton_dense;
use crate::model::{check_point, Coord, DiscretePath, Matrix};

/// One rung of Schild's ladder from `x_{k-1}` to `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportStep {
    /// `x_{k-1} + ζ_{k-1}`.
    pub x_p_prev: Coord,
    /// Midpoint of the rung diagonal from `x^p_{k-1}` to `x_k`.
    pub x_c: Coord,
    /// `EXP²_{x_{k-1}}(x^c - x_{k-1})`.
    pub x_p: Coord,
    /// `x^p - x_k`.
    pub zeta: Coord,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportTrace {
    pub steps: Vec<TransportStep>,
}

impl TransportTrace {
    /// CSV with columns `k, x_c_*, x_p_*, zeta_*`, one row per rung (`k ≥ 1`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.steps.first().map_or(0, |s| s.zeta.len());
        let mut header = vec!["k".to_string()];
        for prefix in ["x_c", "x_p", "zeta"] {
            header.extend((0..d).map(|i| format!("{prefix}_{i}")));
        }
        w.write_record(&header)?;
        for (k, s) in self.steps.iter().enumerate() {
            let mut row = vec![(k + 1).to_string()];
            for v in [&s.x_c, &s.x_p, &s.zeta] {
                row.extend(v.iter().map(|x| crate::fmt_f64(*x)));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A single ladder rung: transports `ζ_{k-1}` at `x_prev` to `x_next`.
pub fn transport_step(
    space: &Space<'_>,
    x_prev: &Coord,
    x_next: &Coord,
    zeta_prev: &Coord,
    cfg: &OpConfig,
) -> Result<TransportStep> {
    let x_p_prev = x_prev + zeta_prev;
    let x_c = &x_p_prev
        + log2(space, &x_p_prev, x_next, cfg).map_err(|e| e.in_stage("rung midpoint"))?;
    let x_p = exp2(space, x_prev, &(&x_c - x_prev), cfg).map_err(|e| e.in_stage("rung completion"))?;
    let zeta = &x_p - x_next;
    Ok(TransportStep {
        x_p_prev,
        x_c,
        x_p,
        zeta,
    })
}

/// Discrete parallel transport of `ζ₀` along `path` by Schild's ladder.
///
/// Returns `ζ_K` with the full ladder trace. Vectors live in coordinates:
/// `ζ_k` is the displacement `x^p_k - x_k`, so it should be small compared to
/// the geometry.
pub fn parallel_transport(
    space: &Space<'_>,
    path: &DiscretePath,
    zeta0: &Coord,
    cfg: &OpConfig,
) -> Result<(Coord, TransportTrace)> {
    cfg.validate()?;
    check_point(space.energy, zeta0)?;
    if path.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: path.dim(),
        });
    }
    let mut trace = TransportTrace::default();
    let mut zeta = zeta0.clone();
    for k in 1..=path.steps() {
        let step = transport_step(space, path.point(k - 1), path.point(k), &zeta, cfg).map_err(|e| e.at_step(k))?;
        zeta = step.zeta.clone();
        trace.steps.push(step);
    }
    Ok((zeta, trace))
}

/// Inverts one ladder rung: finds `ζ_{k-1}` at `x_prev` whose transport to
/// `x_next` is `zeta_next`.
///
/// The rung midpoint `b` and the start `a = x_prev + ζ_{k-1}` solve the coupled
/// system `W_,2[a,b] + W_,1[b,x_next] = 0`,
/// `W_,2[x_prev,b] + W_,1[b, x_next + zeta_next] = 0`.
pub fn inverse_transport_step(
    space: &Space<'_>,
    x_prev: &Coord,
    x_next: &Coord,
    zeta_next: &Coord,
    cfg: &OpConfig,
) -> Result<Coord> {
    let model = space.energy;
    let d = model.dim();
    let x_p = x_next + zeta_next;
    space.check(x_prev, "x_{k-1}")?;
    space.check(x_next, "x_k")?;
    space.check(&x_p, "x_k + zeta_k")?;

    let mut b0 = (x_prev + &x_p) * 0.5;
    let mut a0 = x_prev + zeta_next;
    if let Some(c) = space.constraint {
        b0 = c.project(&b0)?;
        a0 = c.project(&a0)?;
    }
    let tol = cfg.inner.newton_tol;
    let max_iter = cfg.inner.max_iter;
    let stage = "inverse transport";

    // residual rows [F1; F2] and their Jacobian in (b, a)
    let unconstrained = |b: &Coord, a: &Coord| -> Result<(Coord, Coord, Matrix)> {
        let f1 = model.grad2(a, b)? + model.grad1(b, x_next)?;
        let f2 = model.grad2(x_prev, b)? + model.grad1(b, &x_p)?;
        let mut j = Matrix::zeros(2 * d, 2 * d);
        j.view_mut((0, 0), (d, d))
            .copy_from(&(model.hess22(a, b)? + model.hess11(b, x_next)?));
        j.view_mut((0, d), (d, d)).copy_from(&model.hess21(a, b)?);
        j.view_mut((d, 0), (d, d))
            .copy_from(&(model.hess22(x_prev, b)? + model.hess11(b, &x_p)?));
        Ok((f1, f2, j))
    };

    let a = match space.constraint {
        None => {
            let mut z0 = Coord::zeros(2 * d);
            z0.rows_mut(0, d).copy_from(&b0);
            z0.rows_mut(d, d).copy_from(&a0);
            let out = newton_dense(z0, tol, max_iter, space.step_mode(), stage, |z| {
                let b = z.rows(0, d).clone_owned();
                let a = z.rows(d, d).clone_owned();
                let (f1, f2, j) = unconstrained(&b, &a)?;
                let mut r = Coord::zeros(2 * d);
                r.rows_mut(0, d).copy_from(&f1);
                r.rows_mut(d, d).copy_from(&f2);
                Ok((r, j))
            })?;
            out.solution.rows(d, d).clone_owned()
        }
        Some(c) => {
            let n = 2 * d + 2;
            let (f1, f2, _) = unconstrained(&b0, &a0)?;
            let nb = c.gradient(&b0)?;
            let mut z0 = Coord::zeros(n);
            z0.rows_mut(0, d).copy_from(&b0);
            z0.rows_mut(d, d).copy_from(&a0);
            z0[2 * d] = ls_multiplier(&nb, &f1);
            z0[2 * d + 1] = ls_multiplier(&nb, &f2);
            let out = newton_dense(z0, tol, max_iter, space.step_mode(), stage, |z| {
                let b = z.rows(0, d).clone_owned();
                let a = z.rows(d, d).clone_owned();
                let (mu1, mu2) = (z[2 * d], z[2 * d + 1]);
                let (f1, f2, jf) = unconstrained(&b, &a)?;
                let nb = c.gradient(&b)?;
                let hb = c.hessian(&b)?;
                let mut r = Coord::zeros(n);
                r.rows_mut(0, d).copy_from(&(f1 - &nb * mu1));
                r.rows_mut(d, d).copy_from(&(f2 - &nb * mu2));
                r[2 * d] = c.value(&b)?;
                r[2 * d + 1] = c.value(&a)?;
                let mut j = Matrix::zeros(n, n);
                j.view_mut((0, 0), (2 * d, 2 * d)).copy_from(&jf);
                let mut top = j.view_mut((0, 0), (d, d));
                top -= &hb * mu1;
                let mut bottom = j.view_mut((d, 0), (d, d));
                bottom -= &hb * mu2;
                j.view_mut((0, 2 * d), (d, 1)).copy_from(&(-&nb));
                j.view_mut((d, 2 * d + 1), (d, 1)).copy_from(&(-&nb));
                j.view_mut((2 * d, 0), (1, d)).copy_from(&nb.transpose());
                j.view_mut((2 * d + 1, d), (1, d)).copy_from(&c.gradient(&a)?.transpose());
                Ok((r, j))
            })?;
            out.solution.rows(d, d).clone_owned()
        }
    };
    Ok(a - x_prev)
}

/// Inverse of [`parallel_transport`]: transports `zeta_end` at the last point
/// of `path` back to the first one.
pub fn inverse_transport(space: &Space<'_>, path: &DiscretePath, zeta_end: &Coord, cfg: &OpConfig) -> Result<Coord> {
    cfg.validate()?;
    check_point(space.energy, zeta_end)?;
    let mut zeta = zeta_end.clone();
    for k in (1..=path.steps()).rev() {
        zeta = inverse_transport_step(space, path.point(k - 1), path.point(k), &zeta, cfg).map_err(|e| e.at_step(k))?;
    }
    Ok(zeta)
}

/// Discrete connection `P⁻¹_{x, x+ξ}(η₁) - η₀`, approximating `τ ∇_ξ η`.
///
/// `η₀` is the field at `x`, `η₁` the field at `x + ξ`. On a constrained space
/// `x + ξ` and `x + ξ + η₁` must lie on the surface.
pub fn discrete_connection(
    space: &Space<'_>,
    x: &Coord,
    xi: &Coord,
    eta0: &Coord,
    eta1: &Coord,
    cfg: &OpConfig,
) -> Result<Coord> {
    cfg.validate()?;
    check_point(space.energy, eta0)?;
    let path = DiscretePath::new(vec![x.clone(), x + xi])?;
    Ok(inverse_transport(space, &path, eta1, cfg)? - eta0)
}
