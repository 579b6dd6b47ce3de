//! The unit sphere in stereographic coordinates.
//!
//! Chart: projection from the north pole onto the equatorial plane, with
//! parametrization `X(x) = (2x₁, 2x₂, |x|² - 1) / (1 + |x|²)` and conformal
//! metric `g_x = 4 Id / (1 + |x|²)²`. The energy is the chart-quadratic
//! `W[x, y] = g_x(y - x, y - x)`, which is not symmetric.
//!
//! [`SphereChart`] also carries closed-form geodesics, logarithm, exponential,
//! parallel transport and covariant derivative, obtained by lifting to the
//! embedded sphere and using great-circle formulas.

use crate::error::{Error, Result};
use crate::model::{coord, Coord, EnergyModel, Matrix};

type Vec3 = [f64; 3];

fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Closest approach to the projection pole before oracles refuse to answer.
const POLE_TOL: f64 = 1e-8;
const ANTIPODAL_TOL: f64 = 1e-12;

fn check_chart_point(x: &Coord) -> Result<()> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: x.len(),
        });
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite chart point".into()));
    }
    Ok(())
}

/// `4 / (1 + |x|²)²`.
pub fn conformal_factor(x: &Coord) -> f64 {
    let s = 1.0 + x.norm_squared();
    4.0 / (s * s)
}

/// Chart-quadratic energy `W[x, y] = g_x(y - x, y - x)` with analytic derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SphereChartEnergy;

pub fn sphere_chart_energy() -> SphereChartEnergy {
    SphereChartEnergy
}

impl SphereChartEnergy {
    /// `∇c` and `∇²c` of the conformal factor `c(x) = 4 (1 + |x|²)^{-2}`.
    fn factor_derivatives(x: &Coord) -> (f64, Coord, Matrix) {
        let s = 1.0 + x.norm_squared();
        let c = 4.0 / (s * s);
        let grad = x * (-16.0 / s.powi(3));
        let hess = Matrix::identity(2, 2) * (-16.0 / s.powi(3)) + (x * x.transpose()) * (96.0 / s.powi(4));
        (c, grad, hess)
    }
}

impl EnergyModel for SphereChartEnergy {
    fn name(&self) -> &str {
        "sphere-chart"
    }

    fn dim(&self) -> usize {
        2
    }

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        Ok(conformal_factor(x) * (y - x).norm_squared())
    }

    fn grad1(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        let (c, dc, _) = Self::factor_derivatives(x);
        let delta = y - x;
        Ok(dc * delta.norm_squared() - delta * (2.0 * c))
    }

    fn grad2(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        Ok((y - x) * (2.0 * conformal_factor(x)))
    }

    fn hess11(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        let (c, dc, ddc) = Self::factor_derivatives(x);
        let delta = y - x;
        Ok(ddc * delta.norm_squared() - (&dc * delta.transpose()) * 2.0 - (&delta * dc.transpose()) * 2.0
            + Matrix::identity(2, 2) * (2.0 * c))
    }

    fn hess12(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        let (c, dc, _) = Self::factor_derivatives(x);
        let delta = y - x;
        Ok((dc * delta.transpose()) * 2.0 - Matrix::identity(2, 2) * (2.0 * c))
    }

    fn hess22(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        check_chart_point(x)?;
        check_chart_point(y)?;
        Ok(Matrix::identity(2, 2) * (2.0 * conformal_factor(x)))
    }

    fn is_symmetric(&self) -> bool {
        false
    }

    fn derivatives_analytic(&self) -> bool {
        true
    }

    fn reference_metric(&self, x: &Coord) -> Option<Result<Matrix>> {
        Some(check_chart_point(x).map(|_| Matrix::identity(2, 2) * conformal_factor(x)))
    }
}

/// Analytic geometry of the stereographic sphere chart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SphereChart;

pub fn sphere_oracles() -> SphereChart {
    SphereChart
}

/// Unit tangent frame of the great circle from `p` towards `q`.
struct GreatCircle {
    start: Vec3,
    tangent: Vec3,
    angle: f64,
}

impl SphereChart {
    /// Chart point to the embedded sphere.
    pub fn to_sphere(&self, x: &Coord) -> Result<Vec3> {
        check_chart_point(x)?;
        let r2 = x.norm_squared();
        let s = 1.0 + r2;
        Ok([2.0 * x[0] / s, 2.0 * x[1] / s, (r2 - 1.0) / s])
    }

    /// Embedded point back to the chart, `x = (X₁, X₂) / (1 - X₃)`.
    pub fn from_sphere(&self, p: Vec3) -> Result<Coord> {
        let denom = 1.0 - p[2];
        if denom.abs() < POLE_TOL {
            return Err(Error::Domain("point too close to the projection pole".into()));
        }
        Ok(coord(&[p[0] / denom, p[1] / denom]))
    }

    /// Chart differential `DX(x) v`.
    pub fn differential(&self, x: &Coord, v: &Coord) -> Result<Vec3> {
        check_chart_point(x)?;
        let r2 = x.norm_squared();
        let s = 1.0 + r2;
        let xv = x.dot(v);
        Ok([
            2.0 * v[0] / s - 4.0 * x[0] * xv / (s * s),
            2.0 * v[1] / s - 4.0 * x[1] * xv / (s * s),
            4.0 * xv / (s * s),
        ])
    }

    /// Differential of the inverse chart at a sphere point, applied to a tangent vector.
    pub fn chart_vector(&self, p: Vec3, v: Vec3) -> Result<Coord> {
        let denom = 1.0 - p[2];
        if denom.abs() < POLE_TOL {
            return Err(Error::Domain("point too close to the projection pole".into()));
        }
        Ok(coord(&[
            v[0] / denom + p[0] * v[2] / (denom * denom),
            v[1] / denom + p[1] * v[2] / (denom * denom),
        ]))
    }

    pub fn metric(&self, x: &Coord) -> Result<Matrix> {
        check_chart_point(x)?;
        Ok(Matrix::identity(2, 2) * conformal_factor(x))
    }

    fn great_circle(&self, xa: &Coord, xb: &Coord) -> Result<GreatCircle> {
        let p = self.to_sphere(xa)?;
        let q = self.to_sphere(xb)?;
        for pt in [p, q] {
            if (pt[2] - 1.0).abs() < POLE_TOL {
                return Err(Error::Domain("point too close to the projection pole".into()));
            }
        }
        let c = dot3(p, q).clamp(-1.0, 1.0);
        if c <= -1.0 + ANTIPODAL_TOL {
            return Err(Error::Domain("antipodal endpoints have no unique geodesic".into()));
        }
        let ortho = add3(q, scale3(p, -c));
        let on = norm3(ortho);
        let angle = on.atan2(c);
        let tangent = if on > 0.0 { scale3(ortho, 1.0 / on) } else { [0.0; 3] };
        Ok(GreatCircle {
            start: p,
            tangent,
            angle,
        })
    }

    /// Great-circle distance.
    pub fn dist(&self, xa: &Coord, xb: &Coord) -> Result<f64> {
        Ok(self.great_circle(xa, xb)?.angle)
    }

    /// Constant-speed geodesic from `xa` (t = 0) to `xb` (t = 1).
    pub fn geodesic(&self, xa: &Coord, xb: &Coord, t: f64) -> Result<Coord> {
        if t == 0.0 {
            check_chart_point(xa)?;
            return Ok(xa.clone());
        }
        if t == 1.0 {
            check_chart_point(xb)?;
            return Ok(xb.clone());
        }
        let gc = self.great_circle(xa, xb)?;
        let phi = gc.angle * t;
        self.from_sphere(add3(scale3(gc.start, phi.cos()), scale3(gc.tangent, phi.sin())))
    }

    /// Riemannian logarithm `log_{xa}(xb)` in chart coordinates.
    pub fn log(&self, xa: &Coord, xb: &Coord) -> Result<Coord> {
        let gc = self.great_circle(xa, xb)?;
        self.chart_vector(gc.start, scale3(gc.tangent, gc.angle))
    }

    /// Riemannian exponential `exp_x(v)` in chart coordinates.
    pub fn exp(&self, x: &Coord, v: &Coord) -> Result<Coord> {
        let p = self.to_sphere(x)?;
        let w = self.differential(x, v)?;
        let speed = norm3(w);
        if speed == 0.0 {
            return Ok(x.clone());
        }
        self.from_sphere(add3(scale3(p, speed.cos()), scale3(w, speed.sin() / speed)))
    }

    /// Parallel transport of `w` (chart vector at `xa`) to the point at
    /// parameter `t` of the geodesic from `xa` to `xb`.
    pub fn transport_along(&self, xa: &Coord, xb: &Coord, w: &Coord, t: f64) -> Result<Coord> {
        let gc = self.great_circle(xa, xb)?;
        let wv = self.differential(xa, w)?;
        if gc.angle == 0.0 {
            return Ok(w.clone());
        }
        let normal = cross3(gc.start, gc.tangent);
        let (a, b) = (dot3(wv, gc.tangent), dot3(wv, normal));
        let phi = gc.angle * t;
        let here = add3(scale3(gc.start, phi.cos()), scale3(gc.tangent, phi.sin()));
        let tangent_here = add3(scale3(gc.start, -phi.sin()), scale3(gc.tangent, phi.cos()));
        self.chart_vector(here, add3(scale3(tangent_here, a), scale3(normal, b)))
    }

    /// Parallel transport of `w` from `xa` to `xb` along the connecting geodesic.
    pub fn transport(&self, xa: &Coord, xb: &Coord, w: &Coord) -> Result<Coord> {
        self.transport_along(xa, xb, w, 1.0)
    }

    /// Christoffel contraction `Γ_x(a, b)` of the conformal chart metric.
    pub fn christoffel(&self, x: &Coord, a: &Coord, b: &Coord) -> Result<Coord> {
        check_chart_point(x)?;
        let grad_phi = x * (-2.0 / (1.0 + x.norm_squared()));
        Ok(a * grad_phi.dot(b) + b * grad_phi.dot(a) - &grad_phi * a.dot(b))
    }

    /// `∇_θ η = Dη(x) θ + Γ_x(θ, η(x))`, given the directional derivative `Dη(x) θ`.
    pub fn covariant_derivative(&self, x: &Coord, theta: &Coord, eta: &Coord, d_eta: &Coord) -> Result<Coord> {
        Ok(d_eta + self.christoffel(x, theta, eta)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::check_consistency;
    use crate::model::metric_from_energy;

    #[test]
    fn metric_at_origin_and_test_point() {
        let m = sphere_chart_energy();
        let g0 = metric_from_energy(&m, &coord(&[0.0, 0.0])).unwrap();
        assert!((g0.matrix - Matrix::identity(2, 2) * 4.0).amax() < 1e-15);
        let g = metric_from_energy(&m, &coord(&[0.5, 0.0])).unwrap();
        assert!((g.matrix - Matrix::identity(2, 2) * 2.56).amax() < 1e-14);
        let h = 1e-3;
        let w = m.energy(&coord(&[0.0, 0.0]), &coord(&[h, 0.0])).unwrap();
        assert!((w - 4.0 * h * h).abs() < 1e-18);
    }

    #[test]
    fn consistency_at_test_point() {
        let r = check_consistency(&sphere_chart_energy(), &coord(&[0.5, 0.0]), 1e-8).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn test_pair_embedding_and_distance() {
        let s = sphere_oracles();
        let pa = s.to_sphere(&coord(&[0.5, 0.0])).unwrap();
        let pb = s.to_sphere(&coord(&[-0.5, 2.0])).unwrap();
        assert!((pa[0] - 0.8).abs() < 1e-15 && (pa[2] + 0.6).abs() < 1e-15);
        assert!((pb[0] + 4.0 / 21.0).abs() < 1e-15);
        assert!((pb[1] - 16.0 / 21.0).abs() < 1e-15);
        assert!((pb[2] - 13.0 / 21.0).abs() < 1e-15);
        let d = s.dist(&coord(&[0.5, 0.0]), &coord(&[-0.5, 2.0])).unwrap();
        let expected = (0.8 * (-4.0 / 21.0) - 0.6 * 13.0 / 21.0_f64).acos();
        assert!((d - expected).abs() < 1e-14);
        assert!((d - 2.1221).abs() < 1e-4);
    }

    #[test]
    fn geodesic_endpoints_and_inverse_pair() {
        let s = sphere_oracles();
        let (a, b) = (coord(&[0.5, 0.0]), coord(&[-0.5, 2.0]));
        assert_eq!(s.geodesic(&a, &b, 0.0).unwrap(), a);
        assert_eq!(s.geodesic(&a, &b, 1.0).unwrap(), b);
        let back = s.exp(&a, &s.log(&a, &b).unwrap()).unwrap();
        assert!((back - &b).amax() < 1e-12);
    }

    #[test]
    fn oracles_reject_antipodes_and_pole() {
        let s = sphere_oracles();
        // antipode of x in the chart is -x / |x|²
        let a = coord(&[0.5, 0.0]);
        let anti = coord(&[-2.0, 0.0]);
        assert!(matches!(s.dist(&a, &anti), Err(Error::Domain(_))));
        assert!(s.from_sphere([0.0, 0.0, 1.0]).is_err());
    }
}
