//! Closed-form geodesic quantities used as references in convergence studies.

use crate::error::{Error, Result};
use crate::model::Coord;
use crate::zoo::SphereChart;

const ANTIPODAL_TOL: f64 = 1e-12;

/// Continuous geodesic calculus of a space with known closed forms.
pub trait Oracle: Send + Sync {
    /// Point at parameter `t ∈ [0, 1]` of the geodesic from `xa` to `xb`.
    fn geodesic(&self, xa: &Coord, xb: &Coord, t: f64) -> Result<Coord>;
    fn log(&self, xa: &Coord, xb: &Coord) -> Result<Coord>;
    fn exp(&self, x: &Coord, v: &Coord) -> Result<Coord>;
    /// Parallel transport of `w` from `xa` to `xb` along the geodesic.
    fn transport(&self, xa: &Coord, xb: &Coord, w: &Coord) -> Result<Coord>;
}

/// Straight lines in Euclidean space.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatOracle;

impl Oracle for FlatOracle {
    fn geodesic(&self, xa: &Coord, xb: &Coord, t: f64) -> Result<Coord> {
        Ok(xa + (xb - xa) * t)
    }

    fn log(&self, xa: &Coord, xb: &Coord) -> Result<Coord> {
        Ok(xb - xa)
    }

    fn exp(&self, x: &Coord, v: &Coord) -> Result<Coord> {
        Ok(x + v)
    }

    fn transport(&self, _xa: &Coord, _xb: &Coord, w: &Coord) -> Result<Coord> {
        Ok(w.clone())
    }
}

impl Oracle for SphereChart {
    fn geodesic(&self, xa: &Coord, xb: &Coord, t: f64) -> Result<Coord> {
        SphereChart::geodesic(self, xa, xb, t)
    }

    fn log(&self, xa: &Coord, xb: &Coord) -> Result<Coord> {
        SphereChart::log(self, xa, xb)
    }

    fn exp(&self, x: &Coord, v: &Coord) -> Result<Coord> {
        SphereChart::exp(self, x, v)
    }

    fn transport(&self, xa: &Coord, xb: &Coord, w: &Coord) -> Result<Coord> {
        SphereChart::transport(self, xa, xb, w)
    }
}

/// Great circles on the centered round sphere `|x| = radius` of any dimension,
/// in ambient coordinates.
#[derive(Debug, Clone, Copy)]
pub struct RoundSphereOracle {
    pub radius: f64,
}

struct Arc {
    p: Coord,
    u: Coord,
    angle: f64,
}

impl RoundSphereOracle {
    fn arc(&self, xa: &Coord, xb: &Coord) -> Result<Arc> {
        let p = xa / xa.norm();
        let q = xb / xb.norm();
        let c = p.dot(&q).clamp(-1.0, 1.0);
        if c <= -1.0 + ANTIPODAL_TOL {
            return Err(Error::Domain("antipodal endpoints have no unique geodesic".into()));
        }
        let ortho = &q - &p * c;
        let on = ortho.norm();
        let angle = on.atan2(c);
        let u = if on > 0.0 { ortho / on } else { Coord::zeros(p.len()) };
        Ok(Arc { p, u, angle })
    }
}

impl Oracle for RoundSphereOracle {
    fn geodesic(&self, xa: &Coord, xb: &Coord, t: f64) -> Result<Coord> {
        let a = self.arc(xa, xb)?;
        let phi = a.angle * t;
        Ok((&a.p * phi.cos() + &a.u * phi.sin()) * self.radius)
    }

    fn log(&self, xa: &Coord, xb: &Coord) -> Result<Coord> {
        let a = self.arc(xa, xb)?;
        Ok(a.u * (a.angle * self.radius))
    }

    fn exp(&self, x: &Coord, v: &Coord) -> Result<Coord> {
        let p = x / x.norm();
        // drop any normal component
        let v = v - &p * p.dot(v);
        let speed = v.norm() / self.radius;
        if speed == 0.0 {
            return Ok(p * self.radius);
        }
        let dir = &v / v.norm();
        Ok((p * speed.cos() + dir * speed.sin()) * self.radius)
    }

    fn transport(&self, xa: &Coord, xb: &Coord, w: &Coord) -> Result<Coord> {
        let a = self.arc(xa, xb)?;
        let s = a.u.dot(w);
        // rotate the (p, u) plane by the arc angle, fix its complement
        Ok(w - (&a.u * (1.0 - a.angle.cos()) + &a.p * a.angle.sin()) * s)
    }
}
