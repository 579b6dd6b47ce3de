//! Hypersurfaces given by a signed distance function, paired with the
//! ambient spring energy `|y - x|²`.

use crate::error::{Error, Result};
use crate::geodesic::ConstraintModel;
use crate::model::{Coord, Matrix};
use crate::zoo::flat::FlatEnergy;

const CLOSEST_POINT_MAX_ITER: usize = 100;

/// A level-set surface with a (local) signed distance.
#[derive(Debug, Clone, PartialEq)]
pub enum SdfSurface {
    /// Centered round sphere `|x| = radius` in `R^dim` (a circle for `dim = 2`).
    Round { dim: usize, radius: f64 },
    /// Centered axis-aligned ellipsoid with the given semi-axes.
    Ellipsoid { axes: Vec<f64> },
}

impl SdfSurface {
    pub fn unit_circle() -> Self {
        Self::Round { dim: 2, radius: 1.0 }
    }

    pub fn unit_sphere() -> Self {
        Self::Round { dim: 3, radius: 1.0 }
    }

    pub fn ellipsoid(axes: &[f64]) -> Result<Self> {
        if axes.len() < 2 || axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidInput("ellipsoid needs ≥ 2 positive semi-axes".into()));
        }
        Ok(Self::Ellipsoid {
            axes: axes.to_vec(),
        })
    }

    fn check(&self, x: &Coord) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Closest point on the ellipsoid: `p_i = a_i² x_i / (a_i² + t)` with `t`
    /// the root of `Σ (a_i x_i / (a_i² + t))² = 1`, found by damped Newton.
    fn ellipsoid_closest_point(axes: &[f64], x: &Coord) -> Result<Coord> {
        let lower = -axes.iter().fold(f64::INFINITY, |m, a| m.min(a * a));
        let f = |t: f64| -> (f64, f64) {
            let mut val = -1.0;
            let mut der = 0.0;
            for (a, xi) in axes.iter().zip(x.iter()) {
                let a2 = a * a;
                let q = a * xi / (a2 + t);
                val += q * q;
                der += -2.0 * q * q / (a2 + t);
            }
            (val, der)
        };
        let mut t = 0.0;
        for _ in 0..CLOSEST_POINT_MAX_ITER {
            let (val, der) = f(t);
            if val.abs() <= 1e-15 || der == 0.0 {
                break;
            }
            let mut next = t - val / der;
            if next <= lower {
                next = 0.5 * (t + lower);
            }
            if (next - t).abs() <= 1e-16 * (1.0 + t.abs()) {
                t = next;
                break;
            }
            t = next;
        }
        if !t.is_finite() {
            return Err(Error::Domain("ellipsoid closest-point iteration diverged".into()));
        }
        Ok(Coord::from_iterator(
            x.len(),
            axes.iter().zip(x.iter()).map(|(a, xi)| a * a * xi / (a * a + t)),
        ))
    }
}

impl ConstraintModel for SdfSurface {
    fn name(&self) -> &str {
        match self {
            Self::Round { dim: 2, .. } => "circle",
            Self::Round { .. } => "sphere",
            Self::Ellipsoid { .. } => "ellipsoid",
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Round { dim, .. } => *dim,
            Self::Ellipsoid { axes } => axes.len(),
        }
    }

    fn value(&self, x: &Coord) -> Result<f64> {
        self.check(x)?;
        match self {
            Self::Round { radius, .. } => Ok(x.norm() - radius),
            Self::Ellipsoid { axes } => {
                let p = Self::ellipsoid_closest_point(axes, x)?;
                let inside: f64 = axes.iter().zip(x.iter()).map(|(a, xi)| (xi / a).powi(2)).sum::<f64>() - 1.0;
                Ok(inside.signum() * (x - p).norm())
            }
        }
    }

    fn gradient(&self, x: &Coord) -> Result<Coord> {
        self.check(x)?;
        match self {
            Self::Round { .. } => {
                let r = x.norm();
                if r < 1e-12 {
                    return Err(Error::Domain("signed distance is not differentiable at the center".into()));
                }
                Ok(x / r)
            }
            Self::Ellipsoid { axes } => {
                let p = Self::ellipsoid_closest_point(axes, x)?;
                let n = Coord::from_iterator(x.len(), axes.iter().zip(p.iter()).map(|(a, pi)| pi / (a * a)));
                let nn = n.norm();
                if nn == 0.0 {
                    return Err(Error::Domain("degenerate ellipsoid normal".into()));
                }
                Ok(n / nn)
            }
        }
    }

    fn hessian(&self, x: &Coord) -> Result<Matrix> {
        match self {
            Self::Round { .. } => {
                let g = self.gradient(x)?;
                let r = x.norm();
                Ok((Matrix::identity(x.len(), x.len()) - &g * g.transpose()) / r)
            }
            Self::Ellipsoid { .. } => {
                // central differences of the normalized gradient
                let n = x.len();
                let h = 1e-6;
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
        }
    }
}

/// Spring energy on the ambient space together with the surface constraint.
pub fn sdf_spring_model(surface: SdfSurface) -> (FlatEnergy, SdfSurface) {
    (FlatEnergy::new(surface.dim()), surface)
}

/// Specialized discrete `EXP²` for the spring energy on a level-set surface.
///
/// With `x₁ = x + ζ` and `x₂ = x₁ + η`, optimality reads `ζ - η ⊥ T_{x₁}M`, so
/// `x₂ = x₁ + ζ - s n(x₁)` and only the scalar `s` with `d(x₂) = 0` is unknown.
/// Of the roots, the one reached by Newton from `s = 0` is returned.
pub fn spring_exp2_line_search(surface: &SdfSurface, x: &Coord, zeta: &Coord, tol: f64, max_iter: usize) -> Result<Coord> {
    let x1 = x + zeta;
    let n = surface.gradient(&x1)?;
    let base = &x1 + zeta;
    let mut s = 0.0;
    for iter in 0..=max_iter {
        let x2 = &base - &n * s;
        let d = surface.value(&x2)?;
        if d.abs() <= tol {
            return Ok(x2);
        }
        if iter == max_iter {
            return Err(Error::NotConverged {
                stage: "exp2 line search",
                iterations: max_iter,
                residual: d.abs(),
            });
        }
        let slope = -surface.gradient(&x2)?.dot(&n);
        if slope == 0.0 {
            return Err(Error::SingularPivot {
                stage: "exp2 line search",
                block: 0,
            });
        }
        s -= d / slope;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::coord;

    #[test]
    fn round_surface_distance_and_gradient() {
        let s = SdfSurface::unit_sphere();
        let x = coord(&[0.0, 2.0, 0.0]);
        assert!((s.value(&x).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.gradient(&x).unwrap() - coord(&[0.0, 1.0, 0.0])).amax() < 1e-15);
        assert!(s.gradient(&coord(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn ellipsoid_distance_matches_axis_points() {
        let s = SdfSurface::ellipsoid(&[2.0, 1.0, 0.5]).unwrap();
        // along an axis the closest point is the vertex
        assert!((s.value(&coord(&[3.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((s.value(&coord(&[0.0, 0.75, 0.0])).unwrap() + 0.25).abs() < 1e-12);
        let g = s.gradient(&coord(&[0.0, 0.0, 0.7])).unwrap();
        assert!((g - coord(&[0.0, 0.0, 1.0])).amax() < 1e-12);
    }

    #[test]
    fn ellipsoid_gradient_is_unit_near_surface() {
        let s = SdfSurface::ellipsoid(&[1.5, 1.0, 0.8]).unwrap();
        let p = s.project(&coord(&[0.9, 0.5, 0.3])).unwrap();
        assert!(s.value(&p).unwrap().abs() < 1e-12);
        for eps in [-0.05, 0.0, 0.05] {
            let q = &p + s.gradient(&p).unwrap() * eps;
            assert!((s.gradient(&q).unwrap().norm() - 1.0).abs() <= 0.1);
            assert!((s.value(&q).unwrap() - eps).abs() < 1e-9);
        }
    }
}
