//! Central finite-difference derivatives for models that only code `W`
//! (optionally with analytic gradients).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{Coord, EnergyModel, Gauge, Matrix};

/// Default step for finite-difference derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central differences with step `h`. Second order, or fourth order for
/// Hessians when [`FdScheme::extrapolated`] combines steps `h` and `h/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdScheme {
    step: f64,
    extrapolate: bool,
}

impl FdScheme {
    pub fn new(step: f64) -> Result<Self> {
        if !(1e-8..=1e-2).contains(&step) {
            return Err(Error::InvalidInput(format!(
                "finite-difference step {step:e} outside [1e-8, 1e-2]"
            )));
        }
        Ok(Self { step, extrapolate: false })
    }

    /// Richardson-extrapolated Hessians, `(4 D(h/2) - D(h)) / 3`.
    pub fn extrapolated(step: f64) -> Result<Self> {
        Ok(Self {
            extrapolate: true,
            ..Self::new(step)?
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn is_extrapolated(&self) -> bool {
        self.extrapolate
    }
}

impl Default for FdScheme {
    fn default() -> Self {
        Self {
            step: DEFAULT_FD_STEP,
            extrapolate: false,
        }
    }
}

/// A deformation energy given by its value, and optionally its gradients.
pub trait EnergyFunction: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64>;

    /// `(∂W/∂x, ∂W/∂y)` when coded analytically.
    fn gradients(&self, _x: &Coord, _y: &Coord) -> Option<Result<(Coord, Coord)>> {
        None
    }

    fn is_symmetric(&self) -> bool {
        false
    }

    fn gauge(&self) -> Gauge {
        Gauge::None
    }

    fn reference_metric(&self, _x: &Coord) -> Option<Result<Matrix>> {
        None
    }

    /// Whether coordinates `i` and `j` can have a nonzero mixed second
    /// derivative (in any pair of slots). Local energies override this so the
    /// W-only Hessians skip the structural zeros.
    fn couples(&self, _i: usize, _j: usize) -> bool {
        true
    }
}

/// Full [`EnergyModel`] whose missing derivatives are central differences.
#[derive(Debug, Clone)]
pub struct FdModel<F> {
    inner: F,
    scheme: FdScheme,
}

/// Wraps a value-only model into an [`EnergyModel`].
pub fn fd_derivatives<F: EnergyFunction>(inner: F, scheme: FdScheme) -> FdModel<F> {
    FdModel { inner, scheme }
}

#[derive(Clone, Copy)]
enum Slot {
    First,
    Second,
}

impl<F: EnergyFunction> FdModel<F> {
    pub fn inner(&self) -> &F {
        &self.inner
    }

    pub fn scheme(&self) -> FdScheme {
        self.scheme
    }

    fn shifted(x: &Coord, i: usize, delta: f64) -> Coord {
        let mut p = x.clone();
        p[i] += delta;
        p
    }

    fn eval(&self, x: &Coord, y: &Coord, slot: Slot, i: usize, delta: f64) -> Result<f64> {
        match slot {
            Slot::First => self.inner.energy(&Self::shifted(x, i, delta), y),
            Slot::Second => self.inner.energy(x, &Self::shifted(y, i, delta)),
        }
    }

    fn grad(&self, x: &Coord, y: &Coord, slot: Slot) -> Result<Coord> {
        if let Some(g) = self.inner.gradients(x, y) {
            let (g1, g2) = g?;
            return Ok(match slot {
                Slot::First => g1,
                Slot::Second => g2,
            });
        }
        let h = self.scheme.step;
        let n = self.inner.dim();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let plus = self.eval(x, y, slot, i, h)?;
            let minus = self.eval(x, y, slot, i, -h)?;
            out[i] = (plus - minus) / (2.0 * h);
        }
        Ok(out)
    }

    /// Block `(a, b)`: rows differentiate in slot `a`, columns in slot `b`.
    fn hess(&self, x: &Coord, y: &Coord, rows: Slot, cols: Slot) -> Result<Matrix> {
        let h = self.scheme.step;
        if !self.scheme.extrapolate {
            return self.hess_with_step(x, y, rows, cols, h);
        }
        let coarse = self.hess_with_step(x, y, rows, cols, h)?;
        let fine = self.hess_with_step(x, y, rows, cols, 0.5 * h)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    }

    fn hess_with_step(&self, x: &Coord, y: &Coord, rows: Slot, cols: Slot, h: f64) -> Result<Matrix> {
        let n = self.inner.dim();
        let mut m = Matrix::zeros(n, n);
        if self.inner.gradients(x, y).is_some() {
            // differentiate the analytic gradient of slot `rows` along slot `cols`
            for j in 0..n {
                let (xp, yp, xm, ym) = match cols {
                    Slot::First => (
                        Self::shifted(x, j, h),
                        y.clone(),
                        Self::shifted(x, j, -h),
                        y.clone(),
                    ),
                    Slot::Second => (
                        x.clone(),
                        Self::shifted(y, j, h),
                        x.clone(),
                        Self::shifted(y, j, -h),
                    ),
                };
                let gp = self.grad(&xp, &yp, rows)?;
                let gm = self.grad(&xm, &ym, rows)?;
                m.set_column(j, &((gp - gm) / (2.0 * h)));
            }
            return Ok(m);
        }
        let shift = |i: usize, di: f64, j: usize, dj: f64| -> Result<f64> {
            let mut xs = x.clone();
            let mut ys = y.clone();
            match rows {
                Slot::First => xs[i] += di,
                Slot::Second => ys[i] += di,
            }
            match cols {
                Slot::First => xs[j] += dj,
                Slot::Second => ys[j] += dj,
            }
            self.inner.energy(&xs, &ys)
        };
        let same_slot = matches!((rows, cols), (Slot::First, Slot::First) | (Slot::Second, Slot::Second));
        let centre = self.inner.energy(x, y)?;
        for i in 0..n {
            let start = if same_slot { i } else { 0 };
            for j in start..n {
                if !self.inner.couples(i, j) {
                    continue;
                }
                let v = if same_slot && i == j {
                    (shift(i, h, j, 0.0)? - 2.0 * centre + shift(i, -h, j, 0.0)?) / (h * h)
                } else {
                    (shift(i, h, j, h)? - shift(i, h, j, -h)? - shift(i, -h, j, h)?
                        + shift(i, -h, j, -h)?)
                        / (4.0 * h * h)
                };
                m[(i, j)] = v;
                if same_slot {
                    m[(j, i)] = v;
                }
            }
        }
        Ok(m)
    }
}

impl<F: EnergyFunction> EnergyModel for FdModel<F> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
        self.inner.energy(x, y)
    }

    fn grad1(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        self.grad(x, y, Slot::First)
    }

    fn grad2(&self, x: &Coord, y: &Coord) -> Result<Coord> {
        self.grad(x, y, Slot::Second)
    }

    fn hess11(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        self.hess(x, y, Slot::First, Slot::First)
    }

    fn hess12(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        self.hess(x, y, Slot::First, Slot::Second)
    }

    fn hess22(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        self.hess(x, y, Slot::Second, Slot::Second)
    }

    fn is_symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }

    fn derivatives_analytic(&self) -> bool {
        false
    }

    fn gauge(&self) -> Gauge {
        self.inner.gauge()
    }

    fn reference_metric(&self, x: &Coord) -> Option<Result<Matrix>> {
        self.inner.reference_metric(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coord, max_abs};

    struct Spring(usize);

    impl EnergyFunction for Spring {
        fn name(&self) -> &str {
            "spring"
        }
        fn dim(&self) -> usize {
            self.0
        }
        fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
            Ok((y - x).norm_squared())
        }
        fn is_symmetric(&self) -> bool {
            true
        }
    }

    #[test]
    fn step_bounds_are_enforced() {
        assert!(FdScheme::new(1e-9).is_err());
        assert!(FdScheme::new(0.1).is_err());
        assert!(FdScheme::new(1e-5).is_ok());
    }

    #[test]
    fn flat_gradient_and_mixed_hessian() {
        let m = fd_derivatives(Spring(2), FdScheme::default());
        let g = m.grad2(&coord(&[0.0, 0.0]), &coord(&[1.0, 0.0])).unwrap();
        assert!((g - coord(&[2.0, 0.0])).norm() < 1e-8);
        let h12 = m.hess12(&coord(&[0.3, -0.2]), &coord(&[1.1, 0.7])).unwrap();
        assert!(max_abs(&(h12 + Matrix::identity(2, 2) * 2.0)) < 1e-6);
        let h11 = m.hess11(&coord(&[0.3, -0.2]), &coord(&[1.1, 0.7])).unwrap();
        assert!(max_abs(&(h11 - Matrix::identity(2, 2) * 2.0)) < 1e-4);
    }
}
