//! Points, discrete paths and the deformation-energy contract.
//!
//! A deformation energy `W[x, y]` is a smooth two-point functional that
//! approximates the squared Riemannian distance to third order. Everything
//! else in the crate (geodesics, logarithm, exponential, transport) is built
//! from `W` and its first and second partial derivatives, which models expose
//! through [`EnergyModel`].
//!
//! Derivative naming follows the argument slots: `grad1` differentiates in the
//! first argument, `hess12` is the mixed block whose `(i, j)` entry is
//! `∂²W / ∂x_i ∂y_j`, and `hess21` is its transpose.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A point or displacement in chart (or ambient) coordinates.
pub type Coord = DVector<f64>;

/// Dense square matrix acting on [`Coord`]s.
pub type Matrix = DMatrix<f64>;

/// Builds a [`Coord`] from a slice.
pub fn coord(values: &[f64]) -> Coord {
    DVector::from_column_slice(values)
}

/// Gauge symmetry of an energy that must be pinned before its Hessians are invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    /// Coordinates are interleaved node positions in `R^components` and the
    /// energy is invariant under translating either argument.
    MeanPosition { components: usize },
}

/// Deformation energy `W[x, y]` with access to its partial derivatives.
///
/// Implementations must be pure: all methods take `&self` and may be called
/// concurrently. Inadmissible input is reported as [`Error::Domain`], never as NaN.
pub trait EnergyModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64>;
    fn grad1(&self, x: &Coord, y: &Coord) -> Result<Coord>;
    fn grad2(&self, x: &Coord, y: &Coord) -> Result<Coord>;
    fn hess11(&self, x: &Coord, y: &Coord) -> Result<Matrix>;
    /// `(i, j)` entry is `∂²W / ∂x_i ∂y_j`.
    fn hess12(&self, x: &Coord, y: &Coord) -> Result<Matrix>;
    fn hess21(&self, x: &Coord, y: &Coord) -> Result<Matrix> {
        Ok(self.hess12(x, y)?.transpose())
    }
    fn hess22(&self, x: &Coord, y: &Coord) -> Result<Matrix>;

    /// `W[x, y] = W[y, x]` for all admissible pairs.
    fn is_symmetric(&self) -> bool;
    fn derivatives_analytic(&self) -> bool;

    fn gauge(&self) -> Gauge {
        Gauge::None
    }

    /// Independently coded metric `g_x`, when the model has one. Used by the
    /// consistency checker to test `W_,22[x,x] = 2 g_x` against something
    /// other than the Hessian itself.
    fn reference_metric(&self, _x: &Coord) -> Option<Result<Matrix>> {
        None
    }
}

/// Checks that every coordinate has the model's dimension and finite entries.
pub fn check_point(model: &dyn EnergyModel, x: &Coord) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "coordinate",
            row: i,
            col: 0,
        });
    }
    Ok(())
}

pub(crate) fn ensure_finite_matrix(what: &'static str, m: &Matrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { what, row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Ordered tuple `(x_0, …, x_K)` with `K ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    points: Vec<Coord>,
}

impl DiscretePath {
    pub fn new(points: Vec<Coord>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a discrete path needs at least 2 points, got {}",
                points.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidInput("zero-dimensional points".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite path point".into()));
            }
        }
        Ok(Self { points })
    }

    /// Equidistant points on the segment from `a` to `b`.
    pub fn linear(a: &Coord, b: &Coord, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidInput("step count must be at least 1".into()));
        }
        let points = (0..=steps)
            .map(|k| {
                let t = k as f64 / steps as f64;
                a * (1.0 - t) + b * t
            })
            .collect();
        Self::new(points)
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Coord] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &Coord {
        &self.points[k]
    }

    pub fn first(&self) -> &Coord {
        &self.points[0]
    }

    pub fn last(&self) -> &Coord {
        &self.points[self.points.len() - 1]
    }

    pub fn into_points(self) -> Vec<Coord> {
        self.points
    }
}

/// The metric `g_x` as a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub matrix: Matrix,
}

impl MetricValue {
    pub fn inner(&self, v: &Coord, w: &Coord) -> f64 {
        v.dot(&(&self.matrix * w))
    }

    pub fn norm_squared(&self, v: &Coord) -> f64 {
        self.inner(v, v)
    }

    /// Whether the metric is positive definite, tested by Cholesky.
    pub fn is_positive_definite(&self) -> bool {
        self.matrix.clone().cholesky().is_some()
    }

    /// Positive definiteness restricted to the orthogonal complement of `null`
    /// (columns spanning a gauge direction).
    pub fn is_positive_definite_modulo(&self, null: &Matrix) -> bool {
        let n = self.matrix.nrows();
        if null.ncols() == 0 {
            return self.is_positive_definite();
        }
        let qr = null.clone().qr();
        let q_full = {
            // extend the null basis to an orthonormal basis of R^n
            let mut basis = Matrix::zeros(n, n);
            basis.columns_mut(0, null.ncols()).copy_from(&qr.q());
            let mut next = null.ncols();
            for e in 0..n {
                if next == n {
                    break;
                }
                let mut v = Coord::zeros(n);
                v[e] = 1.0;
                for c in 0..next {
                    let col = basis.column(c).clone_owned();
                    v -= &col * col.dot(&v);
                }
                let nv = v.norm();
                if nv > 1e-8 {
                    basis.set_column(next, &(v / nv));
                    next += 1;
                }
            }
            basis
        };
        let complement = q_full.columns(null.ncols(), n - null.ncols()).clone_owned();
        let reduced = complement.transpose() * &self.matrix * &complement;
        reduced.cholesky().is_some()
    }
}

/// `g_x = ½ W_,22[x, x]`, symmetrized as `(M + Mᵀ) / 2`.
pub fn metric_from_energy(model: &dyn EnergyModel, x: &Coord) -> Result<MetricValue> {
    check_point(model, x)?;
    let h = model.hess22(x, x)?;
    ensure_finite_matrix("hess22", &h)?;
    let matrix = (&h + h.transpose()) * 0.25;
    Ok(MetricValue { matrix })
}

/// Columns spanning the gauge null space of a model at dimension `dim`.
pub fn gauge_basis(gauge: Gauge, dim: usize) -> Matrix {
    match gauge {
        Gauge::None => Matrix::zeros(dim, 0),
        Gauge::MeanPosition { components } => {
            let mut m = Matrix::zeros(dim, components);
            for i in 0..dim {
                m[(i, i % components)] = 1.0;
            }
            m
        }
    }
}

/// Max-abs-entry norm used for all matrix tolerances.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
