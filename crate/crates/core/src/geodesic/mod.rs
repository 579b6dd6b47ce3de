//! Discrete path energy and length, and the discrete geodesic boundary-value
//! problem.
//!
//! A discrete geodesic of order `K` minimizes `E = K Σ_k W[x_{k-1}, x_k]` with
//! both endpoints fixed. Stationarity is the Euler–Lagrange system
//!
//! ```text
//! W_,2[x_{k-1}, x_k] + W_,1[x_k, x_{k+1}] = 0,   k = 1, …, K-1
//! ```
//!
//! whose Jacobian is block tridiagonal with diagonal blocks
//! `W_,22[x_{k-1},x_k] + W_,11[x_k,x_{k+1}]` and off-diagonal blocks `W_,21`,
//! `W_,12`. Newton steps are solved by block Thomas elimination.

mod constrained;

use std::io::Write;

use log::debug;
use serde::{Deserialize, Serialize};

pub use constrained::{solve_geodesic_constrained, ConstraintModel, LEVEL_SET_TOL};
pub(crate) use constrained::{check_on_surface, ls_multiplier};

use crate::error::{Error, Result};
use crate::linalg::solve_block_tridiagonal;
use crate::model::{check_point, Coord, DiscretePath, EnergyModel, Gauge, Matrix};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
const ARMIJO_MIN_STEP: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    #[default]
    None,
    /// Backtracking on `‖residual‖²` with `c = 1e-4`, halving the step.
    Armijo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Linear,
    /// Full initial path `(x_0, …, x_K)`; its endpoints are replaced by the
    /// requested ones.
    Provided(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: Damping,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_iter: 50,
            damping: Damping::None,
            init: Init::Linear,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidInput("newton_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// A solved (or last-iterate) discrete geodesic with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub path: DiscretePath,
    pub energy: f64,
    pub length: f64,
    /// Sup-norm of the (augmented) Euler–Lagrange residual.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Lagrange multipliers `λ_k` of the level-set constraint, scaled to the
    /// Lagrangian `E - Σ λ_k d(x_k)`.
    pub multipliers: Option<Vec<f64>>,
}

impl GeodesicResult {
    /// Turns a non-converged result into [`Error::NotConverged`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                stage: "geodesic",
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }

    /// Writes one row per point: `k,x_0,…,x_{d-1}` with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_path_csv(&self.path, out)
    }
}

pub fn write_path_csv<W: Write>(path: &DiscretePath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((0..path.dim()).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for (k, p) in path.points().iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(p.iter().map(|v| crate::fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn pair_energies(path: &DiscretePath, model: &dyn EnergyModel) -> Result<Vec<f64>> {
    let pts = path.points();
    pts.windows(2)
        .enumerate()
        .map(|(i, w)| {
            check_point(model, &w[0])?;
            check_point(model, &w[1])?;
            model.energy(&w[0], &w[1]).map_err(|e| e.at_step(i + 1))
        })
        .collect()
}

/// `E = K Σ_{k=1..K} W[x_{k-1}, x_k]`.
pub fn discrete_energy(path: &DiscretePath, model: &dyn EnergyModel) -> Result<f64> {
    let k = path.steps() as f64;
    Ok(k * pair_energies(path, model)?.iter().sum::<f64>())
}

/// `L = Σ_{k=1..K} √W[x_{k-1}, x_k]`.
pub fn discrete_length(path: &DiscretePath, model: &dyn EnergyModel) -> Result<f64> {
    let mut total = 0.0;
    for (i, w) in pair_energies(path, model)?.into_iter().enumerate() {
        if w < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "negative energy {w:e} on segment {}",
                i + 1
            )));
        }
        total += w.sqrt();
    }
    Ok(total)
}

/// `W_,2[x_{k-1}, x_k] + W_,1[x_k, x_{k+1}]` for `k = 1, …, K-1`.
pub fn el_residual(path: &DiscretePath, model: &dyn EnergyModel) -> Result<Vec<Coord>> {
    if path.steps() < 2 {
        return Err(Error::InvalidInput(
            "the Euler–Lagrange residual needs at least 2 steps".into(),
        ));
    }
    let pts = path.points();
    (1..path.steps())
        .map(|k| {
            Ok(model.grad2(&pts[k - 1], &pts[k])? + model.grad1(&pts[k], &pts[k + 1])?)
        })
        .collect::<Result<Vec<_>>>()
}

/// Per-interior-point equality constraints appended to the Euler–Lagrange system.
pub(crate) enum PointConstraints<'a> {
    None,
    LevelSet(&'a dyn ConstraintModel),
    /// Node average of interior point `k` pinned to `targets[k - 1]`.
    MeanPosition {
        components: usize,
        targets: Vec<Coord>,
    },
}

impl PointConstraints<'_> {
    pub(crate) fn count(&self) -> usize {
        match self {
            Self::None => 0,
            Self::LevelSet(_) => 1,
            Self::MeanPosition { components, .. } => *components,
        }
    }

    /// Constraint value at interior point `k` (1-based).
    fn value(&self, k: usize, x: &Coord) -> Result<Coord> {
        match self {
            Self::None => Ok(Coord::zeros(0)),
            Self::LevelSet(c) => Ok(Coord::from_element(1, c.value(x)?)),
            Self::MeanPosition {
                components,
                targets,
            } => Ok(node_mean(x, *components) - &targets[k - 1]),
        }
    }

    /// `m × d` constraint Jacobian.
    fn jacobian(&self, x: &Coord) -> Result<Matrix> {
        match self {
            Self::None => Ok(Matrix::zeros(0, x.len())),
            Self::LevelSet(c) => { let g = c.gradient(x)?; Ok(Matrix::from_row_slice(1, g.len(), g.as_slice())) },
            Self::MeanPosition { components, .. } => {
                let nodes = x.len() / components;
                let mut j = Matrix::zeros(*components, x.len());
                for i in 0..x.len() {
                    j[(i % components, i)] = 1.0 / nodes as f64;
                }
                Ok(j)
            }
        }
    }

    /// `Σ_i μ_i ∇²c_i(x)`; `None` when the constraint is linear.
    fn weighted_hessian(&self, x: &Coord, mu: &Coord) -> Result<Option<Matrix>> {
        match self {
            Self::LevelSet(c) => Ok(Some(c.hessian(x)? * mu[0])),
            _ => Ok(None),
        }
    }
}

pub(crate) fn node_mean(x: &Coord, components: usize) -> Coord {
    let nodes = x.len() / components;
    let mut m = Coord::zeros(components);
    for (i, v) in x.iter().enumerate() {
        m[i % components] += v;
    }
    m / nodes as f64
}

/// Interior unknowns of the chain solve: positions and constraint multipliers.
struct ChainState {
    interior: Vec<Coord>,
    multipliers: Vec<Coord>,
}

struct ChainProblem<'a> {
    xa: &'a Coord,
    xb: &'a Coord,
    model: &'a dyn EnergyModel,
    constraints: &'a PointConstraints<'a>,
}

impl ChainProblem<'_> {
    fn point<'s>(&'s self, state: &'s ChainState, k: usize) -> &'s Coord {
        let steps = state.interior.len() + 1;
        if k == 0 {
            self.xa
        } else if k == steps {
            self.xb
        } else {
            &state.interior[k - 1]
        }
    }

    /// Stacked residual blocks `[r_k - Jᵀμ_k ; c_k(x_k)]`.
    fn residual(&self, state: &ChainState) -> Result<Vec<Coord>> {
        let n = state.interior.len();
        let d = self.model.dim();
        let m = self.constraints.count();
        (1..=n)
            .map(|k| {
                let (prev, here, next) = (self.point(state, k - 1), self.point(state, k), self.point(state, k + 1));
                let mut r = self.model.grad2(prev, here)? + self.model.grad1(here, next)?;
                if m > 0 {
                    r -= self.constraints.jacobian(here)?.transpose() * &state.multipliers[k - 1];
                }
                let mut block = Coord::zeros(d + m);
                block.rows_mut(0, d).copy_from(&r);
                if m > 0 {
                    block.rows_mut(d, m).copy_from(&self.constraints.value(k, here)?);
                }
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()
    }

    fn jacobian(&self, state: &ChainState) -> Result<(Vec<Matrix>, Vec<Matrix>, Vec<Matrix>)> {
        let n = state.interior.len();
        let d = self.model.dim();
        let m = self.constraints.count();
        let size = d + m;
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        let mut diag = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n.saturating_sub(1));
        for k in 1..=n {
            let (prev, here, next) = (self.point(state, k - 1), self.point(state, k), self.point(state, k + 1));
            let mut a = self.model.hess22(prev, here)? + self.model.hess11(here, next)?;
            let mut block = Matrix::zeros(size, size);
            if m > 0 {
                if let Some(h) = self.constraints.weighted_hessian(here, &state.multipliers[k - 1])? {
                    a -= h;
                }
                let jc = self.constraints.jacobian(here)?;
                block.view_mut((0, d), (d, m)).copy_from(&(-jc.transpose()));
                block.view_mut((d, 0), (m, d)).copy_from(&jc);
            }
            block.view_mut((0, 0), (d, d)).copy_from(&a);
            diag.push(block);
            if k < n {
                let mut up = Matrix::zeros(size, size);
                up.view_mut((0, 0), (d, d)).copy_from(&self.model.hess12(here, next)?);
                upper.push(up);
                let mut lo = Matrix::zeros(size, size);
                lo.view_mut((0, 0), (d, d)).copy_from(&self.model.hess21(here, next)?);
                lower.push(lo);
            }
        }
        Ok((lower, diag, upper))
    }

    fn apply(&self, state: &ChainState, step: &[Coord], scale: f64) -> ChainState {
        let d = self.model.dim();
        let m = self.constraints.count();
        ChainState {
            interior: state
                .interior
                .iter()
                .zip(step)
                .map(|(x, s)| x + s.rows(0, d) * scale)
                .collect(),
            multipliers: state
                .multipliers
                .iter()
                .zip(step)
                .map(|(mu, s)| mu + s.rows(d, m) * scale)
                .collect(),
        }
    }

    fn path(&self, state: &ChainState) -> Result<DiscretePath> {
        let mut pts = Vec::with_capacity(state.interior.len() + 2);
        pts.push(self.xa.clone());
        pts.extend(state.interior.iter().cloned());
        pts.push(self.xb.clone());
        DiscretePath::new(pts)
    }
}

fn sup_norm(blocks: &[Coord]) -> f64 {
    blocks.iter().fold(0.0_f64, |acc, b| acc.max(b.amax()))
}

fn merit(blocks: &[Coord]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum()
}

/// Newton iteration on the (possibly constrained) Euler–Lagrange chain.
/// Returns the final state, residual, iteration count and convergence flag.
pub(crate) fn solve_chain(
    xa: &Coord,
    xb: &Coord,
    interior: Vec<Coord>,
    multipliers: Vec<Coord>,
    model: &dyn EnergyModel,
    constraints: &PointConstraints<'_>,
    cfg: &SolverConfig,
) -> Result<(DiscretePath, Vec<Coord>, f64, usize, bool)> {
    let problem = ChainProblem {
        xa,
        xb,
        model,
        constraints,
    };
    let mut state = ChainState {
        interior,
        multipliers,
    };
    let mut residual = problem.residual(&state)?;
    let mut norm = sup_norm(&residual);
    let mut iterations = 0;
    while !(norm <= cfg.newton_tol) && iterations < cfg.max_iter {
        if !norm.is_finite() {
            break;
        }
        let (lower, diag, upper) = problem.jacobian(&state)?;
        let rhs: Vec<Coord> = residual.iter().map(|r| -r).collect();
        let step = solve_block_tridiagonal(&lower, &diag, &upper, &rhs, "geodesic")?;
        iterations += 1;

        match cfg.damping {
            Damping::None => {
                state = problem.apply(&state, &step, 1.0);
                residual = problem.residual(&state)?;
            }
            Damping::Armijo => {
                let phi = merit(&residual);
                let mut t = 1.0;
                loop {
                    let trial = problem.apply(&state, &step, t);
                    // a trial point outside the admissible set counts as insufficient decrease
                    let accepted = match problem.residual(&trial) {
                        Ok(r) if merit(&r) <= (1.0 - 2.0 * ARMIJO_C * t) * phi => Some(r),
                        Ok(r) if t <= ARMIJO_MIN_STEP => Some(r),
                        Ok(_) => None,
                        Err(e) if t <= ARMIJO_MIN_STEP => return Err(e),
                        Err(_) => None,
                    };
                    if let Some(r) = accepted {
                        state = trial;
                        residual = r;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        norm = sup_norm(&residual);
        debug!("geodesic newton iter {iterations}: residual {norm:e}");
    }
    let converged = norm <= cfg.newton_tol;
    let path = problem.path(&state)?;
    Ok((path, state.multipliers, norm, iterations, converged))
}

/// Interior points of the initial path selected by `cfg.init`.
pub(crate) fn initial_interior(xa: &Coord, xb: &Coord, steps: usize, init: &Init) -> Result<Vec<Coord>> {
    match init {
        Init::Linear => Ok(DiscretePath::linear(xa, xb, steps)?.points()[1..steps].to_vec()),
        Init::Provided(points) => {
            if points.len() != steps + 1 {
                return Err(Error::InvalidInput(format!(
                    "provided initial path has {} points, expected {}",
                    points.len(),
                    steps + 1
                )));
            }
            points[1..steps]
                .iter()
                .map(|p| {
                    if p.len() != xa.len() {
                        Err(Error::DimensionMismatch {
                            expected: xa.len(),
                            found: p.len(),
                        })
                    } else {
                        Ok(Coord::from_column_slice(p))
                    }
                })
                .collect()
        }
    }
}

pub(crate) fn finish(
    path: DiscretePath,
    model: &dyn EnergyModel,
    residual: f64,
    iterations: usize,
    converged: bool,
    multipliers: Option<Vec<f64>>,
) -> Result<GeodesicResult> {
    let energy = discrete_energy(&path, model)?;
    let length = discrete_length(&path, model)?;
    Ok(GeodesicResult {
        path,
        energy,
        length,
        residual,
        iterations,
        converged,
        multipliers,
    })
}

/// Solves the discrete geodesic problem between `xa` and `xb` with `steps` segments.
///
/// Models with a translation gauge get one mean-position constraint per
/// interior point, pinned to the linear interpolation of the endpoint means.
/// A non-converged solve is returned with `converged == false` and the last
/// iterate; use [`GeodesicResult::into_converged`] to turn it into an error.
pub fn solve_geodesic(
    xa: &Coord,
    xb: &Coord,
    steps: usize,
    model: &dyn EnergyModel,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    check_point(model, xa)?;
    check_point(model, xb)?;
    if steps == 1 {
        let path = DiscretePath::new(vec![xa.clone(), xb.clone()])?;
        return finish(path, model, 0.0, 0, true, None);
    }
    let interior = initial_interior(xa, xb, steps, &cfg.init)?;
    let constraints = match model.gauge() {
        Gauge::None => PointConstraints::None,
        Gauge::MeanPosition { components } => {
            let (ma, mb) = (node_mean(xa, components), node_mean(xb, components));
            let targets = (1..steps)
                .map(|k| {
                    let t = k as f64 / steps as f64;
                    &ma * (1.0 - t) + &mb * t
                })
                .collect();
            PointConstraints::MeanPosition {
                components,
                targets,
            }
        }
    };
    let multipliers = vec![Coord::zeros(constraints.count()); steps - 1];
    let (path, _, residual, iterations, converged) =
        solve_chain(xa, xb, interior, multipliers, model, &constraints, cfg)?;
    finish(path, model, residual, iterations, converged, None)
}
