//! Closed planar viscous rods sampled on a uniform periodic parameter grid.
//!
//! A rod with `N` nodes is a [`Coord`] of length `2N`, node `i` stored at
//! `(2i, 2i + 1)` for parameter `s_i = i / N`. Derivatives are periodic finite
//! differences: `x_s` central over `2/N`, `x_ss` the three-point second
//! difference. Integrals are equal-weight sums over the nodes.
//!
//! Two energies are provided:
//!
//! * simplified: `δ/2 (1 - |y_s|²/|x_s|²)² |x_s| + δ³ |y_ss - x_ss|² |x_s|`,
//!   with analytic gradients and an analytic metric;
//! * full: tangential term with `W(A) = (1 - A)²/2` plus the curvature bending
//!   term `δ³ (κ[y] - κ[x])² |x_s|`, finite differences throughout.
//!
//! Both are translation invariant in each argument; solvers pin the node
//! average (see [`Gauge::MeanPosition`]). Rotations of a single argument are
//! not energy neutral and are left unconstrained.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{fd_derivatives, EnergyFunction, FdModel, FdScheme};
use crate::model::{Coord, EnergyModel, Gauge, Matrix};

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const MIN_NODES: usize = 8;
const DEGENERATE_LENGTH: f64 = 1e-12;

type P2 = [f64; 2];

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn rot90(a: P2) -> P2 {
    [-a[1], a[0]]
}

/// A closed curve given by its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RodCurve {
    nodes: Vec<P2>,
}

impl RodCurve {
    pub fn new(nodes: Vec<P2>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "a rod needs at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite rod node".into()));
        }
        Ok(Self { nodes })
    }

    pub fn from_coord(x: &Coord) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidInput("rod coordinates must have even length".into()));
        }
        Self::new(x.as_slice().chunks(2).map(|c| [c[0], c[1]]).collect())
    }

    /// Counterclockwise ellipse `(a cos 2πs, b sin 2πs)` sampled at `n` nodes.
    pub fn ellipse(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(
            (0..n)
                .map(|i| {
                    let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                    [a * phi.cos(), b * phi.sin()]
                })
                .collect(),
        )
    }

    pub fn circle(n: usize, radius: f64) -> Result<Self> {
        Self::ellipse(n, radius, radius)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[P2] {
        &self.nodes
    }

    pub fn to_coord(&self) -> Coord {
        Coord::from_iterator(2 * self.nodes.len(), self.nodes.iter().flatten().copied())
    }

    /// Reads `x,y` rows; a non-numeric first row is treated as a header.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut nodes = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "rod csv row {} has {} columns, expected 2",
                    i + 1,
                    record.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => nodes.push([v[0], v[1]]),
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::InvalidInput(format!("rod csv row {}: {e}", i + 1))),
            }
        }
        Self::new(nodes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for p in &self.nodes {
            w.write_record([crate::fmt_f64(p[0]), crate::fmt_f64(p[1])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Periodic first and second differences of a node array.
struct Differences {
    /// `x_s` at each node
    first: Vec<P2>,
    /// `x_ss` at each node
    second: Vec<P2>,
    /// `|x_s|`
    speed: Vec<f64>,
}

fn nodes_of(x: &Coord) -> Vec<P2> {
    x.as_slice().chunks(2).map(|c| [c[0], c[1]]).collect()
}

fn differences(x: &Coord) -> Result<Differences> {
    let nodes = nodes_of(x);
    let n = nodes.len();
    let h = 1.0 / n as f64;
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    let mut speed = Vec::with_capacity(n);
    for i in 0..n {
        let (prev, here, next) = (nodes[(i + n - 1) % n], nodes[i], nodes[(i + 1) % n]);
        let seg = sub(next, here);
        if dot(seg, seg).sqrt() < DEGENERATE_LENGTH {
            return Err(Error::Domain(format!("degenerate rod segment at node {i}")));
        }
        let d1 = [(next[0] - prev[0]) / (2.0 * h), (next[1] - prev[1]) / (2.0 * h)];
        let len = dot(d1, d1).sqrt();
        if len < DEGENERATE_LENGTH {
            return Err(Error::Domain(format!("vanishing tangent at rod node {i}")));
        }
        first.push(d1);
        second.push([
            (next[0] - 2.0 * here[0] + prev[0]) / (h * h),
            (next[1] - 2.0 * here[1] + prev[1]) / (h * h),
        ]);
        speed.push(len);
    }
    Ok(Differences { first, second, speed })
}

/// Discrete curvature `κ = (1/|x_s|) (x_s/|x_s|)_s · D⁹⁰ x_s/|x_s|` at each node,
/// with `D⁹⁰` the counterclockwise quarter rotation. A counterclockwise circle
/// of radius `r` has `κ = +1/r`.
pub fn rod_curvature(curve: &RodCurve) -> Result<Vec<f64>> {
    curvature_of(&curve.to_coord())
}

fn curvature_of(x: &Coord) -> Result<Vec<f64>> {
    let d = differences(x)?;
    let n = d.first.len();
    let h = 1.0 / n as f64;
    let tangents: Vec<P2> = d
        .first
        .iter()
        .zip(&d.speed)
        .map(|(a, l)| [a[0] / l, a[1] / l])
        .collect();
    Ok((0..n)
        .map(|i| {
            let (tp, tn) = (tangents[(i + n - 1) % n], tangents[(i + 1) % n]);
            let ts = [(tn[0] - tp[0]) / (2.0 * h), (tn[1] - tp[1]) / (2.0 * h)];
            dot(ts, rot90(tangents[i])) / d.speed[i]
        })
        .collect())
}

fn check_rod_dim(n: usize, x: &Coord) -> Result<()> {
    if x.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: x.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RodEnergyKind {
    Simplified,
    Full,
}

/// Simplified rod energy with analytic gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedRod {
    nodes: usize,
    delta: f64,
}

impl SimplifiedRod {
    pub fn new(nodes: usize, delta: f64) -> Result<Self> {
        validate_rod_params(nodes, delta)?;
        Ok(Self { nodes, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Scatters per-node derivatives with respect to `x_s` and `x_ss` back to
    /// the node coordinates.
    fn scatter(&self, d_first: &[P2], d_second: &[P2]) -> Coord {
        let n = self.nodes;
        let h = 1.0 / n as f64;
        let mut g = Coord::zeros(2 * n);
        for i in 0..n {
            let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
            for c in 0..2 {
                let a = d_first[i][c] / (2.0 * h);
                g[2 * next + c] += a;
                g[2 * prev + c] -= a;
                let b = d_second[i][c] / (h * h);
                g[2 * next + c] += b;
                g[2 * prev + c] += b;
                g[2 * i + c] -= 2.0 * b;
            }
        }
        g
    }
}

fn validate_rod_params(nodes: usize, delta: f64) -> Result<()> {
    if nodes < MIN_NODES {
        return Err(Error::InvalidInput(format!("rods need N ≥ {MIN_NODES}, got {nodes}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput("rod thickness must be positive".into()));
    }
    Ok(())
}

impl EnergyFunction for SimplifiedRod {
    fn name(&self) -> &str {
        "rod-simplified"
    }

    fn dim(&self) -> usize {
        2 * self.nodes
    }

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
        check_rod_dim(self.nodes, x)?;
        check_rod_dim(self.nodes, y)?;
        let dx = differences(x)?;
        let dy = differences(y)?;
        let h = 1.0 / self.nodes as f64;
        let d3 = self.delta.powi(3);
        let mut total = 0.0;
        for i in 0..self.nodes {
            let l = dx.speed[i];
            let strain = 1.0 - dot(dy.first[i], dy.first[i]) / (l * l);
            let bend = sub(dy.second[i], dx.second[i]);
            total += 0.5 * self.delta * strain * strain * l + d3 * dot(bend, bend) * l;
        }
        Ok(h * total)
    }

    fn gradients(&self, x: &Coord, y: &Coord) -> Option<Result<(Coord, Coord)>> {
        Some((|| {
            check_rod_dim(self.nodes, x)?;
            check_rod_dim(self.nodes, y)?;
            let dx = differences(x)?;
            let dy = differences(y)?;
            let h = 1.0 / self.nodes as f64;
            let (delta, d3) = (self.delta, self.delta.powi(3));
            let n = self.nodes;
            let mut gx_first = vec![[0.0; 2]; n];
            let mut gx_second = vec![[0.0; 2]; n];
            let mut gy_first = vec![[0.0; 2]; n];
            let mut gy_second = vec![[0.0; 2]; n];
            for i in 0..n {
                let (a, b) = (dx.first[i], dy.first[i]);
                let l = dx.speed[i];
                let ratio = dot(b, b) / (l * l);
                let strain = 1.0 - ratio;
                let bend = sub(dy.second[i], dx.second[i]);
                let bend2 = dot(bend, bend);
                // ∂/∂a of δ/2 (1-A)² |a| + δ³|q-p|²|a|, with ∂A/∂a = -2A a/|a|²
                let ca = delta * (strain * 2.0 * ratio / l + 0.5 * strain * strain / l) + d3 * bend2 / l;
                let cb = -2.0 * delta * strain / l;
                for c in 0..2 {
                    gx_first[i][c] = h * ca * a[c];
                    gy_first[i][c] = h * cb * b[c];
                    gy_second[i][c] = h * 2.0 * d3 * bend[c] * l;
                    gx_second[i][c] = -gy_second[i][c];
                }
            }
            Ok((self.scatter(&gx_first, &gx_second), self.scatter(&gy_first, &gy_second)))
        })())
    }

    fn gauge(&self) -> Gauge {
        Gauge::MeanPosition { components: 2 }
    }

    /// `ĝ_x(v,v) = Σ_i h [2δ (v_s·t)²/|x_s| + δ³ |v_ss|² |x_s|]`.
    fn reference_metric(&self, x: &Coord) -> Option<Result<Matrix>> {
        Some((|| {
            check_rod_dim(self.nodes, x)?;
            let dx = differences(x)?;
            let n = self.nodes;
            let h = 1.0 / n as f64;
            let d3 = self.delta.powi(3);
            let mut g = Matrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
                let l = dx.speed[i];
                let t = [dx.first[i][0] / l, dx.first[i][1] / l];
                // v_s · t as a row over node coordinates
                let mut row_s = vec![(0usize, 0.0); 0];
                for c in 0..2 {
                    row_s.push((2 * next + c, t[c] / (2.0 * h)));
                    row_s.push((2 * prev + c, -t[c] / (2.0 * h)));
                }
                let w_s = h * 2.0 * self.delta / l;
                for &(p, vp) in &row_s {
                    for &(q, vq) in &row_s {
                        g[(p, q)] += w_s * vp * vq;
                    }
                }
                let w_ss = h * d3 * l;
                for c in 0..2 {
                    let stencil = [
                        (2 * prev + c, 1.0 / (h * h)),
                        (2 * i + c, -2.0 / (h * h)),
                        (2 * next + c, 1.0 / (h * h)),
                    ];
                    for &(p, vp) in &stencil {
                        for &(q, vq) in &stencil {
                            g[(p, q)] += w_ss * vp * vq;
                        }
                    }
                }
            }
            Ok(g)
        })())
    }
}

/// Full rod energy: tangential strain plus curvature bending.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRod {
    nodes: usize,
    delta: f64,
}

impl FullRod {
    pub fn new(nodes: usize, delta: f64) -> Result<Self> {
        validate_rod_params(nodes, delta)?;
        Ok(Self { nodes, delta })
    }
}

impl EnergyFunction for FullRod {
    fn name(&self) -> &str {
        "rod-full"
    }

    fn dim(&self) -> usize {
        2 * self.nodes
    }

    fn energy(&self, x: &Coord, y: &Coord) -> Result<f64> {
        check_rod_dim(self.nodes, x)?;
        check_rod_dim(self.nodes, y)?;
        let dx = differences(x)?;
        let dy = differences(y)?;
        let kx = curvature_of(x)?;
        let ky = curvature_of(y)?;
        let h = 1.0 / self.nodes as f64;
        let d3 = self.delta.powi(3);
        let mut total = 0.0;
        for i in 0..self.nodes {
            let l = dx.speed[i];
            let strain = 1.0 - dot(dy.first[i], dy.first[i]) / (l * l);
            let dk = ky[i] - kx[i];
            total += 0.5 * self.delta * strain * strain * l + d3 * dk * dk * l;
        }
        Ok(h * total)
    }

    fn gauge(&self) -> Gauge {
        Gauge::MeanPosition { components: 2 }
    }

    // κ at node i reads nodes i-2..=i+2, so nodes further than 4 apart never
    // share a term
    fn couples(&self, i: usize, j: usize) -> bool {
        let d = (i / 2).abs_diff(j / 2);
        d.min(self.nodes - d) <= FULL_ROD_STENCIL
    }
}

const FULL_ROD_STENCIL: usize = 4;

/// Rod energy of the given kind on `nodes` nodes with thickness `delta`.
pub fn rod_energy(kind: RodEnergyKind, nodes: usize, delta: f64) -> Result<Box<dyn EnergyModel>> {
    Ok(match kind {
        RodEnergyKind::Simplified => Box::new(simplified_rod(nodes, delta)?),
        RodEnergyKind::Full => Box::new(fd_derivatives(FullRod::new(nodes, delta)?, FdScheme::default())),
    })
}

/// Hessian step for the simplified rod. Its third derivatives grow like N^5,
/// so plain central differences cannot resolve the Hessian identities past
/// N = 32; the extrapolated scheme holds them to ~1e-8 up to N = 128.
pub const SIMPLIFIED_ROD_FD_STEP: f64 = 1e-4;

/// The simplified rod model with its concrete type (analytic gradients,
/// extrapolated finite-difference Hessians).
pub fn simplified_rod(nodes: usize, delta: f64) -> Result<FdModel<SimplifiedRod>> {
    Ok(fd_derivatives(
        SimplifiedRod::new(nodes, delta)?,
        FdScheme::extrapolated(SIMPLIFIED_ROD_FD_STEP)?,
    ))
}
