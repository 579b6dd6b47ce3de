use std::io::{Read, Write};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelSpace, Oracle, StudyConfig};
use crate::error::{Error, Result};
use crate::geodesic::{GeodesicResult, SolverConfig};
use crate::model::{coord, Coord, DiscretePath};
use crate::ops::{discrete_exp, parallel_transport, Space};

/// Errors of the four discrete operators at one resolution `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub err_geo: f64,
    pub err_log: f64,
    pub err_exp: f64,
    pub err_pt: f64,
}

impl ConvergenceRow {
    pub fn errors(&self) -> [f64; 4] {
        [self.err_geo, self.err_log, self.err_exp, self.err_pt]
    }
}

/// Fitted orders; `None` where fewer than three positive errors were available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orders {
    pub geo: Option<f64>,
    pub log: Option<f64>,
    pub exp: Option<f64>,
    pub pt: Option<f64>,
}

impl Orders {
    pub fn as_array(&self) -> [Option<f64>; 4] {
        [self.geo, self.log, self.exp, self.pt]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Sorted by `K` ascending.
    pub rows: Vec<ConvergenceRow>,
    pub orders: Orders,
    /// What the errors were measured against.
    pub reference: String,
}

pub const COLUMNS: [&str; 4] = ["geo", "log", "exp", "pt"];

impl ConvergenceReport {
    pub fn from_rows(mut rows: Vec<ConvergenceRow>, reference: impl Into<String>) -> Self {
        rows.sort_by_key(|r| r.k);
        let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
        let fit = |col: usize| -> Option<f64> {
            let errs: Vec<f64> = rows.iter().map(|r| r.errors()[col]).collect();
            match fit_order(&errs, &ks) {
                Ok(p) => Some(p),
                Err(e) => {
                    warn!("no order for err_{}: {e}", COLUMNS[col]);
                    None
                }
            }
        };
        let orders = Orders {
            geo: fit(0),
            log: fit(1),
            exp: fit(2),
            pt: fit(3),
        };
        Self {
            rows,
            orders,
            reference: reference.into(),
        }
    }

    pub fn ks(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k).collect()
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.errors()[col]).collect()
    }

    /// For each error column, whether it strictly decreases from every `K`
    /// to `4K` (rows two apart).
    pub fn decreases_over_two_doublings(&self) -> [bool; 4] {
        let mut out = [true; 4];
        for pair in self.rows.windows(3) {
            let (a, b) = (pair[0].errors(), pair[2].errors());
            for c in 0..4 {
                out[c] &= b[c] < a[c];
            }
        }
        out
    }

    /// CSV with header `K,err_geo,err_log,err_exp,err_pt` and round-trip precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K", "err_geo", "err_log", "err_exp", "err_pt"])?;
        for r in &self.rows {
            let mut rec = vec![r.k.to_string()];
            rec.extend(r.errors().iter().map(|e| crate::fmt_f64(*e)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<ConvergenceRow>> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in r.deserialize() {
            rows.push(rec?);
        }
        Ok(rows)
    }

    /// Writes `convergence.csv` and `orders.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join("convergence.csv"))?)?;
        let json = serde_json::to_string_pretty(&self.orders)?;
        std::fs::write(dir.join("orders.json"), json + "\n")?;
        Ok(())
    }
}

/// Least-squares slope of `log(err)` against `log(1/K)`.
///
/// Nonpositive errors are dropped with a warning; at least three must remain.
pub fn fit_order(errors: &[f64], ks: &[usize]) -> Result<f64> {
    if errors.len() != ks.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            found: errors.len(),
        });
    }
    let mut pts = Vec::with_capacity(ks.len());
    for (&e, &k) in errors.iter().zip(ks) {
        if e > 0.0 && e.is_finite() && k > 0 {
            pts.push(((1.0 / k as f64).ln(), e.ln()));
        } else {
            warn!("fit_order: dropping error {e:e} at K = {k}");
        }
    }
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "order fit needs at least 3 positive errors, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("order fit needs at least two distinct K".into()));
    }
    Ok(sxy / sxx)
}

/// Reference values the discrete operators are compared against.
struct Reference<'a> {
    /// Continuous initial velocity `log_{xa}(xb)`.
    v: Coord,
    exp: Coord,
    pt: Coord,
    geo: RefGeodesic<'a>,
}

enum RefGeodesic<'a> {
    Oracle(&'a dyn Oracle),
    Path(DiscretePath),
}

impl Reference<'_> {
    fn geodesic_at(&self, xa: &Coord, xb: &Coord, k: usize, steps: usize) -> Result<Coord> {
        match &self.geo {
            RefGeodesic::Oracle(o) => o.geodesic(xa, xb, k as f64 / steps as f64),
            RefGeodesic::Path(p) => Ok(p.point(k * p.steps() / steps).clone()),
        }
    }
}

/// Chart vector `v` turned into a shooting increment at `x`: on a surface
/// `x + v` is projected back onto it.
fn shooting_increment(model: &ModelSpace, x: &Coord, v: &Coord) -> Result<Coord> {
    Ok(model.project(&(x + v))? - x)
}

fn tagged<T>(k: usize, operator: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Study {
        k,
        operator,
        source: Box::new(e),
    })
}

fn solve(space: &Space<'_>, xa: &Coord, xb: &Coord, steps: usize, cfg: &SolverConfig) -> Result<GeodesicResult> {
    tagged(steps, "geodesic", space.geodesic(xa, xb, steps, cfg).and_then(|g| g.into_converged()))
}

struct Discrete {
    geo: GeodesicResult,
    exp: Coord,
    pt: Coord,
}

/// Geodesic, `EXP^K(v/K)` and `K · P(w/K)` at one resolution.
fn discrete_ops(
    model: &ModelSpace,
    xa: &Coord,
    xb: &Coord,
    v: &Coord,
    w: &Coord,
    steps: usize,
    cfg: &StudyConfig,
) -> Result<Discrete> {
    let space = model.space();
    let geo = solve(&space, xa, xb, steps, &cfg.solver)?;
    let kf = steps as f64;
    let exp = tagged(steps, "exp", {
        shooting_increment(model, xa, &(v / kf)).and_then(|z| discrete_exp(&space, xa, &z, steps, &cfg.op_config))
    })?;
    let pt = tagged(steps, "transport", {
        shooting_increment(model, xa, &(w / kf))
            .and_then(|z| parallel_transport(&space, &geo.path, &z, &cfg.op_config))
            .map(|(z, _)| z * kf)
    })?;
    Ok(Discrete { geo, exp, pt })
}

fn reference<'a>(model: &'a ModelSpace, xa: &Coord, xb: &Coord, w: &Coord, cfg: &StudyConfig, k_max: usize) -> Result<(Reference<'a>, String)> {
    if let Some(o) = model.oracle() {
        let v = o.log(xa, xb)?;
        let exp = o.exp(xa, &v)?;
        let pt = o.transport(xa, xb, w)?;
        let desc = format!("analytic oracle ({})", model.name);
        return Ok((
            Reference {
                v,
                exp,
                pt,
                geo: RefGeodesic::Oracle(o),
            },
            desc,
        ));
    }
    let k_ref = 4 * k_max;
    info!("no oracle for {}, using the K = {k_ref} solution as reference", model.name);
    let space = model.space();
    let geo = solve(&space, xa, xb, k_ref, &cfg.solver)?;
    let v = (geo.path.point(1) - geo.path.point(0)) * k_ref as f64;
    let d = discrete_ops(model, xa, xb, &v, w, k_ref, cfg)?;
    Ok((
        Reference {
            v,
            exp: d.exp,
            pt: d.pt,
            geo: RefGeodesic::Path(d.geo.path),
        },
        format!("Richardson self-convergence against K = {k_ref}"),
    ))
}

/// Errors of discrete geodesic, logarithm, exponential and parallel transport
/// for `K = 2^k` over the configured exponent range.
///
/// With an analytic oracle the errors are true errors; otherwise they are
/// measured against the solution at four times the finest resolution. All
/// norms are Euclidean in model coordinates. Resolutions run in parallel.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let model = cfg.validate()?;
    let (xa, xb, w) = (coord(&cfg.xa), coord(&cfg.xb), coord(&cfg.w));
    let ks = cfg.k_exponents.resolutions();
    let k_max = *ks.last().expect("validated range is nonempty");
    let (refs, desc) = reference(&model, &xa, &xb, &w, cfg, k_max)?;

    let rows = ks
        .par_iter()
        .map(|&steps| -> Result<ConvergenceRow> {
            let d = discrete_ops(&model, &xa, &xb, &refs.v, &w, steps, cfg)?;
            let mut err_geo: f64 = 0.0;
            for (k, x) in d.geo.path.points().iter().enumerate() {
                let r = tagged(steps, "reference geodesic", refs.geodesic_at(&xa, &xb, k, steps))?;
                err_geo = err_geo.max((x - r).norm());
            }
            let log = (d.geo.path.point(1) - d.geo.path.point(0)) * steps as f64;
            Ok(ConvergenceRow {
                k: steps,
                err_geo,
                err_log: (log - &refs.v).norm(),
                err_exp: (&d.exp - &refs.exp).norm(),
                err_pt: (&d.pt - &refs.pt).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_rows(rows, desc))
}
