use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{build_model, ModelName};
use crate::consistency::{check_consistency, ConsistencyReport};
use crate::error::{Error, Result};

/// Outcome of [`run_consistency_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub model: ModelName,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Number of sample points with at least one failed identity.
    pub failures: usize,
    pub max_residual: f64,
    pub reports: Vec<ConsistencyReport>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Checks the consistency identities at `samples` random admissible points
/// drawn from a ChaCha8 stream seeded with `seed`.
pub fn run_consistency_audit(
    name: ModelName,
    dim: Option<usize>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<AuditReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("audit needs at least one sample".into()));
    }
    let model = build_model(name, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // draw in order so the points do not depend on scheduling
    let points = (0..samples)
        .map(|_| model.sample_point(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    let reports = points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let rep = check_consistency(model.energy(), x, tol).map_err(|e| e.at_step(i))?;
            if !rep.passed() {
                log::warn!("sample {i}: consistency failed (max residual {:e})", rep.max_residual());
            }
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AuditReport {
        model: name,
        dim: model.dim(),
        samples,
        seed,
        tol,
        failures: reports.iter().filter(|r| !r.passed()).count(),
        max_residual: reports.iter().fold(0.0, |m, r| m.max(r.max_residual())),
        reports,
    })
}
