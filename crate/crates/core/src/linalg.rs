//! Block-tridiagonal elimination and dense Newton iteration.

use crate::error::{Error, Result};
use crate::model::{Coord, Matrix};

/// Relative pivot threshold below which a block counts as singular.
const PIVOT_RTOL: f64 = 1e-14;

fn lu_solve(m: &Matrix, rhs: &Matrix, stage: &'static str, block: usize) -> Result<Matrix> {
    let lu = m.clone().lu();
    let u = lu.u();
    let diag_max = u.diagonal().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let diag_min = u.diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if !(diag_max > 0.0) || diag_min <= PIVOT_RTOL * diag_max || !diag_min.is_finite() {
        return Err(Error::SingularPivot { stage, block });
    }
    lu.solve(rhs).ok_or(Error::SingularPivot { stage, block })
}

/// Solves a block-tridiagonal system by block Thomas elimination.
///
/// `lower[i]` couples row block `i + 1` to column block `i`, `upper[i]` couples
/// row block `i` to column block `i + 1`. Blocks are dense and may differ in
/// size only if the coupling blocks are shaped accordingly.
pub fn solve_block_tridiagonal(
    lower: &[Matrix],
    diag: &[Matrix],
    upper: &[Matrix],
    rhs: &[Coord],
    stage: &'static str,
) -> Result<Vec<Coord>> {
    let n = diag.len();
    assert_eq!(rhs.len(), n);
    assert_eq!(lower.len() + 1, n.max(1));
    assert_eq!(upper.len() + 1, n.max(1));
    if n == 0 {
        return Ok(Vec::new());
    }

    // forward sweep: eliminate the sub-diagonal
    // upper_solved[i] = pivot_i^{-1} * upper[i]
    let mut upper_solved: Vec<Matrix> = Vec::with_capacity(n.saturating_sub(1));
    let mut rhs_solved: Vec<Coord> = Vec::with_capacity(n);

    for i in 0..n {
        let (pivot, r) = if i == 0 {
            (diag[0].clone(), rhs[0].clone())
        } else {
            (
                &diag[i] - &lower[i - 1] * &upper_solved[i - 1],
                &rhs[i] - &lower[i - 1] * &rhs_solved[i - 1],
            )
        };
        let mut stacked = Matrix::zeros(pivot.nrows(), 1 + if i + 1 < n { upper[i].ncols() } else { 0 });
        stacked.set_column(0, &r);
        if i + 1 < n {
            stacked.columns_mut(1, upper[i].ncols()).copy_from(&upper[i]);
        }
        let solved = lu_solve(&pivot, &stacked, stage, i)?;
        rhs_solved.push(solved.column(0).clone_owned());
        if i + 1 < n {
            upper_solved.push(solved.columns(1, upper[i].ncols()).clone_owned());
        }
    }

    // back substitution
    let mut x = vec![Coord::zeros(0); n];
    x[n - 1] = rhs_solved[n - 1].clone();
    for i in (0..n - 1).rev() {
        x[i] = &rhs_solved[i] - &upper_solved[i] * &x[i + 1];
    }
    Ok(x)
}

/// How a dense Newton step treats rank deficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSolve {
    /// LU; a singular Jacobian is an error.
    Exact,
    /// Minimum-norm least-squares step (SVD), for Jacobians with a known gauge kernel.
    MinNorm,
}

pub fn dense_solve(m: &Matrix, rhs: &Coord, mode: StepSolve, stage: &'static str) -> Result<Coord> {
    match mode {
        StepSolve::Exact => {
            let sol = lu_solve(m, &Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), stage, 0)?;
            Ok(sol.column(0).clone_owned())
        }
        StepSolve::MinNorm => {
            let svd = m.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if !(smax > 0.0) {
                return Err(Error::SingularPivot { stage, block: 0 });
            }
            svd.solve(rhs, 1e-9 * smax)
                .map_err(|_| Error::SingularPivot { stage, block: 0 })
        }
    }
}

/// Result of [`newton_dense`].
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub solution: Coord,
    pub iterations: usize,
    pub residual: f64,
}

/// Plain Newton iteration on `F(z) = 0` with sup-norm stopping test.
///
/// `system` returns the residual and its Jacobian at `z`.
pub fn newton_dense<F>(
    z0: Coord,
    tol: f64,
    max_iter: usize,
    mode: StepSolve,
    stage: &'static str,
    mut system: F,
) -> Result<NewtonOutcome>
where
    F: FnMut(&Coord) -> Result<(Coord, Matrix)>,
{
    let mut z = z0;
    let mut last = f64::INFINITY;
    for iter in 0..=max_iter {
        let (r, jac) = system(&z)?;
        let res = r.amax();
        if !res.is_finite() {
            return Err(Error::NotConverged {
                stage,
                iterations: iter,
                residual: res,
            });
        }
        last = res;
        if res <= tol {
            return Ok(NewtonOutcome {
                solution: z,
                iterations: iter,
                residual: res,
            });
        }
        if iter == max_iter {
            break;
        }
        let step = dense_solve(&jac, &(-r), mode, stage)?;
        z += step;
    }
    Err(Error::NotConverged {
        stage,
        iterations: max_iter,
        residual: last,
    })
}
