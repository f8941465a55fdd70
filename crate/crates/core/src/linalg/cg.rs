use serde::Serialize;

use super::precond::Applied;
use super::{Preconditioner, SymmetricSparseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub preconditioner: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("dimension mismatch: matrix {matrix}, vector {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("right-hand side is not finite")]
    NonFinite,
    #[error("preconditioner setup failed: {0}")]
    Preconditioner(String),
    #[error("CG breakdown at iteration {iteration}: non-positive curvature {curvature:e}, matrix is not SPD")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("CG did not converge in {} iterations (relative residual {:e})", report.iterations, report.relative_residual)]
    NotConverged { solution: Vec<f64>, report: SolverReport },
    #[error("dense check limited to {limit} unknowns, got {n}")]
    TooLarge { n: usize, limit: usize },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(a: &SymmetricSparseMatrix, x: &[f64], b: &[f64], r: &mut [f64]) {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Preconditioned conjugate gradients for SPD systems.
///
/// Convergence means `|b - A x| / |b| <= tol`, checked on the true residual.
/// A zero right-hand side returns the zero vector. Non-convergence returns the
/// iterate with the smallest residual inside [`SolveError::NotConverged`].
pub fn cg_solve(
    a: &SymmetricSparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    preconditioner: Preconditioner,
) -> Result<(Vec<f64>, SolverReport), SolveError> {
    let n = a.n();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { matrix: n, vector: b.len() });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite);
    }
    let report = |iterations, relative_residual, converged| SolverReport {
        iterations,
        relative_residual,
        converged,
        preconditioner: preconditioner.name().to_string(),
    };
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], report(0, 0.0, true)));
    }
    let m = Applied::build(preconditioner, a).map_err(SolveError::Preconditioner)?;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut best = (f64::INFINITY, x.clone());
    let mut rel = 1.0;

    for it in 1..=max_iter {
        a.matvec(&p, &mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(SolveError::Breakdown { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            residual(a, &x, b, &mut r);
            rel = dot(&r, &r).sqrt() / bnorm;
            if rel < best.0 {
                best = (rel, x.clone());
            }
            if rel <= tol {
                return Ok((x, report(it, rel, true)));
            }
            // recursive residual drifted: restart from the true residual
            m.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        if rel < best.0 {
            best = (rel, x.clone());
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (_, mut xb) = best;
    if xb.len() != n {
        xb = x;
    }
    residual(a, &xb, b, &mut r);
    rel = rel.min(dot(&r, &r).sqrt() / bnorm);
    Err(SolveError::NotConverged { solution: xb, report: report(max_iter, rel, false) })
}
