use nalgebra::{DVector, SymmetricEigen};
use serde::Serialize;

use super::{SolveError, SymmetricSparseMatrix};

pub const CHOLESKY_LIMIT: usize = 500;
pub const EIGEN_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DenseSpdReport {
    pub cholesky_ok: bool,
    /// Smallest eigenvalue, computed only for `n <= 200`.
    pub min_eigenvalue: Option<f64>,
}

/// Dense definiteness evidence for small matrices.
pub fn dense_spd_check(a: &SymmetricSparseMatrix) -> Result<DenseSpdReport, SolveError> {
    let n = a.n();
    if n > CHOLESKY_LIMIT {
        return Err(SolveError::TooLarge { n, limit: CHOLESKY_LIMIT });
    }
    let m = a.to_dense();
    let cholesky_ok = m.clone().cholesky().is_some();
    let min_eigenvalue = (n <= EIGEN_LIMIT && n > 0)
        .then(|| SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    Ok(DenseSpdReport { cholesky_ok, min_eigenvalue })
}

/// Dense LU solve, used as an oracle for small systems.
pub fn dense_solve(a: &SymmetricSparseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let lu = a.to_dense().lu();
    lu.solve(&DVector::from_column_slice(b)).map(|x| x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_spd() {
        let a = SymmetricSparseMatrix::from_triplets(3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        let r = dense_spd_check(&a).unwrap();
        assert!(r.cholesky_ok);
        assert!((r.min_eigenvalue.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_fails_cholesky() {
        let a = SymmetricSparseMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(!dense_spd_check(&a).unwrap().cholesky_ok);
    }

    #[test]
    fn size_limit() {
        let a = SymmetricSparseMatrix::identity(501);
        assert!(matches!(dense_spd_check(&a), Err(SolveError::TooLarge { .. })));
        let b = dense_spd_check(&SymmetricSparseMatrix::identity(300)).unwrap();
        assert!(b.cholesky_ok && b.min_eigenvalue.is_none());
    }
}
