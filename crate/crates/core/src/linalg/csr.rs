use std::io::Write;

use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum TripletError {
    #[error("entry ({row}, {col}) outside a {n}x{n} matrix")]
    OutOfRange { row: usize, col: usize, n: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Square sparse matrix in compressed-row form with a symmetric pattern.
///
/// Column indices are sorted within each row and unique; whenever `(i, j)` is
/// stored so is `(j, i)`, possibly as an explicit zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

const PAR_ROWS: usize = 20_000;

impl SymmetricSparseMatrix {
    /// Sums duplicate triplets and completes the pattern with explicit zeros.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, TripletError> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() * 2);
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(TripletError::OutOfRange { row: i, col: j, n });
            }
            if !v.is_finite() {
                return Err(TripletError::NonFinite { row: i, col: j });
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, 0.0));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_offsets = vec![0usize; n + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_indices.push(j);
                values.push(v);
                row_offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(SymmetricSparseMatrix { n, row_offsets, col_indices, values })
    }

    pub fn identity(n: usize) -> Self {
        SymmetricSparseMatrix {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| self.row_offsets[i] + k)
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`; rows are processed in parallel for large matrices, with identical results.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let row = |i: usize| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum::<f64>()
        };
        if self.n >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    worst = worst.max((v - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| self.position(j, i).is_some()))
    }

    /// Symmetric elimination of prescribed values: constrained rows and columns
    /// become unit vectors and the right-hand side absorbs the column terms.
    pub fn apply_dirichlet(&mut self, rhs: &mut [f64], constraints: &[(usize, f64)]) {
        let mut fixed: Vec<Option<f64>> = vec![None; self.n];
        for &(d, g) in constraints {
            fixed[d] = Some(g);
        }
        for i in 0..self.n {
            let range = self.row_offsets[i]..self.row_offsets[i + 1];
            if let Some(g) = fixed[i] {
                for k in range {
                    self.values[k] = if self.col_indices[k] == i { 1.0 } else { 0.0 };
                }
                rhs[i] = g;
            } else {
                for k in range {
                    if let Some(g) = fixed[self.col_indices[k]] {
                        rhs[i] -= self.values[k] * g;
                        self.values[k] = 0.0;
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Matrix Market coordinate export (symmetric, lower triangle), optionally followed by `b` as an array file.
    pub fn write_matrix_market(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        let lower: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).filter(move |(&j, _)| j <= i).map(move |(&j, &v)| (i, j, v))
            })
            .collect();
        writeln!(out, "{} {} {}", self.n, self.n, lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

pub fn write_vector_market(b: &[f64], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", b.len())?;
    for v in b {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_summed_and_pattern_completed() {
        let a = SymmetricSparseMatrix::from_triplets(3, &[(0, 0, 1.0), (0, 0, 2.0), (0, 2, 5.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 2), 5.0);
        assert_eq!(a.nnz(), 3);
        assert!(a.is_structurally_symmetric());
        assert_eq!(a.max_asymmetry(), 5.0);
        assert!(SymmetricSparseMatrix::from_triplets(2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn dirichlet_elimination_is_symmetric() {
        let mut a = SymmetricSparseMatrix::from_triplets(
            3,
            &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)],
        )
        .unwrap();
        let mut b = vec![0.0, 0.0, 0.0];
        a.apply_dirichlet(&mut b, &[(0, 1.0), (2, 3.0)]);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert_eq!(b, vec![1.0, 4.0, 3.0]);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
    }

    #[test]
    fn matrix_market_export() {
        let a = SymmetricSparseMatrix::from_triplets(2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]).unwrap();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 1\n2 2 3\n");
    }

    proptest! {
        #[test]
        fn matvec_matches_dense(n in 1usize..300, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = Vec::new();
            for _ in 0..(3 * n) {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                let v: f64 = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
            let a = SymmetricSparseMatrix::from_triplets(n, &t).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = a.mul(&x);
            let dense = a.to_dense() * nalgebra::DVector::from_vec(x.clone());
            let scale = dense.amax().max(1e-300);
            for i in 0..n {
                prop_assert!((y[i] - dense[i]).abs() <= 1e-13 * scale.max(1.0));
            }
        }
    }
}
