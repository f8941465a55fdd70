use serde::{Deserialize, Serialize};

use super::SymmetricSparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
    #[serde(alias = "incomplete_cholesky_0")]
    Ic0,
}

impl Preconditioner {
    pub fn name(self) -> &'static str {
        match self {
            Preconditioner::None => "none",
            Preconditioner::Jacobi => "jacobi",
            Preconditioner::Ic0 => "incomplete_cholesky_0",
        }
    }
}

impl std::str::FromStr for Preconditioner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "ic0" | "incomplete_cholesky_0" => Ok(Self::Ic0),
            other => Err(format!("unknown preconditioner {other:?}")),
        }
    }
}

pub(super) enum Applied {
    Identity,
    Diagonal(Vec<f64>),
    Cholesky(IncompleteCholesky),
}

impl Applied {
    pub(super) fn build(kind: Preconditioner, a: &SymmetricSparseMatrix) -> Result<Self, String> {
        match kind {
            Preconditioner::None => Ok(Applied::Identity),
            Preconditioner::Jacobi => {
                let d = a.diagonal();
                if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
                    return Err(format!("non-positive diagonal entry {} at row {i}", d[i]));
                }
                Ok(Applied::Diagonal(d.iter().map(|x| 1.0 / x).collect()))
            }
            Preconditioner::Ic0 => IncompleteCholesky::new(a).map(Applied::Cholesky),
        }
    }

    pub(super) fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Applied::Identity => z.copy_from_slice(r),
            Applied::Diagonal(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Applied::Cholesky(ic) => ic.solve(r, z),
        }
    }
}

/// Zero fill-in incomplete Cholesky factor `L` on the lower pattern of `A`.
pub(super) struct IncompleteCholesky {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl IncompleteCholesky {
    fn new(a: &SymmetricSparseMatrix) -> Result<Self, String> {
        let mut shift = 0.0;
        for _ in 0..12 {
            if let Some(ic) = Self::factor(a, shift) {
                return Ok(ic);
            }
            shift = if shift == 0.0 { 1e-3 } else { shift * 4.0 };
        }
        Err("incomplete Cholesky failed even with diagonal shift".into())
    }

    fn factor(a: &SymmetricSparseMatrix, shift: f64) -> Option<Self> {
        let n = a.n();
        let mut offsets = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j <= i {
                    cols.push(j);
                    vals.push(if j == i { x * (1.0 + shift) } else { x });
                }
            }
            offsets[i + 1] = cols.len();
        }
        for i in 0..n {
            let (start, end) = (offsets[i], offsets[i + 1]);
            for kk in start..end {
                let k = cols[kk];
                // dot of row i and row k over columns < k
                let (ks, ke) = (offsets[k], offsets[k + 1]);
                let mut p = start;
                let mut q = ks;
                let mut s = 0.0;
                while p < kk && q < ke {
                    let (cp, cq) = (cols[p], cols[q]);
                    if cq >= k {
                        break;
                    }
                    match cp.cmp(&cq) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s += vals[p] * vals[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                if k == i {
                    let d = vals[kk] - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    vals[kk] = d.sqrt();
                } else {
                    let lkk = vals[ke - 1];
                    vals[kk] = (vals[kk] - s) / lkk;
                }
            }
            if end == start || cols[end - 1] != i {
                return None;
            }
        }
        Some(IncompleteCholesky { offsets, cols, vals })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let (s, e) = (self.offsets[i], self.offsets[i + 1]);
            let mut acc = r[i];
            for k in s..e - 1 {
                acc -= self.vals[k] * z[self.cols[k]];
            }
            z[i] = acc / self.vals[e - 1];
        }
        for i in (0..n).rev() {
            let (s, e) = (self.offsets[i], self.offsets[i + 1]);
            z[i] /= self.vals[e - 1];
            let zi = z[i];
            for k in s..e - 1 {
                z[self.cols[k]] -= self.vals[k] * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ic0_is_exact_on_tridiagonal() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SymmetricSparseMatrix::from_triplets(n, &t).unwrap();
        let p = Applied::build(Preconditioner::Ic0, &a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut x = vec![0.0; n];
        p.apply(&b, &mut x);
        let ax = a.mul(&x);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn names_round_trip() {
        for p in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::Ic0] {
            assert_eq!(p.name().parse::<Preconditioner>().unwrap(), p);
        }
    }
}
