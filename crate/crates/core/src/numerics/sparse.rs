//! Square sparse systems assembled from triplets and solved by sparse LU.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// A square sparse matrix in assembled (row, col, value) form.
///
/// Duplicate entries are summed. Assembly order does not affect the result:
/// entries are sorted before the factorization, so identical systems give
/// bit-identical solutions.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSystem {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::with_capacity(9 * n) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    fn compressed(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (r, c, v) in e {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => out.push((r, c, v)),
            }
        }
        out
    }

    /// `max_i Σ_j |a_ij|`, with duplicates summed first.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for (r, _, v) in self.compressed() {
            rows[r] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Max-norm of `A x - b`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| (ax - bi).abs())
            .fold(0.0, f64::max)
    }

    /// Solves `A x = b` by sparse LU with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "right-hand side has length {}, system has {}",
                b.len(),
                self.n
            )));
        }
        // Rows without entries make the system structurally singular.
        let mut row_seen = vec![false; self.n];
        for &(r, _, _) in &self.entries {
            row_seen[r] = true;
        }
        if let Some(r) = row_seen.iter().position(|s| !s) {
            let mut near_null = vec![0.0; self.n];
            near_null[r] = 1.0;
            return Err(Error::Singular { reason: format!("empty row {r}"), near_null });
        }
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .compressed()
            .into_iter()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::InvalidInput(format!("sparse assembly failed: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Singular {
            reason: format!("sparse LU failed: {e:?}"),
            near_null: Vec::new(),
        })?;
        let rhs = Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = lu.solve(&rhs);
        let x: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                reason: "factorization produced non-finite values".into(),
                near_null: Vec::new(),
            });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 50;
        let mut a = SparseSystem::new(n);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.apply(&x_true);
        let x = a.solve(&b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
        assert!(a.residual(&x, &b) < 1e-13);
    }

    #[test]
    fn duplicates_are_summed() {
        let mut a = SparseSystem::new(1);
        a.add(0, 0, 1.0);
        a.add(0, 0, 3.0);
        assert_eq!(a.solve(&[8.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn empty_row_is_singular() {
        let mut a = SparseSystem::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(Error::Singular { .. })));
    }
}
