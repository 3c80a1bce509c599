//! Column-compressed sparse matrices with a fixed sparsity pattern.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Explicit zeros are
    /// kept as structural entries; duplicate positions are rejected.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(r, c, _) in &triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidConfig(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        triplets.sort_unstable_by_key(|t| (t.1, t.0));
        if triplets
            .windows(2)
            .any(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1)
        {
            return Err(Error::InvalidConfig(
                "duplicate entry in sparse matrix".into(),
            ));
        }
        let mut colptr = vec![0usize; ncols + 1];
        for &(_, c, _) in &triplets {
            colptr[c + 1] += 1;
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        let rowidx = triplets.iter().map(|t| t.0).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowidx(&self) -> &[usize] {
        &self.rowidx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the stored values. The pattern cannot change.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowidx == other.rowidx
    }

    /// Position of `(row, col)` in the value array, if stored.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let lo = self.colptr[col];
        let hi = self.colptr[col + 1];
        self.rowidx[lo..hi].binary_search(&row).ok().map(|p| lo + p)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.position(row, col).map_or(0.0, |p| self.values[p])
    }

    /// Triplets in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            (self.colptr[j]..self.colptr[j + 1]).map(move |p| (self.rowidx[p], j, self.values[p]))
        })
    }

    /// `y += alpha * A x`
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for j in 0..self.ncols {
            let xj = alpha * x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowidx[p]] += self.values[p] * xj;
            }
        }
    }

    /// `y += alpha * Aᵀ x`
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.values[p] * x[self.rowidx[p]];
            }
            y[j] += alpha * acc;
        }
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut colptr = vec![0usize; self.nrows + 1];
        for &r in &self.rowidx {
            colptr[r + 1] += 1;
        }
        for i in 0..self.nrows {
            colptr[i + 1] += colptr[i];
        }
        let mut next = colptr.clone();
        let mut rowidx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let r = self.rowidx[p];
                let q = next[r];
                next[r] += 1;
                rowidx[q] = j;
                values[q] = self.values[p];
            }
        }
        CscMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr,
            rowidx,
            values,
        }
    }

    /// Dense row-major copy, for tests and debugging.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }

    /// Scales row `i` by `row[i]` and column `j` by `col[j]`.
    pub(crate) fn scale(&mut self, row: &[f64], col: &[f64]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.values[p] *= row[self.rowidx[p]] * col[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CscMatrix {
        CscMatrix::from_triplets(
            3,
            2,
            vec![(2, 0, 3.0), (0, 0, 1.0), (1, 1, -2.0), (2, 1, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn triplets_sorted_by_column() {
        let a = sample();
        assert_eq!(a.colptr(), &[0, 2, 4]);
        assert_eq!(a.rowidx(), &[0, 2, 1, 2]);
        assert_eq!(a.values(), &[1.0, 3.0, -2.0, 0.0]);
        assert_eq!(a.position(2, 1), Some(3));
        assert_eq!(a.position(0, 1), None);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(CscMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(CscMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn products_match_dense() {
        let a = sample();
        let x = [2.0, -1.0];
        let mut y = vec![0.0; 3];
        a.gemv(1.0, &x, &mut y);
        assert_eq!(y, vec![2.0, 2.0, 6.0]);
        let mut z = vec![0.0; 2];
        a.gemv_t(1.0, &[1.0, 1.0, 1.0], &mut z);
        assert_eq!(z, vec![4.0, -2.0]);
        let t = a.transpose();
        assert_eq!(
            t.to_dense(),
            vec![vec![1.0, 0.0, 3.0], vec![0.0, -2.0, 0.0]]
        );
        assert_eq!(t.transpose(), a);
    }
}
