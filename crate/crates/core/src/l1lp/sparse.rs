//! Minimal column-compressed sparse matrix used by the interior-point
//! solver: matrix-vector products and the normal matrix `A D A^T`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub(crate) fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.retain(|&(_, _, v)| v != 0.0);
        triplets.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut cur_col = 0usize;
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &triplets {
            debug_assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            while cur_col < c {
                col_ptr.push(row_idx.len());
                cur_col += 1;
            }
            row_idx.push(r);
            vals.push(v);
            last = Some((r, c));
        }
        while cur_col < ncols {
            col_ptr.push(row_idx.len());
            cur_col += 1;
        }
        Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            vals,
        }
    }

    pub(crate) fn nrows(&self) -> usize {
        self.nrows
    }

    pub(crate) fn ncols(&self) -> usize {
        self.ncols
    }

    /// `y = A x`
    pub(crate) fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.nrows);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.vals[k] * xc;
            }
        }
        y
    }

    /// `x = A^T y`
    pub(crate) fn tr_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.ncols);
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                acc += self.vals[k] * y[self.row_idx[k]];
            }
            x[c] = acc;
        }
        x
    }

    /// Dense normal matrix `A diag(d) A^T`, accumulated column by column.
    pub(crate) fn normal_matrix(&self, d: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.nrows);
        for c in 0..self.ncols {
            let dc = d[c];
            if dc == 0.0 {
                continue;
            }
            let lo = self.col_ptr[c];
            let hi = self.col_ptr[c + 1];
            for i in lo..hi {
                let ri = self.row_idx[i];
                let wi = dc * self.vals[i];
                // row indices within a column are sorted, so ri <= rk and
                // only the upper triangle is touched
                for k in i..hi {
                    m[(ri, self.row_idx[k])] += wi * self.vals[k];
                }
            }
        }
        for r in 0..self.nrows {
            for c in 0..r {
                m[(r, c)] = m[(c, r)];
            }
        }
        m
    }
}
