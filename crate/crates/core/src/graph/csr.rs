//! Compressed sparse row storage and the sparse × dense product used for hop
//! propagation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rows at or above this count are propagated in parallel.
const PARALLEL_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from `(row, col, value)` triplets. Entries are
    /// ordered by row, then column; duplicate coordinates are kept as
    /// separate entries, so callers dedupe first when that matters.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_offsets = vec![0usize; n_rows + 1];
        for &(r, c, _) in &triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) outside {n_rows}x{n_cols}");
            row_offsets[r + 1] += 1;
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = triplets.iter().map(|t| t.1).collect();
        let values = triplets.iter().map(|t| t.2).collect();
        Csr { n_rows, n_cols, row_offsets, col_indices, values }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
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

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).filter(|(c, _)| **c == j).map(|(_, v)| *v).sum()
    }

    pub fn transpose(&self) -> Csr {
        let triplets = (0..self.n_rows)
            .flat_map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(move |(&j, &v)| (j, i, v))
            })
            .collect();
        Csr::from_triplets(self.n_cols, self.n_rows, triplets)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] += v;
            }
        }
        dense
    }

    /// `self · dense`, where `dense` is row-major `n_cols × width`.
    ///
    /// Each output row accumulates its entries in stored column order, so the
    /// result does not depend on how rows are split across threads.
    pub fn spmm(&self, dense: &[f64], width: usize) -> Vec<f64> {
        assert_eq!(dense.len(), self.n_cols * width, "dense operand has wrong size");
        let mut out = vec![0.0; self.n_rows * width];
        if width == 0 {
            return out;
        }
        let kernel = |(i, dst): (usize, &mut [f64])| {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                let src = &dense[j * width..(j + 1) * width];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        };
        if self.n_rows >= PARALLEL_ROWS {
            out.par_chunks_mut(width).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(width).enumerate().for_each(kernel);
        }
        out
    }

    /// `selfᵀ · dense` without materializing the transpose.
    pub fn spmm_transposed(&self, dense: &[f64], width: usize) -> Vec<f64> {
        assert_eq!(dense.len(), self.n_rows * width, "dense operand has wrong size");
        let mut out = vec![0.0; self.n_cols * width];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let src = &dense[i * width..(i + 1) * width];
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, s) in out[j * width..(j + 1) * width].iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sorted_by_row_then_col() {
        let m = Csr::from_triplets(2, 3, vec![(1, 2, 3.0), (0, 1, 1.0), (1, 0, 2.0)]);
        assert_eq!(m.row_offsets(), &[0, 1, 3]);
        assert_eq!(m.col_indices(), &[1, 0, 2]);
        assert_eq!(m.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmm_and_transpose_agree_with_dense() {
        let m = Csr::from_triplets(3, 2, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 0, -1.0), (2, 1, 0.5)]);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(m.spmm(&x, 2), vec![1.0, 2.0, 6.0, 8.0, 0.5, 0.0]);
        let y = [1.0, 0.0, 2.0];
        assert_eq!(m.spmm_transposed(&y, 1), m.transpose().spmm(&y, 1));
    }
}
