//! Compressed sparse row matrix used as the feature container.

use serde::{Deserialize, Serialize};

/// Row-major sparse matrix. Column indices within a row are strictly
/// increasing and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_cols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Appends a row given as `(column, value)` pairs sorted by column.
    /// Zero values are skipped.
    ///
    /// # Panics
    /// If columns are out of range or not strictly increasing.
    pub fn push_row<I>(&mut self, entries: I)
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let start = self.cols.len();
        for (c, v) in entries {
            assert!(c < self.n_cols, "column {c} out of range {}", self.n_cols);
            if let Some(&last) = self.cols[start..].last() {
                assert!(c > last, "columns must be strictly increasing");
            }
            if v != 0.0 {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    /// Builds from dense rows, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>], n_cols: usize) -> Self {
        let mut m = Self::empty(n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged dense input");
            m.push_row(row.iter().copied().enumerate());
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Stored value at `(i, j)`, `None` when absent.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// `(row, col, value)` triples in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows()).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&c, &v)| (i, c, v))
        })
    }

    /// Subset of rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut m = Self::empty(self.n_cols);
        for &i in rows {
            let (cols, vals) = self.row(i);
            m.push_row(cols.iter().copied().zip(vals.iter().copied()));
        }
        m
    }

    /// Assembles from triplets; duplicates are an error.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self, String> {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut m = Self::empty(n_cols);
        let mut it = triplets.into_iter().peekable();
        for r in 0..n_rows {
            let mut row = Vec::new();
            while let Some(&(tr, tc, tv)) = it.peek() {
                if tr != r {
                    break;
                }
                if tc >= n_cols {
                    return Err(format!("column {tc} out of range {n_cols}"));
                }
                if row.last().is_some_and(|&(c, _)| c == tc) {
                    return Err(format!("duplicate entry ({tr}, {tc})"));
                }
                row.push((tc, tv));
                it.next();
            }
            m.push_row(row);
        }
        if let Some((r, _, _)) = it.next() {
            return Err(format!("row {r} out of range {n_rows}"));
        }
        Ok(m)
    }
}
