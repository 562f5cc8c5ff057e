//! Symmetric sparse matrices stored as their upper triangle in CSR form.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A symmetric linear map `ℝ^n → ℝ^n`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y ← A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

/// Upper triangle (diagonal included) in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl SymmetricSparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            values: Vec::new(),
            diag: vec![0.0; n],
        }
    }

    /// Builds the matrix from `(row, col, value)` triplets. Entries are mirrored
    /// into the upper triangle and duplicates summed, so every off-diagonal
    /// pair must be given once, on either side.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        for t in triplets.iter_mut() {
            if t.0 >= n || t.1 >= n {
                return Err(Error::IndexOutOfRange {
                    index: t.0.max(t.1),
                    len: n,
                });
            }
            if t.1 < t.0 {
                core::mem::swap(&mut t.0, &mut t.1);
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self::from_csr_unchecked(n, row_ptr, cols, values))
    }

    /// Takes CSR arrays of the upper triangle with ascending columns per row.
    pub(crate) fn from_csr_unchecked(n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, values: Vec<f64>) -> Self {
        let mut diag = vec![0.0; n];
        for (r, d) in diag.iter_mut().enumerate() {
            let start = row_ptr[r];
            if start < row_ptr[r + 1] && cols[start] == r {
                *d = values[start];
            }
        }
        Self {
            n,
            row_ptr,
            cols,
            values,
            diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored (upper-triangle) entry count.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Stored entries `(row, col, value)` with `row ≤ col`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y ← A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.matvec_add(1.0, x, y);
    }

    /// `y ← y + s A x`.
    pub fn matvec_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let xr = x[r];
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                let v = self.values[k];
                acc += v * x[c];
                if c != r {
                    y[c] += s * v * xr;
                }
            }
            y[r] += s * acc;
        }
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.n];
        self.matvec(y, &mut ay);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (r, c, v) in self.entries() {
            out[r * self.n + c] = v;
            out[c * self.n + r] = v;
        }
        out
    }
}

impl LinearOperator for SymmetricSparseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}
