use nalgebra::DMatrix;

use crate::error::{AmgError, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices
/// and no stored exact zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Assemble from (row, col, value) triplets. Duplicates are summed and
    /// exact zeros dropped afterwards.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, v) in entries {
            if r >= n_rows || c >= n_cols {
                return Err(AmgError::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            if !v.is_finite() {
                return Err(AmgError::NonFinite { row: r, col: c });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut buf = vec![(0usize, 0.0f64); entries.len()];
        for &(r, c, v) in entries {
            buf[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for r in 0..n_rows {
            let row = &mut buf[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                if sum != 0.0 {
                    col_idx.push(c);
                    values.push(sum);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric().is_none();
        Ok(m)
    }

    /// Build directly from CSR arrays, which must already be sorted and
    /// duplicate free. Exact zeros are removed.
    pub fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1
            || col_idx.len() != values.len()
            || row_ptr[n_rows] != values.len()
        {
            return Err(AmgError::Dimension("inconsistent CSR arrays".into()));
        }
        let mut entries = Vec::with_capacity(values.len());
        for r in 0..n_rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(AmgError::Dimension("row_ptr not monotone".into()));
            }
            for k in row_ptr[r]..row_ptr[r + 1] {
                entries.push((r, col_idx[k], values[k]));
            }
        }
        Self::from_triplets(n_rows, n_cols, &entries)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            symmetric: n_rows == n_cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        let entries: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &entries)
    }

    /// Copy a dense matrix, dropping exact zeros.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &entries)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                m[(i, j)] = v;
            }
        }
        m
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

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// True when the matrix is bit-exactly symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// First asymmetric position found, if any.
    pub fn check_symmetric(&self) -> Option<(usize, usize)> {
        if !self.is_square() {
            return Some((0, 0));
        }
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                if self.get(j, i).to_bits() != v.to_bits() {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// y = A x without dimension checks beyond debug assertions.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(AmgError::Dimension(format!(
                "spmv: matrix has {} columns, vector has {}",
                self.n_cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Unchecked convenience for internal callers that already validated sizes.
    pub(crate) fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        y
    }

    /// y = A^T x.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(AmgError::Dimension(format!(
                "spmv_transpose: matrix has {} rows, vector has {}",
                self.n_rows,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row_iter(i) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (j, v) in self.row_iter(i) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr: counts,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != other.n_rows {
            return Err(AmgError::Dimension(format!(
                "matmul: {}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut acc = vec![0.0; other.n_cols];
        let mut mark = vec![usize::MAX; other.n_cols];
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        for i in 0..self.n_rows {
            cols.clear();
            for (k, a) in self.row_iter(i) {
                for (j, b) in other.row_iter(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = CsrMatrix {
            n_rows: self.n_rows,
            n_cols: other.n_cols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        m.symmetric = m.check_symmetric().is_none();
        Ok(m)
    }

    /// Entrywise alpha*self + beta*other.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<CsrMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(AmgError::Dimension("add: shapes differ".into()));
        }
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            entries.extend(self.row_iter(i).map(|(j, v)| (i, j, alpha * v)));
            entries.extend(other.row_iter(i).map(|(j, v)| (i, j, beta * v)));
        }
        Self::from_triplets(self.n_rows, self.n_cols, &entries)
    }

    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m.compact();
        m
    }

    /// D A D for a diagonal given as a vector.
    pub fn scale_symmetric(&self, d: &[f64]) -> Result<CsrMatrix> {
        if d.len() != self.n_rows || !self.is_square() {
            return Err(AmgError::Dimension("scale_symmetric: size".into()));
        }
        let mut m = self.clone();
        for i in 0..self.n_rows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                let j = m.col_idx[k];
                m.values[k] = d[i] * self.values[k] * d[j];
            }
        }
        m.compact();
        Ok(m)
    }

    /// Remove stored exact zeros.
    pub fn compact(&mut self) {
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        row_ptr.push(0);
        let mut w = 0;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.values[k] != 0.0 {
                    self.col_idx[w] = self.col_idx[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            row_ptr.push(w);
        }
        self.col_idx.truncate(w);
        self.values.truncate(w);
        self.row_ptr = row_ptr;
        self.symmetric = self.check_symmetric().is_none();
    }

    /// Rows `rows`, columns `cols` (both given as index lists) as a new matrix.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut entries = Vec::new();
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row_iter(i) {
                if map[j] != usize::MAX {
                    entries.push((r, map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &entries)
            .expect("submatrix indices are in range")
    }

    /// Sum of absolute row entries, maximised over rows.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Coarse operator P^T A P. When A is symmetric the result is symmetrised
/// entrywise so that the output is bit-exactly symmetric.
pub fn galerkin_product(p: &CsrMatrix, a: &CsrMatrix) -> Result<CsrMatrix> {
    if !a.is_square() || a.n_rows() != p.n_rows() {
        return Err(AmgError::Dimension(format!(
            "galerkin: A is {}x{}, P is {}x{}",
            a.n_rows(),
            a.n_cols(),
            p.n_rows(),
            p.n_cols()
        )));
    }
    let ap = a.matmul(p)?;
    let c = p.transpose().matmul(&ap)?;
    if !a.is_symmetric() || c.is_symmetric() {
        return Ok(c);
    }
    let ct = c.transpose();
    let mut entries = Vec::with_capacity(2 * c.nnz());
    for i in 0..c.n_rows() {
        entries.extend(c.row_iter(i).map(|(j, _)| (i, j, 1.0)));
        entries.extend(ct.row_iter(i).map(|(j, _)| (i, j, 1.0)));
    }
    let mut out = CsrMatrix::from_triplets(c.n_rows(), c.n_cols(), &entries)?;
    for i in 0..out.n_rows {
        for k in out.row_ptr[i]..out.row_ptr[i + 1] {
            let j = out.col_idx[k];
            out.values[k] = (c.get(i, j) + c.get(j, i)) * 0.5;
        }
    }
    out.compact();
    Ok(out)
}
