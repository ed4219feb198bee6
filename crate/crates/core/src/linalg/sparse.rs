use rayon::prelude::*;

use super::dense::DenseMatrix;
use crate::{Error, Result};

const ROW_CHUNK: usize = 1024;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays. Columns must be sorted and unique per row.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch {
                expected: nrows + 1,
                got: row_ptr.len(),
            });
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidArgument(
                "inconsistent CSR array lengths".into(),
            ));
        }
        for i in 0..nrows {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if row_ptr[i] > row_ptr[i + 1] || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has unsorted or duplicate columns"
                )));
            }
            if cols.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has a column out of range"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// Builds from unordered triplets. Duplicates are summed in input order and
    /// exact zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of range");
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
            symmetric: true,
        }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                let v = a[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &t)
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Columns and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn symmetry_asserted(&self) -> bool {
        self.symmetric
    }

    /// Records that the matrix is symmetric by construction.
    pub fn assert_symmetric(mut self) -> Self {
        debug_assert!(self.is_structurally_symmetric());
        self.symmetric = true;
        self
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: y.len(),
            });
        }
        y.par_chunks_mut(ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, yc)| {
                let base = chunk * ROW_CHUNK;
                for (k, yi) in yc.iter_mut().enumerate() {
                    let i = base + k;
                    let mut s = 0.0;
                    for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                        s += self.values[p] * x[self.col_idx[p]];
                    }
                    *yi = s;
                }
            });
        Ok(())
    }

    /// `y = A^T x` without forming the transpose.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[p]] += self.values[p] * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[p];
                let q = next[c];
                col_idx[q] = i;
                values[q] = self.values[p];
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                got: other.nrows,
            });
        }
        let ncols = other.ncols;
        let chunks: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)> = (0..self.nrows)
            .collect::<Vec<_>>()
            .par_chunks(ROW_CHUNK)
            .map(|rows| {
                let mut acc = vec![0.0f64; ncols];
                let mut mark = vec![usize::MAX; ncols];
                let mut counts = Vec::with_capacity(rows.len());
                let mut cols_out = Vec::new();
                let mut vals_out = Vec::new();
                let mut touched = Vec::new();
                for &i in rows {
                    touched.clear();
                    for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                        let k = self.col_idx[p];
                        let a = self.values[p];
                        for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                            let j = other.col_idx[q];
                            if mark[j] != i {
                                mark[j] = i;
                                acc[j] = 0.0;
                                touched.push(j);
                            }
                            acc[j] += a * other.values[q];
                        }
                    }
                    touched.sort_unstable();
                    let mut c = 0;
                    for &j in &touched {
                        if acc[j] != 0.0 {
                            cols_out.push(j);
                            vals_out.push(acc[j]);
                            c += 1;
                        }
                    }
                    counts.push(c);
                }
                (counts, cols_out, vals_out)
            })
            .collect();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let total: usize = chunks.iter().map(|c| c.1.len()).sum();
        let mut col_idx = Vec::with_capacity(total);
        let mut values = Vec::with_capacity(total);
        for (counts, cols, vals) in chunks {
            for c in counts {
                row_ptr.push(row_ptr.last().unwrap() + c);
            }
            col_idx.extend(cols);
            values.extend(vals);
        }
        Ok(Self {
            nrows: self.nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        })
    }

    /// `alpha * self + beta * other` on the union pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                got: other.nrows,
            });
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let (c, v) = if q >= cb.len() || (p < ca.len() && ca[p] < cb[q]) {
                    p += 1;
                    (ca[p - 1], alpha * va[p - 1])
                } else if p >= ca.len() || cb[q] < ca[p] {
                    q += 1;
                    (cb[q - 1], beta * vb[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (ca[p - 1], alpha * va[p - 1] + beta * vb[q - 1])
                };
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric && other.symmetric,
        })
    }

    /// Submatrix with the given rows and columns, in the given order.
    /// `cols` must not contain duplicates.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &i in rows {
            entries.clear();
            let (cs, vs) = self.row(i);
            for (&c, &v) in cs.iter().zip(vs) {
                if col_map[c] != usize::MAX {
                    entries.push((col_map[c], v));
                }
            }
            entries.sort_unstable_by_key(|e| e.0);
            for &(c, v) in &entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        }
    }

    /// `P A P^T` where row `i` of the result is row `perm[i]` of `A`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        let mut out = self.submatrix(perm, perm);
        out.symmetric = self.symmetric;
        out
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| {
                self.row(i)
                    .0
                    .iter()
                    .all(|&j| self.row(j).0.binary_search(&i).is_ok())
            })
    }

    /// Largest `|a_ij - a_ji|` over the stored pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Removes stored entries with `|a_ij| <= tol * sqrt(|a_ii a_jj|)`,
    /// never touching the diagonal.
    pub fn drop_small(&self, tol: f64) -> Self {
        let diag = self.diagonal();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let scale = (diag[i] * diag.get(j).copied().unwrap_or(0.0)).abs().sqrt();
                if i == j || v.abs() > tol * scale {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            symmetric: self.symmetric,
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_spmv_is_identity() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x);
    }

    #[test]
    fn small_spmv() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(matches!(
            a.spmv(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn random_spd_spmv_matches_dense() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let n = 50;
        let mut b = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.2) {
                    b[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        // B B^T + n I is SPD
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        let s = CsrMatrix::from_dense(&a);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ys = s.spmv(&x).unwrap();
        let yd = a.matvec(&x);
        for (p, q) in ys.iter().zip(&yd) {
            assert!((p - q).abs() <= 1e-12);
        }
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 3.0);
    }

    #[test]
    fn transpose_and_matmul() {
        let p = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 0, 0.5), (1, 1, 0.5), (2, 1, 1.0)]);
        let pt = p.transpose();
        assert_eq!(pt.nrows(), 2);
        assert_eq!(pt.get(1, 2), 1.0);
        let prod = pt.matmul(&p).unwrap().to_dense();
        let oracle = pt.to_dense().matmul(&p.to_dense());
        for i in 0..2 {
            for j in 0..2 {
                assert!((prod[(i, j)] - oracle[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn add_scaled_union_pattern() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        let c = a.add_scaled(2.0, &b, 1.0).unwrap();
        assert_eq!(c.get(0, 0), 2.0);
        assert_eq!(c.get(0, 1), 2.0);
        assert_eq!(c.get(1, 1), 3.0);
        let z = a.add_scaled(1.0, &a, -1.0).unwrap();
        assert_eq!(z.nnz(), 0);
    }

    #[test]
    fn permutation_round_trip() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 2, 1.0), (2, 0, 1.0), (1, 1, 3.0), (2, 2, 5.0)],
        );
        let perm = [2, 0, 1];
        let mut inv = [0; 3];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let back = a.permute_symmetric(&perm).permute_symmetric(&inv);
        assert_eq!(back.to_dense(), a.to_dense());
    }

    #[test]
    fn from_raw_rejects_unsorted() {
        assert!(CsrMatrix::from_raw(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }
}
