use std::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut c = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let crow = c.row_mut(i);
                for (cj, oj) in crow.iter_mut().zip(orow) {
                    *cj += a * oj;
                }
            }
        }
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Dense Cholesky factor `A = L L^T`, stored row-major (lower triangle used).
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors an SPD matrix. Only the lower triangle of `a` is read.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let v = a[(i, j)] - s;
                if i == j {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: v });
                    }
                    l[i * n + i] = v.sqrt();
                } else {
                    l[i * n + j] = v / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn l(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * self.n + j]
        }
    }

    /// `x <- L^{-1} x`
    pub fn forward_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
    }

    /// `x <- L^{-T} x`
    pub fn backward_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            let row = &self.l[i * n..i * n + i];
            for (xk, lk) in x[..i].iter_mut().zip(row) {
                *xk -= lk * xi;
            }
        }
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        self.forward_in_place(x);
        self.backward_in_place(x);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L L^T`, for verification.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.n;
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let k = i.min(j) + 1;
                a[(i, j)] = (0..k).map(|m| self.l(i, m) * self.l(j, m)).sum();
            }
        }
        a
    }
}

/// Solves an SPD system by dense Cholesky.
pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Cholesky::factor(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let b = vec![1.0, 2.0, 3.0];
        assert_eq!(cholesky_solve(&DenseMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn two_by_two_hand_elimination() {
        let a = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15);
    }

    #[test]
    fn reconstruction() {
        let a = DenseMatrix::from_rows(&[
            vec![6.0, 2.0, 1.0, 0.5],
            vec![2.0, 5.0, 2.0, 0.0],
            vec![1.0, 2.0, 4.0, 1.0],
            vec![0.5, 0.0, 1.0, 3.0],
        ]);
        let c = Cholesky::factor(&a).unwrap();
        assert!(c.reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            Cholesky::factor(&a),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
    }
}
