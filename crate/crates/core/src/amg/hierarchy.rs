use serde::{Deserialize, Serialize};

use super::coarsen::{coarsen_redblack, galerkin_coarse, DofKind};
use super::smoother::{gauss_seidel_backward, gauss_seidel_forward, inverse_diagonal};
use crate::linalg::{Cholesky, CsrMatrix, Preconditioner};
use crate::Result;

/// Above this size a stalled coarsening falls back to smoothing on the
/// coarsest level instead of a dense factorisation.
const DENSE_COARSE_LIMIT: usize = 4096;
const COARSE_SMOOTHING_SWEEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmgOptions {
    /// Stop coarsening once a level has at most this many dofs.
    pub coarse_threshold: usize,
    /// Gauss-Seidel sweeps before and after the coarse correction.
    pub smoothing_steps: usize,
    pub max_levels: usize,
}

impl Default for AmgOptions {
    fn default() -> Self {
        Self {
            coarse_threshold: 64,
            smoothing_steps: 1,
            max_levels: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AmgLevel {
    pub a: CsrMatrix,
    pub p: CsrMatrix,
    pub kinds: Vec<DofKind>,
    pt: CsrMatrix,
    inv_diag: Vec<f64>,
}

#[derive(Debug, Clone)]
enum CoarseSolve {
    Dense(Cholesky),
    Smooth(Vec<f64>),
}

/// A V-cycle preconditioner.
#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarsest: CsrMatrix,
    coarse_solve: CoarseSolve,
    smoothing_steps: usize,
}

impl AmgHierarchy {
    pub fn build(a: &CsrMatrix, opts: &AmgOptions) -> Result<Self> {
        let mut levels = Vec::new();
        let mut current = a.clone();
        while current.nrows() > opts.coarse_threshold && levels.len() + 1 < opts.max_levels.max(1) {
            let (kinds, p) = coarsen_redblack(&current);
            if p.ncols() == current.nrows() || p.ncols() == 0 {
                break;
            }
            let coarse = galerkin_coarse(&current, &p)?;
            let inv_diag = inverse_diagonal(&current)?;
            levels.push(AmgLevel {
                pt: p.transpose(),
                a: current,
                p,
                kinds,
                inv_diag,
            });
            current = coarse;
        }
        let coarse_solve = if current.nrows() <= DENSE_COARSE_LIMIT.max(opts.coarse_threshold) {
            CoarseSolve::Dense(Cholesky::factor(&current.to_dense())?)
        } else {
            CoarseSolve::Smooth(inverse_diagonal(&current)?)
        };
        Ok(Self {
            levels,
            coarsest: current,
            coarse_solve,
            smoothing_steps: opts.smoothing_steps,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn levels(&self) -> &[AmgLevel] {
        &self.levels
    }

    /// Dofs per level, finest first.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels
            .iter()
            .map(|l| l.a.nrows())
            .chain(std::iter::once(self.coarsest.nrows()))
            .collect()
    }

    /// Total stored nonzeros over all operators, relative to the finest one.
    pub fn operator_complexity(&self) -> f64 {
        let fine = self.levels.first().map_or(self.coarsest.nnz(), |l| l.a.nnz());
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum::<usize>() + self.coarsest.nnz();
        total as f64 / fine.max(1) as f64
    }

    fn coarse(&self, r: &[f64], z: &mut [f64]) {
        match &self.coarse_solve {
            CoarseSolve::Dense(ch) => {
                z.copy_from_slice(r);
                ch.solve_in_place(z);
            }
            CoarseSolve::Smooth(inv) => {
                z.fill(0.0);
                for _ in 0..COARSE_SMOOTHING_SWEEPS {
                    gauss_seidel_forward(&self.coarsest, inv, r, z);
                }
                for _ in 0..COARSE_SMOOTHING_SWEEPS {
                    gauss_seidel_backward(&self.coarsest, inv, r, z);
                }
            }
        }
    }

    fn vcycle(&self, level: usize, r: &[f64], z: &mut [f64]) {
        let Some(l) = self.levels.get(level) else {
            self.coarse(r, z);
            return;
        };
        z.fill(0.0);
        for _ in 0..self.smoothing_steps {
            gauss_seidel_forward(&l.a, &l.inv_diag, r, z);
        }
        let mut res = vec![0.0; r.len()];
        l.a.spmv_into(z, &mut res).expect("level dimension");
        for (ri, &fi) in res.iter_mut().zip(r) {
            *ri = fi - *ri;
        }
        let rc = l.pt.spmv(&res).expect("level dimension");
        let mut zc = vec![0.0; rc.len()];
        self.vcycle(level + 1, &rc, &mut zc);
        l.p.spmv_into(&zc, &mut res).expect("level dimension");
        for (zi, ci) in z.iter_mut().zip(&res) {
            *zi += ci;
        }
        for _ in 0..self.smoothing_steps {
            gauss_seidel_backward(&l.a, &l.inv_diag, r, z);
        }
    }
}

impl Preconditioner for AmgHierarchy {
    fn dim(&self) -> usize {
        self.levels.first().map_or(self.coarsest.nrows(), |l| l.a.nrows())
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.vcycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{check_preconditioner, pcg, PcgOptions};

    fn laplace_3d(n: usize) -> CsrMatrix {
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let r = idx(i, j, k);
                    t.push((r, r, 6.0));
                    if i + 1 < n {
                        t.push((r, idx(i + 1, j, k), -1.0));
                        t.push((idx(i + 1, j, k), r, -1.0));
                    }
                    if j + 1 < n {
                        t.push((r, idx(i, j + 1, k), -1.0));
                        t.push((idx(i, j + 1, k), r, -1.0));
                    }
                    if k + 1 < n {
                        t.push((r, idx(i, j, k + 1), -1.0));
                        t.push((idx(i, j, k + 1), r, -1.0));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n * n * n, n * n * n, &t)
    }

    #[test]
    fn hierarchy_shrinks_to_threshold() {
        let a = laplace_3d(10);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        let sizes = h.level_sizes();
        assert!(sizes.windows(2).all(|w| w[1] < w[0]));
        assert!(*sizes.last().unwrap() <= 64);
    }

    #[test]
    fn small_matrix_is_solved_exactly() {
        let a = laplace_3d(3);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let x: Vec<f64> = (0..27).map(|i| (i as f64).sin()).collect();
        let b = a.spmv(&x).unwrap();
        let mut z = vec![0.0; 27];
        h.apply(&b, &mut z);
        for i in 0..27 {
            assert!((z[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn vcycle_is_spd_and_linear() {
        let a = laplace_3d(8);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        check_preconditioner(&h, 11).unwrap();
        let n = a.nrows();
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let (mut zx, mut zy, mut zxy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        h.apply(&x, &mut zx);
        h.apply(&y, &mut zy);
        h.apply(&xy, &mut zxy);
        for i in 0..n {
            assert!((zxy[i] - (2.0 * zx[i] - 3.0 * zy[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn error_propagation_contracts() {
        // power iteration on I - B A
        let a = laplace_3d(8);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        let n = a.nrows();
        let mut e: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
        let mut ratio = 0.0;
        for _ in 0..30 {
            let before = crate::linalg::vector::norm2(&e);
            let ae = a.spmv(&e).unwrap();
            let mut z = vec![0.0; n];
            h.apply(&ae, &mut z);
            for i in 0..n {
                e[i] -= z[i];
            }
            let after = crate::linalg::vector::norm2(&e);
            ratio = after / before;
            for v in e.iter_mut() {
                *v /= after;
            }
        }
        assert!(ratio < 1.0, "spectral radius estimate {ratio}");
    }

    #[test]
    fn pcg_with_vcycle_converges_fast() {
        let a = laplace_3d(12);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        let b = vec![1.0; a.nrows()];
        let (_, rep) = pcg(&a, &b, &h, &PcgOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations < 30, "{} iterations", rep.iterations);
    }

    #[test]
    fn diagonal_matrix_stops_coarsening() {
        let t: Vec<_> = (0..200).map(|i| (i, i, 1.0 + i as f64)).collect();
        let a = CsrMatrix::from_triplets(200, 200, &t);
        let h = AmgHierarchy::build(&a, &AmgOptions::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
    }
}
