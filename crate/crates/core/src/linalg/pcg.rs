use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use super::vector::{axpy, dot, norm2, xpby};
use crate::{Error, Result};

/// A symmetric linear operator `y = A x`.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y).expect("operator dimension");
    }
}

/// Action of an approximate inverse, `z = P^{-1} r`.
///
/// Implementations must be fixed, symmetric and positive definite linear
/// operators for CG to be well defined.
pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                if d > 0.0 {
                    Ok(1.0 / d)
                } else {
                    Err(Error::ZeroDiagonal(i))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { inv_diag })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Convergence record of one PCG run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PcgReport {
    pub iterations: usize,
    /// `sqrt(r_k' z_k) / sqrt(r_0' z_0)` for k = 0, 1, ...
    pub history: Vec<f64>,
    pub converged: bool,
}

impl PcgReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once the preconditioned residual norm `sqrt(r' P^{-1} r)` has been
/// reduced by `opts.tol` relative to the initial one.
pub fn pcg(
    op: &dyn LinearOperator,
    f: &[f64],
    precond: &dyn Preconditioner,
    opts: &PcgOptions,
) -> Result<(Vec<f64>, PcgReport)> {
    pcg_with_monitor(op, f, precond, opts, |_, _| {})
}

/// As [`pcg`], calling `monitor(k, u_k)` after every iterate (including `u_0`).
pub fn pcg_with_monitor(
    op: &dyn LinearOperator,
    f: &[f64],
    precond: &dyn Preconditioner,
    opts: &PcgOptions,
    mut monitor: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, PcgReport)> {
    let n = op.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    if precond.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: precond.dim(),
        });
    }
    let mut u = vec![0.0; n];
    monitor(0, &u);
    let mut r = f.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut report = PcgReport {
        history: vec![1.0],
        ..Default::default()
    };
    if rz <= 0.0 {
        // f = 0 gives u = 0; a negative value means P is not SPD.
        if norm2(f) == 0.0 {
            report.converged = true;
            return Ok((u, report));
        }
        return Err(Error::Indefinite {
            iteration: 0,
            curvature: rz,
        });
    }
    let rz0 = rz;
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    for k in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Indefinite {
                iteration: k,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut u);
        axpy(-alpha, &ap, &mut r);
        monitor(k, &u);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let rel = (rz_new.max(0.0) / rz0).sqrt();
        report.history.push(rel);
        report.iterations = k;
        if rel <= opts.tol {
            report.converged = true;
            break;
        }
        if rz_new < 0.0 {
            return Err(Error::Indefinite {
                iteration: k,
                curvature: rz_new,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        xpby(&z, beta, &mut p);
    }
    Ok((u, report))
}

fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Relative defect `|<P x, y> - <x, P y>| / (|P x| |y|)` for seeded random
/// `x`, `y`.
pub fn symmetry_defect(precond: &dyn Preconditioner, seed: u64) -> f64 {
    let n = precond.dim();
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let x = random_vector(&mut rng, n);
    let y = random_vector(&mut rng, n);
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    precond.apply(&x, &mut px);
    precond.apply(&y, &mut py);
    let a = dot(&px, &y);
    let b = dot(&x, &py);
    let scale = (norm2(&px) * norm2(&y)).max(norm2(&x) * norm2(&py));
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).abs() / scale
}

/// `<P x, x> / (|x| |P x|)` for a seeded random `x`; positive for SPD `P`.
pub fn positivity_probe(precond: &dyn Preconditioner, seed: u64) -> f64 {
    let n = precond.dim();
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let x = random_vector(&mut rng, n);
    let mut px = vec![0.0; n];
    precond.apply(&x, &mut px);
    dot(&px, &x) / (norm2(&x) * norm2(&px)).max(f64::MIN_POSITIVE)
}

/// Gate run before a preconditioner is handed to CG.
pub fn check_preconditioner(precond: &dyn Preconditioner, seed: u64) -> Result<()> {
    if precond.dim() == 0 {
        return Ok(());
    }
    let defect = symmetry_defect(precond, seed);
    if !(defect <= 1e-10) {
        return Err(Error::ProbeFailed {
            probe: "symmetry",
            defect,
        });
    }
    let pos = positivity_probe(precond, seed.wrapping_add(1));
    if !(pos > 0.0) {
        return Err(Error::ProbeFailed {
            probe: "positivity",
            defect: pos,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).assert_symmetric()
    }

    #[test]
    fn one_by_one_system() {
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 2.0)]);
        let (u, rep) = pcg(&a, &[4.0], &IdentityPreconditioner(1), &PcgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!((u[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let a = laplace_1d(5);
        let (u, rep) = pcg(&a, &[0.0; 5], &IdentityPreconditioner(5), &PcgOptions::default()).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
    }

    #[test]
    fn max_iter_exhaustion_reports_not_converged() {
        let a = laplace_1d(50);
        let f = vec![1.0; 50];
        let opts = PcgOptions {
            tol: 1e-12,
            max_iter: 3,
        };
        let (_, rep) = pcg(&a, &f, &IdentityPreconditioner(50), &opts).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.history.len(), 4);
    }

    #[test]
    fn indefinite_matrix_detected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        let r = pcg(&a, &[0.0, 1.0], &IdentityPreconditioner(2), &PcgOptions::default());
        assert!(matches!(r, Err(Error::Indefinite { .. })));
    }

    #[test]
    fn jacobi_matches_dense() {
        let a = laplace_1d(30);
        let f: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let (u, rep) = pcg(&a, &f, &JacobiPreconditioner::new(&a).unwrap(), &PcgOptions::default()).unwrap();
        assert!(rep.converged);
        let x = super::super::dense::cholesky_solve(&a.to_dense(), &f).unwrap();
        assert!(super::super::vector::max_abs_diff(&u, &x) < 1e-6);
    }

    #[test]
    fn iteration_count_invariant_under_permutation() {
        let a = laplace_1d(40);
        let f: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let perm: Vec<usize> = (0..40).map(|i| (i * 7) % 40).collect();
        let pa = a.permute_symmetric(&perm);
        let pf: Vec<f64> = perm.iter().map(|&i| f[i]).collect();
        let opts = PcgOptions::default();
        let (_, r1) = pcg(&a, &f, &IdentityPreconditioner(40), &opts).unwrap();
        let (_, r2) = pcg(&pa, &pf, &IdentityPreconditioner(40), &opts).unwrap();
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn probes_reject_nonsymmetric() {
        struct Skew(DenseMatrix);
        impl Preconditioner for Skew {
            fn dim(&self) -> usize {
                self.0.nrows()
            }
            fn apply(&self, r: &[f64], z: &mut [f64]) {
                z.copy_from_slice(&self.0.matvec(r));
            }
        }
        let p = Skew(DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]));
        assert!(check_preconditioner(&p, 1).is_err());
        assert!(check_preconditioner(&IdentityPreconditioner(4), 1).is_ok());
    }
}
