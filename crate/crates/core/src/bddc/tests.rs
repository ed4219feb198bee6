use rand::{Rng, SeedableRng};

use super::*;
use crate::assembly::{FemSystem, Smoothness, TargetField};
use crate::bddc::partition_geometric;
use crate::linalg::{check_preconditioner, cholesky_solve, vector::max_abs_diff};

fn smooth() -> TargetField {
    TargetField::new("smooth", Smoothness::SmoothH2, |x| {
        use std::f64::consts::PI;
        (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
    })
}

fn setup(n: usize, p: usize, rho: f64) -> (TetMesh, FemSystem, BddcOperator) {
    let m = TetMesh::build_structured_cube(n).unwrap();
    let s = FemSystem::build(&m, rho, &smooth()).unwrap();
    let part = partition_geometric(&m, p).unwrap();
    let op = BddcOperator::build(&m, &s, part).unwrap();
    (m, s, op)
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Dense elimination of the non-interface dofs.
fn dense_schur(a: &DenseMatrix, interface: &[usize]) -> DenseMatrix {
    let n = a.nrows();
    let interior: Vec<usize> = (0..n).filter(|d| interface.binary_search(d).is_err()).collect();
    let block = |r: &[usize], c: &[usize]| {
        DenseMatrix::from_rows(&r.iter().map(|&i| c.iter().map(|&j| a[(i, j)]).collect()).collect::<Vec<_>>())
    };
    let a_ii = block(&interior, &interior);
    let a_ic = block(&interior, interface);
    let a_cc = block(interface, interface);
    let mut s = a_cc;
    for j in 0..interface.len() {
        let col: Vec<f64> = (0..interior.len()).map(|i| a_ic[(i, j)]).collect();
        let x = cholesky_solve(&a_ii, &col).unwrap();
        for i in 0..interface.len() {
            let v: f64 = (0..interior.len()).map(|k| a_ic[(k, i)] * x[k]).sum();
            s[(i, j)] -= v;
        }
    }
    s
}

#[test]
fn two_by_two_block_elimination() {
    let a_ii = Cholesky::factor(&DenseMatrix::from_rows(&[vec![2.0]])).unwrap();
    let s = schur_from_blocks(&a_ii, DenseMatrix::from_rows(&[vec![1.0]]), DenseMatrix::from_rows(&[vec![2.0]]));
    assert!((s[(0, 0)] - 1.5).abs() < 1e-15);
}

#[test]
fn schur_apply_matches_dense_elimination() {
    let (_, s, op) = setup(4, 2, 1.0);
    let dense = dense_schur(&s.matrix().to_dense(), op.interface_dofs());
    let mut rng = rand::rngs::StdRng::seed_from_u64(1);
    for _ in 0..20 {
        let x = random_vec(op.n_interface(), &mut rng);
        let y = op.schur_apply(&x).unwrap();
        assert!(max_abs_diff(&y, &dense.matvec(&x)) < 1e-10);
    }
    assert!(op.schur_apply(&vec![0.0; op.n_interface()]).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn local_schur_complements_sum_to_global() {
    let (_, s, op) = setup(5, 4, 1e-3);
    let dense = dense_schur(&s.matrix().to_dense(), op.interface_dofs());
    let nc = op.n_interface();
    let mut sum = DenseMatrix::zeros(nc, nc);
    for i in 0..op.n_subdomains() {
        let (g, _) = op.local_interface(i);
        let si = op.local_schur(i);
        for (a, &ga) in g.iter().enumerate() {
            for (b, &gb) in g.iter().enumerate() {
                sum[(ga, gb)] += si[(a, b)];
            }
        }
    }
    assert!(sum.max_abs_diff(&dense) < 1e-12);
}

#[test]
fn zero_rhs_round_trip() {
    let (_, s, op) = setup(4, 2, 1.0);
    let f = vec![0.0; s.n_dofs()];
    assert!(op.reduce_rhs(&f).unwrap().iter().all(|&v| v == 0.0));
    let u = op.expand_solution(&vec![0.0; op.n_interface()], &f).unwrap();
    assert!(u.iter().all(|&v| v == 0.0));
}

#[test]
fn full_pipeline_matches_dense_solve() {
    for (n, p, rho) in [(4, 2, 1.0), (5, 4, 1e-6), (6, 2, 1e-2)] {
        let (_, s, op) = setup(n, p, rho);
        let dense = cholesky_solve(&s.matrix().to_dense(), s.load()).unwrap();
        let opts = PcgOptions { tol: 1e-12, max_iter: 500 };
        let (u, rep) = op.solve(s.load(), &opts).unwrap();
        assert!(rep.converged);
        assert!(max_abs_diff(&u, &dense) < 1e-8, "n={n} p={p}");
    }
}

#[test]
fn permuting_to_block_order_round_trips() {
    let (_, s, op) = setup(4, 2, 1.0);
    let a = s.matrix();
    let mut perm: Vec<usize> = (0..a.nrows()).filter(|d| op.interface_dofs().binary_search(d).is_err()).collect();
    perm.extend_from_slice(op.interface_dofs());
    let mut inv = vec![0; perm.len()];
    for (k, &d) in perm.iter().enumerate() {
        inv[d] = k;
    }
    let back = a.permute_symmetric(&perm).permute_symmetric(&inv);
    assert_eq!(back.to_dense(), a.to_dense());
}

#[test]
fn multiplicity_weights_form_partition_of_unity() {
    let (_, _, op) = setup(4, 2, 1.0);
    for i in 0..2 {
        assert!(op.local_interface(i).1.iter().all(|&w| w == 0.5));
    }
    assert_eq!(op.partition_of_unity_defect(), 0.0);
    let (_, _, op) = setup(8, 8, 1.0);
    assert!(op.partition_of_unity_defect() < 1e-15);
}

#[test]
fn coarse_basis_satisfies_constraints() {
    let (_, _, op) = setup(8, 4, 1.0);
    assert!(op.constraint_residual() < 1e-10);
    // corner constraints are unit rows, so the basis is 1 there
    for i in 0..op.n_subdomains() {
        let c = op.local_constraints(i);
        let phi = op.local_coarse_basis(i);
        for r in 0..c.nrows() {
            let nz: Vec<usize> = (0..c.ncols()).filter(|&j| c[(r, j)] != 0.0).collect();
            if nz.len() == 1 {
                assert!((phi[(nz[0], r)] - 1.0).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn coarse_basis_has_minimal_energy() {
    let (_, _, op) = setup(6, 4, 1e-2);
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    for i in 0..op.n_subdomains() {
        let s = op.local_schur(i);
        let c = op.local_constraints(i);
        let phi = op.local_coarse_basis(i);
        let ng = s.nrows();
        let energy = |v: &[f64]| -> f64 { v.iter().zip(s.matvec(v)).map(|(a, b)| a * b).sum() };
        let cct = c.matmul(&c.transpose());
        for probe in 0..10 {
            let col = probe % c.nrows();
            let d = random_vec(ng, &mut rng);
            // project d onto the null space of C
            let lam = cholesky_solve(&cct, &c.matvec(&d)).unwrap();
            let ctl = c.transpose().matvec(&lam);
            let d: Vec<f64> = d.iter().zip(ctl).map(|(a, b)| a - b).collect();
            assert!(c.matvec(&d).iter().all(|v| v.abs() < 1e-10));
            let base: Vec<f64> = (0..ng).map(|j| phi[(j, col)]).collect();
            let moved: Vec<f64> = base.iter().zip(&d).map(|(a, b)| a + 1e-2 * b).collect();
            assert!(energy(&moved) > energy(&base));
        }
    }
}

#[test]
fn rank_deficient_constraints_rejected() {
    let s = Cholesky::factor(&DenseMatrix::identity(3)).unwrap();
    let c = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0]]);
    assert!(matches!(
        constrained_basis(&s, &c, 7),
        Err(Error::RankDeficientConstraints { subdomain: 7 })
    ));
}

#[test]
fn preconditioner_is_symmetric_positive() {
    let (_, _, op) = setup(8, 4, 1.0);
    check_preconditioner(&op, 3).unwrap();
    let (_, _, op) = setup(6, 8, 1e-8);
    check_preconditioner(&op, 4).unwrap();
}

#[test]
fn coarse_correction_is_s_orthogonal_projection() {
    let m = TetMesh::build_structured_cube(6).unwrap();
    let s = FemSystem::build(&m, 1e-4, &smooth()).unwrap();
    let opts = BddcOptions { coarse: CoarseOperator::Galerkin };
    let op = BddcOperator::build_with(&m, &s, partition_geometric(&m, 4).unwrap(), &opts).unwrap();
    check_preconditioner(&op, 8).unwrap();
    let phi = op.coarse_basis();
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    for _ in 0..5 {
        let r = random_vec(op.n_interface(), &mut rng);
        let t0 = op.coarse_correction(&r);
        let st0 = op.schur_apply(&t0).unwrap();
        let lhs = phi.transpose().matvec(&st0);
        let rhs = phi.transpose().matvec(&r);
        assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }
}

#[test]
fn apply_is_deterministic() {
    let (_, _, op) = setup(6, 4, 1.0);
    let r: Vec<f64> = (0..op.n_interface()).map(|i| (i as f64).cos()).collect();
    assert_eq!(op.bddc_apply(&r), op.bddc_apply(&r));
}

#[test]
fn partially_assembled_coarse_matrix_is_local_energy() {
    let (_, _, op) = setup(6, 4, 1e-2);
    assert_eq!(op.coarse_operator(), CoarseOperator::PartiallyAssembled);
    let np = op.primal().len();
    let mut oracle = DenseMatrix::zeros(np, np);
    for i in 0..op.n_subdomains() {
        let phi = op.local_coarse_basis(i);
        let e = phi.transpose().matmul(&op.local_schur(i).matmul(&phi));
        let gp = op.local_primal(i);
        for a in 0..gp.len() {
            for b in 0..gp.len() {
                oracle[(gp[a], gp[b])] += e[(a, b)];
            }
        }
    }
    let c = op.coarse_matrix();
    let scale = (0..np).fold(0.0f64, |m, k| m.max(c[(k, k)]));
    assert!(c.max_abs_diff(&oracle) < 1e-10 * scale);
}
