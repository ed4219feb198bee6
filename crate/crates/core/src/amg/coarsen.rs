use crate::linalg::CsrMatrix;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Coarse,
    Fine,
}

/// Red-black coarsening and averaging interpolation `P` (fine x coarse).
pub fn coarsen_redblack(a: &CsrMatrix) -> (Vec<DofKind>, CsrMatrix) {
    let n = a.nrows();
    let mut kind: Vec<Option<DofKind>> = vec![None; n];
    for i in 0..n {
        if kind[i].is_some() {
            continue;
        }
        kind[i] = Some(DofKind::Coarse);
        for &j in a.row(i).0 {
            if j != i && kind[j].is_none() {
                kind[j] = Some(DofKind::Fine);
            }
        }
    }
    let mut kind: Vec<DofKind> = kind.into_iter().map(Option::unwrap).collect();
    // a fine dof without coarse neighbours would get an empty row in P
    for i in 0..n {
        if kind[i] == DofKind::Fine
            && !a.row(i).0.iter().any(|&j| j != i && kind[j] == DofKind::Coarse)
        {
            kind[i] = DofKind::Coarse;
        }
    }
    let mut coarse_index = vec![usize::MAX; n];
    let mut nc = 0;
    for i in 0..n {
        if kind[i] == DofKind::Coarse {
            coarse_index[i] = nc;
            nc += 1;
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for i in 0..n {
        match kind[i] {
            DofKind::Coarse => {
                col_idx.push(coarse_index[i]);
                values.push(1.0);
            }
            DofKind::Fine => {
                let start = col_idx.len();
                for &j in a.row(i).0 {
                    if j != i && kind[j] == DofKind::Coarse {
                        col_idx.push(coarse_index[j]);
                    }
                }
                let w = 1.0 / (col_idx.len() - start) as f64;
                values.resize(col_idx.len(), w);
            }
        }
        row_ptr.push(col_idx.len());
    }
    let p = CsrMatrix::from_raw(n, nc, row_ptr, col_idx, values).expect("valid interpolation");
    (kind, p)
}

/// `P^T A P`, symmetrised to remove roundoff asymmetry.
pub fn galerkin_coarse(a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    let pt = p.transpose();
    let ac = pt.matmul(&a.matmul(p)?)?;
    let act = ac.transpose();
    Ok(ac.add_scaled(0.5, &act, 0.5)?.assert_symmetric())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Cholesky, DenseMatrix};

    fn path(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn five_node_path() {
        let (kind, p) = coarsen_redblack(&path(5));
        let coarse: Vec<usize> = (0..5).filter(|&i| kind[i] == DofKind::Coarse).collect();
        assert_eq!(coarse, vec![0, 2, 4]);
        assert_eq!(p.ncols(), 3);
        assert_eq!(p.row(1), (&[0usize, 1][..], &[0.5, 0.5][..]));
        assert_eq!(p.row(3), (&[1usize, 2][..], &[0.5, 0.5][..]));
        assert_eq!(p.row(2), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn diagonal_matrix_is_all_coarse() {
        let a = CsrMatrix::from_triplets(4, 4, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (3, 3, 4.0)]);
        let (kind, p) = coarsen_redblack(&a);
        assert!(kind.iter().all(|&k| k == DofKind::Coarse));
        assert_eq!(p.to_dense(), DenseMatrix::identity(4));
    }

    #[test]
    fn galerkin_identity_interpolation() {
        let a = path(6);
        let ac = galerkin_coarse(&a, &CsrMatrix::identity(6)).unwrap();
        assert_eq!(ac.to_dense(), a.to_dense());
    }

    #[test]
    fn galerkin_two_by_two_hand_product() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        let p = CsrMatrix::from_triplets(2, 1, &[(0, 0, 1.0), (1, 0, 0.5)]);
        let ac = galerkin_coarse(&a, &p).unwrap();
        assert_eq!(ac.nrows(), 1);
        assert!((ac.get(0, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn galerkin_random_spd_stays_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let n = 12;
        let mut b = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if rng.gen_bool(0.3) {
                    b[(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
        }
        let mut ad = b.matmul(&b.transpose());
        for i in 0..n {
            ad[(i, i)] += 1.0;
        }
        let a = CsrMatrix::from_dense(&ad);
        let (_, p) = coarsen_redblack(&a);
        let ac = galerkin_coarse(&a, &p).unwrap();
        assert!(ac.symmetry_defect() < 1e-13);
        Cholesky::factor(&ac.to_dense()).unwrap();
    }
}
