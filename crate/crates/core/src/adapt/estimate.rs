use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::quadrature::for_each_point;
use crate::assembly::{ElementGeometry, Solution, TargetField};
use crate::mesh::geometry::{cross, dist, sub};
use crate::mesh::{Point, TetMesh};
use crate::{Error, Result};

/// Per-tet error indicators `eta_T` and their l2 sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub per_tet: Vec<f64>,
    pub global: f64,
}

impl Estimate {
    pub fn from_indicators(per_tet: Vec<f64>) -> Self {
        let global = per_tet.iter().map(|e| e * e).sum::<f64>().sqrt();
        Self { per_tet, global }
    }
}

/// Residual estimator for `-rho Lap u + u = target` with the weights
/// `alpha_S = min(h_S / sqrt(rho), 1)`.
pub fn estimate(sol: &Solution<'_>, target: &TargetField) -> Result<Estimate> {
    estimate_nodal(sol.mesh, &sol.nodal_values(), sol.system.rho(), target)
}

/// As [`estimate`], for arbitrary nodal values on all vertices.
pub fn estimate_nodal(mesh: &TetMesh, nodal: &[f64], rho: f64, target: &TargetField) -> Result<Estimate> {
    if nodal.len() != mesh.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.n_vertices(),
            got: nodal.len(),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    let tets = mesh.tets();
    let grads: Vec<[f64; 3]> = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let geo = ElementGeometry::new(&mesh.tet_points(t), t)?;
            Ok(geo.gradient(&tets[t].map(|v| nodal[v as usize])))
        })
        .collect::<Result<_>>()?;
    let neighbors = mesh.face_neighbors();
    let sqrt_rho = rho.sqrt();
    let integration = target.integration();
    let per_tet = (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let p = mesh.tet_points(t);
            let u = tets[t].map(|v| nodal[v as usize]);
            let mut res = 0.0;
            for_each_point(&p, mesh.volume(t), integration, |b, x, w| {
                let e = target.eval(x) - (u[0] * b[0] + u[1] * b[1] + u[2] * b[2] + u[3] * b[3]);
                res += w * e * e;
            });
            let alpha = (mesh.diameter(t) / sqrt_rho).min(1.0);
            let mut eta2 = alpha * alpha * res;
            for (i, nb) in neighbors[t].iter().enumerate() {
                let Some(nb) = nb else { continue };
                let f: Vec<Point> = (0..4).filter(|&j| j != i).map(|j| p[j]).collect();
                let nrm = cross(&sub(&f[1], &f[0]), &sub(&f[2], &f[0]));
                let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                let area = 0.5 * len;
                let (g0, g1) = (grads[t], grads[*nb as usize]);
                let jump = rho * ((g0[0] - g1[0]) * nrm[0] + (g0[1] - g1[1]) * nrm[1] + (g0[2] - g1[2]) * nrm[2]) / len;
                let h_f = dist(&f[0], &f[1]).max(dist(&f[1], &f[2])).max(dist(&f[0], &f[2]));
                let alpha_f = (h_f / sqrt_rho).min(1.0);
                eta2 += 0.5 * alpha_f / sqrt_rho * jump * jump * area;
            }
            // the degree-4 rule has a negative weight
            eta2.max(0.0).sqrt()
        })
        .collect();
    Ok(Estimate::from_indicators(per_tet))
}

/// Dörfler marking: the fewest tets, taken by decreasing indicator (ties by
/// index), whose squared indicators sum to at least `theta^2 eta^2`.
pub fn mark_dorfler(est: &Estimate, theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    let mut order: Vec<usize> = (0..est.per_tet.len()).collect();
    order.sort_by(|&a, &b| est.per_tet[b].total_cmp(&est.per_tet[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&t| est.per_tet[t].powi(2)).sum();
    let goal = theta * theta * total;
    let mut marked = Vec::new();
    let mut acc = 0.0;
    for &t in &order {
        if acc >= goal || est.per_tet[t] <= 0.0 {
            break;
        }
        acc += est.per_tet[t].powi(2);
        marked.push(t);
    }
    marked.sort_unstable();
    Ok(marked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{FemSystem, Smoothness};

    #[test]
    fn zero_target_zero_solution() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let t = TargetField::new("zero", Smoothness::SmoothH2, |_| 0.0);
        let e = estimate_nodal(&m, &vec![0.0; m.n_vertices()], 0.1, &t).unwrap();
        assert!(e.per_tet.iter().all(|&v| v == 0.0));
        assert_eq!(e.global, 0.0);
    }

    #[test]
    fn linear_field_matching_target() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let lin = |x: &Point| 0.3 + x[0] - x[1] + 2.0 * x[2];
        let t = TargetField::new("lin", Smoothness::SmoothH2, lin);
        let nodal: Vec<f64> = m.vertices().iter().map(lin).collect();
        let e = estimate_nodal(&m, &nodal, 1e-2, &t).unwrap();
        assert!(e.global < 1e-12, "{}", e.global);
    }

    #[test]
    fn global_is_l2_sum() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let t = TargetField::new("one", Smoothness::SmoothH2, |_| 1.0);
        let s = FemSystem::build(&m, 1e-1, &t).unwrap();
        let u = crate::linalg::cholesky_solve(&s.matrix().to_dense(), s.load()).unwrap();
        let e = estimate(&Solution::new(u, &s, &m).unwrap(), &t).unwrap();
        let sum: f64 = e.per_tet.iter().map(|v| v * v).sum();
        assert!((e.global.powi(2) - sum).abs() <= 1e-12 * sum);
        assert!(e.per_tet.iter().all(|&v| v >= 0.0));
    }

    fn est(v: &[f64]) -> Estimate {
        Estimate::from_indicators(v.to_vec())
    }

    #[test]
    fn dorfler_examples() {
        assert_eq!(mark_dorfler(&est(&[3.0, 0.0, 0.0, 0.0]), 0.5).unwrap(), vec![0]);
        assert_eq!(mark_dorfler(&est(&[2.0, 2.0, 1.0]), 0.8).unwrap(), vec![0, 1]);
        assert_eq!(mark_dorfler(&est(&[0.5, 0.0, 1.0, 0.25]), 1.0).unwrap(), vec![0, 2, 3]);
        assert!(mark_dorfler(&est(&[1.0]), 0.0).is_err());
        assert!(mark_dorfler(&est(&[1.0]), 1.5).is_err());
    }

    #[test]
    fn dorfler_ties_broken_by_index() {
        assert_eq!(mark_dorfler(&est(&[1.0, 1.0, 1.0, 1.0]), 0.5).unwrap(), vec![0]);
    }
}
