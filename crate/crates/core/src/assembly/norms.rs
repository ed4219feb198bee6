//! Error norms of P1 functions against exact fields and targets.

use rayon::prelude::*;

use super::element::ElementGeometry;
use super::quadrature::{for_each_point, Bary, Integration};
use super::system::{for_each_element, DofMap, Solution};
use super::target::TargetField;
use crate::amg::{AmgHierarchy, AmgOptions};
use crate::linalg::{pcg, vector::dot, Cholesky, CsrMatrix, PcgOptions};
use crate::mesh::{Point, TetMesh};
use crate::{Error, Result};

/// Systems up to this size are solved densely in [`hminus1_norm`].
const DENSE_LIMIT: usize = 1500;

#[inline]
fn local_values(mesh: &TetMesh, nodal: &[f64], t: usize) -> [f64; 4] {
    mesh.tets()[t].map(|v| nodal[v as usize])
}

#[inline]
fn interpolate(u: &[f64; 4], b: &Bary) -> f64 {
    u[0] * b[0] + u[1] * b[1] + u[2] * b[2] + u[3] * b[3]
}

/// Sum over elements of `element(t)`, reduced in element order.
fn sum_elements(mesh: &TetMesh, element: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..mesh.n_tets())
        .collect::<Vec<_>>()
        .par_chunks(4096)
        .map(|ts| ts.iter().map(|&t| element(t)).sum())
        .collect();
    partial.iter().sum()
}

/// Per-element `int_T (u_h - exact)^2` for nodal values `nodal`.
pub fn l2_error_squared_per_element(
    mesh: &TetMesh,
    nodal: &[f64],
    exact: &(dyn Fn(&Point) -> f64 + Sync),
    integration: Integration<'_>,
) -> Vec<f64> {
    (0..mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let p = mesh.tet_points(t);
            let u = local_values(mesh, nodal, t);
            let mut s = 0.0;
            for_each_point(&p, mesh.volume(t), integration, |b, x, w| {
                let e = interpolate(&u, b) - exact(x);
                s += w * e * e;
            });
            s
        })
        .collect()
}

/// `||u_h - exact||_{L2}` for a nodal P1 function.
pub fn l2_error_nodal(
    mesh: &TetMesh,
    nodal: &[f64],
    exact: &(dyn Fn(&Point) -> f64 + Sync),
    integration: Integration<'_>,
) -> f64 {
    sum_elements(mesh, |t| {
        let p = mesh.tet_points(t);
        let u = local_values(mesh, nodal, t);
        let mut s = 0.0;
        for_each_point(&p, mesh.volume(t), integration, |b, x, w| {
            let e = interpolate(&u, b) - exact(x);
            s += w * e * e;
        });
        s
    })
    .sqrt()
}

/// `||grad(u_h - exact)||_{L2}` for a nodal P1 function.
pub fn h1_semi_error_nodal(
    mesh: &TetMesh,
    nodal: &[f64],
    exact_grad: &(dyn Fn(&Point) -> [f64; 3] + Sync),
) -> Result<f64> {
    let bad = std::sync::Mutex::new(None);
    let s = sum_elements(mesh, |t| {
        let p = mesh.tet_points(t);
        let geo = match ElementGeometry::new(&p, t) {
            Ok(g) => g,
            Err(e) => {
                *bad.lock().unwrap() = Some(e);
                return 0.0;
            }
        };
        let g = geo.gradient(&local_values(mesh, nodal, t));
        let mut s = 0.0;
        for_each_point(&p, geo.volume, Integration::Keast, |_, x, w| {
            let ge = exact_grad(x);
            let d = [g[0] - ge[0], g[1] - ge[1], g[2] - ge[2]];
            s += w * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        });
        s
    });
    match bad.into_inner().unwrap() {
        Some(e) => Err(e),
        None => Ok(s.sqrt()),
    }
}

/// `||u - u_h||_{L2}` with the degree-4 rule.
pub fn l2_error(sol: &Solution<'_>, exact: &(dyn Fn(&Point) -> f64 + Sync)) -> f64 {
    l2_error_nodal(sol.mesh, &sol.nodal_values(), exact, Integration::Keast)
}

/// `||grad(u - u_h)||_{L2}` with the degree-4 rule.
pub fn h1_semi_error(sol: &Solution<'_>, exact_grad: &(dyn Fn(&Point) -> [f64; 3] + Sync)) -> Result<f64> {
    h1_semi_error_nodal(sol.mesh, &sol.nodal_values(), exact_grad)
}

/// `||target - u_h||_{L2}^2`, integrated with the target's rule.
pub fn target_l2_error_squared(sol: &Solution<'_>, target: &TargetField) -> f64 {
    let eval = |x: &Point| target.eval(x);
    l2_error_nodal(sol.mesh, &sol.nodal_values(), &eval, target.integration()).powi(2)
}

/// Discrete dual norm `sqrt(r' K^{-1} r)` for a load vector `r` over the
/// interior dofs and the interior stiffness matrix `K`.
pub fn hminus1_norm(stiffness: &CsrMatrix, r: &[f64]) -> Result<f64> {
    if r.len() != stiffness.nrows() {
        return Err(Error::DimensionMismatch {
            expected: stiffness.nrows(),
            got: r.len(),
        });
    }
    if r.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let w = if r.len() <= DENSE_LIMIT {
        Cholesky::factor(&stiffness.to_dense())?.solve(r)
    } else {
        let amg = AmgHierarchy::build(stiffness, &AmgOptions::default())?;
        let opts = PcgOptions {
            tol: 1e-11,
            max_iter: 1000,
        };
        let (w, rep) = pcg(stiffness, r, &amg, &opts)?;
        if !rep.converged {
            return Err(Error::InvalidArgument(
                "stiffness solve for the dual norm did not converge".into(),
            ));
        }
        w
    };
    Ok(dot(r, &w).max(0.0).sqrt())
}

/// `r_i = int e phi_i` over interior dofs for a field given per element by
/// `field(t, bary, x)`.
pub fn dual_load(
    mesh: &TetMesh,
    dofs: &DofMap,
    field: &(dyn Fn(usize, &Bary, &Point) -> f64 + Sync),
    integration: Integration<'_>,
) -> Result<Vec<f64>> {
    let mut r = vec![0.0; dofs.n_dofs()];
    let tets = mesh.tets();
    for_each_element(
        mesh,
        |t| {
            let p = mesh.tet_points(t);
            let mut re = [0.0; 4];
            for_each_point(&p, mesh.volume(t), integration, |b, x, w| {
                let g = w * field(t, b, x);
                for i in 0..4 {
                    re[i] += g * b[i];
                }
            });
            Ok(re)
        },
        |t, re| {
            for (a, &v) in tets[t].iter().enumerate() {
                if let Some(d) = dofs.dof(v as usize) {
                    r[d] += re[a];
                }
            }
        },
    )?;
    Ok(r)
}

/// Discrete `H^{-1}` norm of a field given per element.
pub fn hminus1_error(
    mesh: &TetMesh,
    field: &(dyn Fn(usize, &Bary, &Point) -> f64 + Sync),
    integration: Integration<'_>,
) -> Result<f64> {
    let dofs = DofMap::interior(mesh);
    let r = dual_load(mesh, &dofs, field, integration)?;
    let k = super::system::assemble_stiffness(mesh)?;
    hminus1_norm(&k, &r)
}

/// `||target - u_h||_{H^{-1}}^2`, reusing the system's stiffness matrix.
pub fn target_hminus1_error_squared(sol: &Solution<'_>, target: &TargetField) -> Result<f64> {
    let nodal = sol.nodal_values();
    let mesh = sol.mesh;
    let field = |t: usize, b: &Bary, x: &Point| target.eval(x) - interpolate(&local_values(mesh, &nodal, t), b);
    let r = dual_load(mesh, sol.system.dofs(), &field, target.integration())?;
    Ok(hminus1_norm(sol.system.stiffness(), &r)?.powi(2))
}

/// Nodal control `z = (target - u_h) / rho`, with `u_h = 0` on the boundary.
pub fn recover_control(sol: &Solution<'_>, target: &TargetField) -> Vec<f64> {
    let rho = sol.system.rho();
    sol.nodal_values()
        .iter()
        .zip(sol.mesh.vertices())
        .map(|(u, x)| (target.eval(x) - u) / rho)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{FemSystem, Smoothness};

    #[test]
    fn interpolant_has_zero_error() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let lin = |x: &Point| x[0] + 2.0 * x[1] - x[2];
        let nodal: Vec<f64> = m.vertices().iter().map(lin).collect();
        assert!(l2_error_nodal(&m, &nodal, &lin, Integration::Keast) < 1e-13);
        let g = |_: &Point| [1.0, 2.0, -1.0];
        assert!(h1_semi_error_nodal(&m, &nodal, &g).unwrap() < 1e-13);
    }

    #[test]
    fn zero_field_has_zero_dual_norm() {
        let m = TetMesh::build_structured_cube(4).unwrap();
        let f = |_: usize, _: &Bary, _: &Point| 0.0;
        assert_eq!(hminus1_error(&m, &f, Integration::Keast).unwrap(), 0.0);
    }

    #[test]
    fn control_vanishes_when_target_matches() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let t = TargetField::new("zero", Smoothness::SmoothH2, |_| 0.0);
        let s = FemSystem::build(&m, 0.5, &t).unwrap();
        let sol = Solution::new(vec![0.0; s.n_dofs()], &s, &m).unwrap();
        assert!(recover_control(&sol, &t).iter().all(|&z| z == 0.0));
    }
}
