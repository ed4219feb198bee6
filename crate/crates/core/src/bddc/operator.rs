use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::partition::{DofClass, Partition};
use crate::assembly::{ElementGeometry, FemSystem};
use crate::linalg::{
    pcg, Cholesky, CsrMatrix, DenseMatrix, LinearOperator, PcgOptions, PcgReport, Preconditioner,
};
use crate::mesh::TetMesh;
use crate::{Error, Result};

/// Pivots of the constraint Gram matrix below this fraction of its diagonal
/// are treated as linear dependence.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrimalKind {
    /// Point value at an interface dof.
    Corner(usize),
    /// Average over the non-corner dofs shared by two subdomains.
    Face(u32, u32),
}

#[derive(Debug, Clone)]
struct Subdomain {
    /// Global dofs interior to this subdomain.
    interior: Vec<usize>,
    /// Interface positions (in the global interface numbering) of its
    /// boundary dofs.
    gamma: Vec<usize>,
    a_ii: Cholesky,
    a_ig: CsrMatrix,
    a_gi: CsrMatrix,
    s: DenseMatrix,
    s_chol: Cholesky,
    weights: Vec<f64>,
    /// Global primal indices of the local constraints.
    primal: Vec<usize>,
    /// Local constraint matrix, one row per entry of `primal`.
    c: DenseMatrix,
    /// `(S^{-1} C^T)^T`.
    yt: DenseMatrix,
    g_chol: Cholesky,
    /// `Phi^T`: local coarse basis, one row per local primal constraint.
    phi_t: DenseMatrix,
}

/// How the coarse matrix is formed from the coarse basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarseOperator {
    /// `sum_i Phi^i^T S^i Phi^i` over the continuous primal unknowns.
    #[default]
    PartiallyAssembled,
    /// `Phi^T S_C Phi` with the assembled, scaled basis.
    Galerkin,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BddcOptions {
    pub coarse: CoarseOperator,
}

/// Two-level BDDC preconditioner for the interface Schur complement of a
/// [`FemSystem`], together with the Schur complement itself.
#[derive(Debug, Clone)]
pub struct BddcOperator {
    partition: Partition,
    n_dofs: usize,
    /// Global dof of each interface position.
    interface: Vec<usize>,
    a_cc: CsrMatrix,
    subs: Vec<Subdomain>,
    primal: Vec<PrimalKind>,
    coarse_operator: CoarseOperator,
    /// Assembled, scaled coarse basis (interface x primal).
    phi: DenseMatrix,
    coarse: Cholesky,
}

fn dense_rows(a: &CsrMatrix) -> DenseMatrix {
    a.to_dense()
}

/// `A_GG - A_GI A_II^{-1} A_IG` from the factor of `A_II` and the dense
/// block `A_GI`, via `X = L^{-1} A_IG`.
pub(crate) fn schur_from_blocks(a_ii: &Cholesky, a_gi: DenseMatrix, a_gg: DenseMatrix) -> DenseMatrix {
    let mut xt = a_gi;
    let ng = xt.nrows();
    for r in 0..ng {
        a_ii.forward_in_place(xt.row_mut(r));
    }
    let mut s = a_gg;
    for r in 0..ng {
        for c in 0..=r {
            let v: f64 = xt.row(r).iter().zip(xt.row(c)).map(|(x, y)| x * y).sum();
            s[(r, c)] -= v;
        }
    }
    for r in 0..ng {
        for c in (r + 1)..ng {
            s[(r, c)] = s[(c, r)];
        }
    }
    s
}

/// Minimal-energy basis satisfying `C Phi = I`: returns `Y^T = (S^{-1} C^T)^T`,
/// the factor of `G = C S^{-1} C^T` and `Phi^T = G^{-1} Y^T`.
pub(crate) fn constrained_basis(
    s_chol: &Cholesky,
    c: &DenseMatrix,
    subdomain: usize,
) -> Result<(DenseMatrix, Cholesky, DenseMatrix)> {
    let np = c.nrows();
    let ng = c.ncols();
    let mut yt = c.clone();
    for r in 0..np {
        s_chol.solve_in_place(yt.row_mut(r));
    }
    let mut g = DenseMatrix::zeros(np, np);
    for r in 0..np {
        for q in 0..np {
            g[(r, q)] = c.row(r).iter().zip(yt.row(q)).map(|(x, y)| x * y).sum();
        }
    }
    for r in 0..np {
        for q in 0..r {
            let v = 0.5 * (g[(r, q)] + g[(q, r)]);
            g[(r, q)] = v;
            g[(q, r)] = v;
        }
    }
    let g_chol = Cholesky::factor(&g).map_err(|_| Error::RankDeficientConstraints { subdomain })?;
    if (0..np).any(|r| g_chol.l(r, r).powi(2) < RANK_TOL * g[(r, r)]) {
        return Err(Error::RankDeficientConstraints { subdomain });
    }
    let mut phi_t = DenseMatrix::zeros(np, ng);
    let mut col = vec![0.0; np];
    for j in 0..ng {
        for r in 0..np {
            col[r] = yt[(r, j)];
        }
        g_chol.solve_in_place(&mut col);
        for r in 0..np {
            phi_t[(r, j)] = col[r];
        }
    }
    Ok((yt, g_chol, phi_t))
}

/// `sum_i R_Pi^i^T G_i^{-1} R_Pi^i`, since `Phi^i^T S^i Phi^i = G_i^{-1}`.
fn partially_assembled_coarse(subs: &[Subdomain], np: usize) -> DenseMatrix {
    let mut coarse = DenseMatrix::zeros(np, np);
    for sd in subs {
        let k = sd.primal.len();
        let mut e = vec![0.0; k];
        for q in 0..k {
            e.fill(0.0);
            e[q] = 1.0;
            sd.g_chol.solve_in_place(&mut e);
            for (r, &v) in e.iter().enumerate() {
                coarse[(sd.primal[r], sd.primal[q])] += v;
            }
        }
    }
    coarse
}

/// `Phi^T S_C Phi` for the assembled scaled basis, accumulated subdomain by
/// subdomain.
fn galerkin_coarse(subs: &[Subdomain], phi: &DenseMatrix, np: usize) -> DenseMatrix {
    let contributions: Vec<(Vec<usize>, DenseMatrix)> = subs
        .par_iter()
        .map(|sd| {
            let ng = sd.gamma.len();
            let cols: Vec<usize> = (0..np)
                .filter(|&k| sd.gamma.iter().any(|&g| phi[(g, k)] != 0.0))
                .collect();
            let nk = cols.len();
            let mut pl = DenseMatrix::zeros(nk, ng);
            for (q, &k) in cols.iter().enumerate() {
                for (j, &g) in sd.gamma.iter().enumerate() {
                    pl[(q, j)] = phi[(g, k)];
                }
            }
            let mut sp = DenseMatrix::zeros(nk, ng);
            for q in 0..nk {
                let v = sd.s.matvec(pl.row(q));
                sp.row_mut(q).copy_from_slice(&v);
            }
            let mut out = DenseMatrix::zeros(nk, nk);
            for a in 0..nk {
                for b in 0..nk {
                    out[(a, b)] = pl.row(a).iter().zip(sp.row(b)).map(|(x, y)| x * y).sum();
                }
            }
            (cols, out)
        })
        .collect();
    let mut coarse = DenseMatrix::zeros(np, np);
    for (cols, m) in &contributions {
        for (a, &ka) in cols.iter().enumerate() {
            for (b, &kb) in cols.iter().enumerate() {
                coarse[(ka, kb)] += m[(a, b)];
            }
        }
    }
    coarse
}

impl BddcOperator {
    pub fn build(mesh: &TetMesh, system: &FemSystem, partition: Partition) -> Result<Self> {
        Self::build_with(mesh, system, partition, &BddcOptions::default())
    }

    pub fn build_with(
        mesh: &TetMesh,
        system: &FemSystem,
        partition: Partition,
        opts: &BddcOptions,
    ) -> Result<Self> {
        let a = system.matrix();
        let dofs = system.dofs();
        let n = a.nrows();
        if partition.dof_class().len() != n || partition.owner().len() != mesh.n_tets() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: partition.dof_class().len(),
            });
        }
        let p = partition.p();
        let classes = partition.dof_class();
        let sets = partition.dof_subdomains();

        let interface: Vec<usize> = (0..n).filter(|&d| classes[d] == DofClass::Interface).collect();
        let mut c_pos = vec![usize::MAX; n];
        for (k, &d) in interface.iter().enumerate() {
            c_pos[d] = k;
        }

        // dofs sharing a tet with a Dirichlet vertex
        let mut near_boundary = vec![false; n];
        for tet in mesh.tets() {
            if tet.iter().any(|&v| mesh.boundary_vertex()[v as usize]) {
                for &v in tet {
                    if let Some(d) = dofs.dof(v as usize) {
                        near_boundary[d] = true;
                    }
                }
            }
        }

        let is_corner =
            |d: usize| sets[d].len() >= 3 || (sets[d].len() == 2 && near_boundary[d]);
        let mut primal = Vec::new();
        for &d in &interface {
            if is_corner(d) {
                primal.push(PrimalKind::Corner(d));
            }
        }
        let mut face_dofs: std::collections::BTreeMap<(u32, u32), Vec<usize>> = Default::default();
        for &d in &interface {
            if !is_corner(d) {
                face_dofs.entry((sets[d][0], sets[d][1])).or_default().push(d);
            }
        }
        for &(i, j) in face_dofs.keys() {
            primal.push(PrimalKind::Face(i, j));
        }

        let mut interior_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut gamma_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        for d in 0..n {
            match classes[d] {
                DofClass::Interior(i) => interior_of[i as usize].push(d),
                DofClass::Interface => {
                    for &i in &sets[d] {
                        gamma_of[i as usize].push(d);
                    }
                }
            }
        }
        let mut tets_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        for (t, &o) in partition.owner().iter().enumerate() {
            tets_of[o as usize].push(t);
        }
        let mut primal_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        for (k, pk) in primal.iter().enumerate() {
            match *pk {
                PrimalKind::Corner(d) => {
                    for &i in &sets[d] {
                        primal_of[i as usize].push(k);
                    }
                }
                PrimalKind::Face(i, j) => {
                    primal_of[i as usize].push(k);
                    primal_of[j as usize].push(k);
                }
            }
        }

        let rho = system.rho();
        let subs: Vec<Subdomain> = (0..p)
            .into_par_iter()
            .map(|i| {
                let interior = interior_of[i].clone();
                let gamma_dofs = &gamma_of[i];
                let a_ii = Cholesky::factor(&a.submatrix(&interior, &interior).to_dense())?;
                let a_ig = a.submatrix(&interior, gamma_dofs);
                let a_gi = a_ig.transpose();

                // local Neumann block on the interface
                let ng = gamma_dofs.len();
                let mut a_gg = DenseMatrix::zeros(ng, ng);
                let pos = |v: usize| -> Option<usize> {
                    let d = dofs.dof(v)?;
                    gamma_dofs.binary_search(&d).ok()
                };
                for &t in &tets_of[i] {
                    let tet = mesh.tets()[t];
                    let idx = tet.map(|v| pos(v as usize));
                    if idx.iter().all(Option::is_none) {
                        continue;
                    }
                    let geo = ElementGeometry::new(&mesh.tet_points(t), t)?;
                    let (k, m) = (geo.stiffness(), geo.mass());
                    for r in 0..4 {
                        let Some(gr) = idx[r] else { continue };
                        for c in 0..4 {
                            if let Some(gc) = idx[c] {
                                a_gg[(gr, gc)] += rho * k[r][c] + m[r][c];
                            }
                        }
                    }
                }

                let s = schur_from_blocks(&a_ii, dense_rows(&a_gi), a_gg);
                let s_chol = Cholesky::factor(&s)?;

                let weights: Vec<f64> = gamma_dofs.iter().map(|&d| 1.0 / sets[d].len() as f64).collect();

                let my_primal = primal_of[i].clone();
                let mut c = DenseMatrix::zeros(my_primal.len(), ng);
                for (r, &k) in my_primal.iter().enumerate() {
                    match primal[k] {
                        PrimalKind::Corner(d) => {
                            let j = gamma_dofs.binary_search(&d).expect("corner on subdomain interface");
                            c[(r, j)] = 1.0;
                        }
                        PrimalKind::Face(a, b) => {
                            let fd = &face_dofs[&(a, b)];
                            let w = 1.0 / fd.len() as f64;
                            for d in fd {
                                let j = gamma_dofs.binary_search(d).expect("face dof on subdomain interface");
                                c[(r, j)] = w;
                            }
                        }
                    }
                }
                let (yt, g_chol, phi_t) = constrained_basis(&s_chol, &c, i)?;
                Ok(Subdomain {
                    interior,
                    gamma: gamma_dofs.iter().map(|&d| c_pos[d]).collect(),
                    a_ii,
                    a_ig,
                    a_gi,
                    s,
                    s_chol,
                    weights,
                    primal: my_primal,
                    c,
                    yt,
                    g_chol,
                    phi_t,
                })
            })
            .collect::<Result<_>>()?;

        let nc = interface.len();
        let np = primal.len();
        let mut phi = DenseMatrix::zeros(nc, np);
        for sd in &subs {
            for (r, &k) in sd.primal.iter().enumerate() {
                for (j, &g) in sd.gamma.iter().enumerate() {
                    phi[(g, k)] += sd.weights[j] * sd.phi_t[(r, j)];
                }
            }
        }
        let mut coarse = match opts.coarse {
            CoarseOperator::PartiallyAssembled => partially_assembled_coarse(&subs, np),
            CoarseOperator::Galerkin => galerkin_coarse(&subs, &phi, np),
        };
        for a in 0..np {
            for b in 0..a {
                let v = 0.5 * (coarse[(a, b)] + coarse[(b, a)]);
                coarse[(a, b)] = v;
                coarse[(b, a)] = v;
            }
        }
        let coarse = Cholesky::factor(&coarse)?;
        let a_cc = a.submatrix(&interface, &interface).assert_symmetric();
        Ok(Self {
            partition,
            n_dofs: n,
            interface,
            a_cc,
            subs,
            primal,
            coarse_operator: opts.coarse,
            phi,
            coarse,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n_interface(&self) -> usize {
        self.interface.len()
    }

    /// Global dof of each interface unknown.
    pub fn interface_dofs(&self) -> &[usize] {
        &self.interface
    }

    pub fn coarse_operator(&self) -> CoarseOperator {
        self.coarse_operator
    }

    /// Global primal index of each local constraint of subdomain `i`.
    pub fn local_primal(&self, i: usize) -> &[usize] {
        &self.subs[i].primal
    }

    /// The factored coarse matrix, reconstructed.
    pub fn coarse_matrix(&self) -> DenseMatrix {
        self.coarse.reconstruct()
    }

    pub fn primal(&self) -> &[PrimalKind] {
        &self.primal
    }

    pub fn n_subdomains(&self) -> usize {
        self.subs.len()
    }

    /// Local Schur complement `S^i` on the subdomain interface.
    pub fn local_schur(&self, i: usize) -> &DenseMatrix {
        &self.subs[i].s
    }

    /// Local constraint matrix `C^i`.
    pub fn local_constraints(&self, i: usize) -> &DenseMatrix {
        &self.subs[i].c
    }

    /// Local coarse basis `Phi^i` (interface dofs x local primal constraints).
    pub fn local_coarse_basis(&self, i: usize) -> DenseMatrix {
        self.subs[i].phi_t.transpose()
    }

    /// Interface positions and multiplicity weights of subdomain `i`.
    pub fn local_interface(&self, i: usize) -> (&[usize], &[f64]) {
        (&self.subs[i].gamma, &self.subs[i].weights)
    }

    /// Assembled scaled coarse basis.
    pub fn coarse_basis(&self) -> &DenseMatrix {
        &self.phi
    }

    /// Largest deviation of the summed interface weights from one.
    pub fn partition_of_unity_defect(&self) -> f64 {
        let mut s = vec![0.0; self.interface.len()];
        for sd in &self.subs {
            for (&g, &w) in sd.gamma.iter().zip(&sd.weights) {
                s[g] += w;
            }
        }
        s.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()))
    }

    /// Largest entry of `C^i Phi^i - I` over all subdomains.
    pub fn constraint_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for sd in &self.subs {
            let np = sd.primal.len();
            for r in 0..np {
                for q in 0..np {
                    let v: f64 = sd.c.row(r).iter().zip(sd.phi_t.row(q)).map(|(x, y)| x * y).sum();
                    let e = if r == q { v - 1.0 } else { v };
                    worst = worst.max(e.abs());
                }
            }
        }
        worst
    }

    fn local_schur_terms(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.subs
            .par_iter()
            .map(|sd| {
                let xg: Vec<f64> = sd.gamma.iter().map(|&g| x[g]).collect();
                let mut t = sd.a_ig.spmv(&xg).expect("block dimension");
                sd.a_ii.solve_in_place(&mut t);
                sd.a_gi.spmv(&t).expect("block dimension")
            })
            .collect()
    }

    /// `S_C x = A_CC x - sum_i A_CI^i (A_II^i)^{-1} A_IC^i x`.
    pub fn schur_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.a_cc.spmv(x)?;
        for (sd, t) in self.subs.iter().zip(self.local_schur_terms(x)) {
            for (&g, v) in sd.gamma.iter().zip(t) {
                y[g] -= v;
            }
        }
        Ok(y)
    }

    /// `g = f_C - sum_i A_CI^i (A_II^i)^{-1} f_I^i`.
    pub fn reduce_rhs(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs,
                got: f.len(),
            });
        }
        let mut g: Vec<f64> = self.interface.iter().map(|&d| f[d]).collect();
        let terms: Vec<Vec<f64>> = self
            .subs
            .par_iter()
            .map(|sd| {
                let mut t: Vec<f64> = sd.interior.iter().map(|&d| f[d]).collect();
                sd.a_ii.solve_in_place(&mut t);
                sd.a_gi.spmv(&t).expect("block dimension")
            })
            .collect();
        for (sd, t) in self.subs.iter().zip(terms) {
            for (&c, v) in sd.gamma.iter().zip(t) {
                g[c] -= v;
            }
        }
        Ok(g)
    }

    /// Full solution from interface values: `u_I = A_II^{-1}(f_I - A_IC u_C)`.
    pub fn expand_solution(&self, u_c: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        if u_c.len() != self.interface.len() {
            return Err(Error::DimensionMismatch {
                expected: self.interface.len(),
                got: u_c.len(),
            });
        }
        if f.len() != self.n_dofs {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs,
                got: f.len(),
            });
        }
        let mut u = vec![0.0; self.n_dofs];
        for (&d, &v) in self.interface.iter().zip(u_c) {
            u[d] = v;
        }
        let locals: Vec<Vec<f64>> = self
            .subs
            .par_iter()
            .map(|sd| {
                let ug: Vec<f64> = sd.gamma.iter().map(|&g| u_c[g]).collect();
                let ag = sd.a_ig.spmv(&ug).expect("block dimension");
                let mut t: Vec<f64> = sd.interior.iter().zip(ag).map(|(&d, a)| f[d] - a).collect();
                sd.a_ii.solve_in_place(&mut t);
                t
            })
            .collect();
        for (sd, t) in self.subs.iter().zip(locals) {
            for (&d, v) in sd.interior.iter().zip(t) {
                u[d] = v;
            }
        }
        Ok(u)
    }

    /// Local problem with vanishing primal constraints:
    /// `[S C^T; C 0] [w; l] = [r; 0]`.
    fn saddle_solve(sd: &Subdomain, r: &[f64]) -> Vec<f64> {
        let np = sd.primal.len();
        let mut w = r.to_vec();
        sd.s_chol.solve_in_place(&mut w);
        if np > 0 {
            let mut t: Vec<f64> = (0..np)
                .map(|q| sd.yt.row(q).iter().zip(r).map(|(a, b)| a * b).sum())
                .collect();
            sd.g_chol.solve_in_place(&mut t);
            for q in 0..np {
                for (wj, y) in w.iter_mut().zip(sd.yt.row(q)) {
                    *wj -= t[q] * y;
                }
            }
        }
        w
    }

    /// Coarse correction `Phi S_0^{-1} Phi^T r` with the assembled scaled
    /// basis and the configured coarse matrix `S_0`.
    pub fn coarse_correction(&self, r: &[f64]) -> Vec<f64> {
        let np = self.primal.len();
        let mut rc = vec![0.0; np];
        for (g, &rg) in r.iter().enumerate() {
            if rg != 0.0 {
                for (k, v) in self.phi.row(g).iter().enumerate() {
                    rc[k] += v * rg;
                }
            }
        }
        self.coarse.solve_in_place(&mut rc);
        self.phi.matvec(&rc)
    }

    /// Preconditioner action `z = P^{-1} r` on the interface space.
    pub fn bddc_apply(&self, r: &[f64]) -> Vec<f64> {
        let locals: Vec<Vec<f64>> = self
            .subs
            .par_iter()
            .map(|sd| {
                let rl: Vec<f64> = sd.gamma.iter().zip(&sd.weights).map(|(&g, w)| w * r[g]).collect();
                Self::saddle_solve(sd, &rl)
            })
            .collect();
        let mut z = self.coarse_correction(r);
        for (sd, w) in self.subs.iter().zip(locals) {
            for ((&g, &d), v) in sd.gamma.iter().zip(&sd.weights).zip(w) {
                z[g] += d * v;
            }
        }
        z
    }

    /// The interface Schur complement as a linear operator.
    pub fn schur(&self) -> SchurComplement<'_> {
        SchurComplement(self)
    }

    /// Solves the full system: reduce to the interface, run PCG with the
    /// BDDC preconditioner, expand.
    pub fn solve(&self, f: &[f64], opts: &PcgOptions) -> Result<(Vec<f64>, PcgReport)> {
        let g = self.reduce_rhs(f)?;
        let (u_c, report) = pcg(&self.schur(), &g, self, opts)?;
        Ok((self.expand_solution(&u_c, f)?, report))
    }
}

impl Preconditioner for BddcOperator {
    fn dim(&self) -> usize {
        self.interface.len()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.bddc_apply(r));
    }
}

pub struct SchurComplement<'a>(&'a BddcOperator);

impl LinearOperator for SchurComplement<'_> {
    fn dim(&self) -> usize {
        self.0.interface.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.0.schur_apply(x).expect("interface dimension"));
    }
}

#[cfg(test)]
#[path = "tests.rs"]
mod tests;
