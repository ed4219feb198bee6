use rayon::prelude::*;

use super::element::ElementGeometry;
use super::quadrature::for_each_point;
use super::target::TargetField;
use crate::linalg::CsrMatrix;
use crate::mesh::TetMesh;
use crate::{Error, Result};

const ELEMENT_CHUNK: usize = 1 << 15;
const ROW_CHUNK: usize = 1 << 12;
/// Stiffness entries below this fraction of `sqrt(k_ii k_jj)` are roundoff
/// from couplings that vanish exactly (e.g. along Kuhn cell diagonals).
const STIFFNESS_DROP_TOL: f64 = 1e-12;

/// Numbering of the unknowns: vertex <-> dof.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    vertex_to_dof: Vec<Option<usize>>,
    dof_to_vertex: Vec<usize>,
}

impl DofMap {
    /// Interior vertices only (homogeneous Dirichlet data eliminated).
    pub fn interior(mesh: &TetMesh) -> Self {
        let (vertex_to_dof, dof_to_vertex) = mesh.dof_map();
        Self {
            vertex_to_dof,
            dof_to_vertex,
        }
    }

    /// Every vertex is a dof.
    pub fn all(mesh: &TetMesh) -> Self {
        Self {
            vertex_to_dof: (0..mesh.n_vertices()).map(Some).collect(),
            dof_to_vertex: (0..mesh.n_vertices()).collect(),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_to_dof.len()
    }

    #[inline]
    pub fn dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_to_dof[vertex]
    }

    #[inline]
    pub fn vertex(&self, dof: usize) -> usize {
        self.dof_to_vertex[dof]
    }

    pub fn dof_to_vertex(&self) -> &[usize] {
        &self.dof_to_vertex
    }

    /// Extends dof coefficients to all vertices, zero elsewhere.
    pub fn to_nodal(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_vertices()];
        for (d, &v) in self.dof_to_vertex.iter().enumerate() {
            u[v] = coefficients[d];
        }
        u
    }

    /// Restricts a nodal vector to the dofs.
    pub fn from_nodal(&self, nodal: &[f64]) -> Vec<f64> {
        self.dof_to_vertex.iter().map(|&v| nodal[v]).collect()
    }
}

/// Evaluates `compute` on every element in parallel chunks and feeds the
/// results to `scatter` in element order.
pub(crate) fn for_each_element<T: Send>(
    mesh: &TetMesh,
    compute: impl Fn(usize) -> Result<T> + Sync,
    mut scatter: impl FnMut(usize, T),
) -> Result<()> {
    let n = mesh.n_tets();
    let mut start = 0;
    while start < n {
        let end = (start + ELEMENT_CHUNK).min(n);
        let vals: Vec<T> = (start..end)
            .into_par_iter()
            .map(&compute)
            .collect::<Result<_>>()?;
        for (k, v) in vals.into_iter().enumerate() {
            scatter(start + k, v);
        }
        start = end;
    }
    Ok(())
}

/// Sparsity pattern of P1 couplings restricted to `dofs`.
fn pattern(mesh: &TetMesh, dofs: &DofMap) -> (Vec<usize>, Vec<usize>) {
    let (vptr, vtets) = mesh.vertex_tets();
    let tets = mesh.tets();
    let rows: Vec<usize> = (0..dofs.n_dofs()).collect();
    let chunks: Vec<(Vec<usize>, Vec<usize>)> = rows
        .par_chunks(ROW_CHUNK)
        .map(|rows| {
            let mut counts = Vec::with_capacity(rows.len());
            let mut cols = Vec::new();
            let mut buf = Vec::new();
            for &r in rows {
                let v = dofs.vertex(r);
                buf.clear();
                for &t in &vtets[vptr[v]..vptr[v + 1]] {
                    for &w in &tets[t as usize] {
                        if let Some(c) = dofs.dof(w as usize) {
                            buf.push(c);
                        }
                    }
                }
                buf.sort_unstable();
                buf.dedup();
                counts.push(buf.len());
                cols.extend_from_slice(&buf);
            }
            (counts, cols)
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(dofs.n_dofs() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for (counts, cols) in chunks {
        for c in counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        col_idx.extend(cols);
    }
    (row_ptr, col_idx)
}

/// Assembles `sum_T local(T)` over the dofs in `dofs`.
pub fn assemble_matrix(
    mesh: &TetMesh,
    dofs: &DofMap,
    local: impl Fn(&ElementGeometry) -> [[f64; 4]; 4] + Sync,
) -> Result<CsrMatrix> {
    let (row_ptr, col_idx) = pattern(mesh, dofs);
    let mut values = vec![0.0; col_idx.len()];
    let tets = mesh.tets();
    for_each_element(
        mesh,
        |t| Ok(local(&ElementGeometry::new(&mesh.tet_points(t), t)?)),
        |t, ke| {
            let ld = tets[t].map(|v| dofs.dof(v as usize));
            for a in 0..4 {
                let Some(r) = ld[a] else { continue };
                let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
                for b in 0..4 {
                    let Some(c) = ld[b] else { continue };
                    let pos = cols.binary_search(&c).expect("pattern covers element");
                    values[row_ptr[r] + pos] += ke[a][b];
                }
            }
        },
    )?;
    let n = dofs.n_dofs();
    Ok(CsrMatrix::from_raw(n, n, row_ptr, col_idx, values)?.assert_symmetric())
}

/// Stiffness matrix on interior dofs.
pub fn assemble_stiffness(mesh: &TetMesh) -> Result<CsrMatrix> {
    Ok(assemble_matrix(mesh, &DofMap::interior(mesh), |e| e.stiffness())?
        .drop_small(STIFFNESS_DROP_TOL))
}

/// Mass matrix on interior dofs.
pub fn assemble_mass(mesh: &TetMesh) -> Result<CsrMatrix> {
    assemble_matrix(mesh, &DofMap::interior(mesh), |e| e.mass())
}

/// Stiffness matrix over all vertices (before boundary elimination).
pub fn assemble_stiffness_full(mesh: &TetMesh) -> Result<CsrMatrix> {
    Ok(assemble_matrix(mesh, &DofMap::all(mesh), |e| e.stiffness())?
        .drop_small(STIFFNESS_DROP_TOL))
}

/// Mass matrix over all vertices (before boundary elimination).
pub fn assemble_mass_full(mesh: &TetMesh) -> Result<CsrMatrix> {
    assemble_matrix(mesh, &DofMap::all(mesh), |e| e.mass())
}

/// `f_i = int target * phi_i` over the dofs in `dofs`.
pub fn assemble_load_on(mesh: &TetMesh, dofs: &DofMap, target: &TargetField) -> Result<Vec<f64>> {
    let mut f = vec![0.0; dofs.n_dofs()];
    let tets = mesh.tets();
    let integration = target.integration();
    for_each_element(
        mesh,
        |t| {
            let p = mesh.tet_points(t);
            let vol = crate::mesh::tet_volume(&p);
            let mut fe = [0.0; 4];
            for_each_point(&p, vol, integration, |b, x, w| {
                let g = w * target.eval(x);
                for i in 0..4 {
                    fe[i] += g * b[i];
                }
            });
            Ok(fe)
        },
        |t, fe| {
            for (a, &v) in tets[t].iter().enumerate() {
                if let Some(d) = dofs.dof(v as usize) {
                    f[d] += fe[a];
                }
            }
        },
    )?;
    Ok(f)
}

/// Load vector on interior dofs.
pub fn assemble_load(mesh: &TetMesh, target: &TargetField) -> Result<Vec<f64>> {
    assemble_load_on(mesh, &DofMap::interior(mesh), target)
}

/// The discrete system `(rho K + M) u = f` on interior dofs.
#[derive(Debug, Clone)]
pub struct FemSystem {
    rho: f64,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    matrix: CsrMatrix,
    load: Vec<f64>,
    dofs: DofMap,
}

impl FemSystem {
    pub fn build(mesh: &TetMesh, rho: f64, target: &TargetField) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularisation parameter must be positive, got {rho}"
            )));
        }
        Self::build_unchecked(mesh, rho, target)
    }

    pub(crate) fn build_unchecked(mesh: &TetMesh, rho: f64, target: &TargetField) -> Result<Self> {
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_mass(mesh)?;
        let matrix = stiffness.add_scaled(rho, &mass, 1.0)?;
        let load = assemble_load(mesh, target)?;
        Ok(Self {
            rho,
            stiffness,
            mass,
            matrix,
            load,
            dofs: DofMap::interior(mesh),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `K`
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `M`
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// `A = rho K + M`
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Residual `f - A u`.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let au = self.matrix.spmv(u)?;
        Ok(self.load.iter().zip(au).map(|(f, a)| f - a).collect())
    }
}

/// Discrete solution: coefficients over the interior dofs of `system`.
#[derive(Debug, Clone)]
pub struct Solution<'a> {
    pub coefficients: Vec<f64>,
    pub system: &'a FemSystem,
    pub mesh: &'a TetMesh,
}

impl<'a> Solution<'a> {
    pub fn new(coefficients: Vec<f64>, system: &'a FemSystem, mesh: &'a TetMesh) -> Result<Self> {
        if coefficients.len() != system.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: system.n_dofs(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            coefficients,
            system,
            mesh,
        })
    }

    /// Values at every mesh vertex (zero on the boundary).
    pub fn nodal_values(&self) -> Vec<f64> {
        self.system.dofs().to_nodal(&self.coefficients)
    }
}
