//! Conforming tetrahedral meshes of the unit cube.
//!
//! Meshes start from a Kuhn (Freudenthal) subdivision of a uniform cell grid
//! and are refined by Maubach's tagged newest-vertex bisection. Every
//! tetrahedron keeps two vertex orderings: a positively oriented one used by
//! assembly, and the tagged ordering that encodes its refinement edge.

mod bisect;
pub(crate) mod geometry;
pub mod vtk;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use geometry::{dihedral_angles, tet_volume};

use crate::{Error, Result};

pub type Point = [f64; 3];

/// Local edges of a tetrahedron, in the order used by [`TetMesh::refinement_edge`].
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

const BOUNDARY_TOL: f64 = 1e-14;

pub(crate) fn on_boundary(p: &Point) -> bool {
    p.iter()
        .any(|&c| c.abs() <= BOUNDARY_TOL || (c - 1.0).abs() <= BOUNDARY_TOL)
}

#[inline]
pub(crate) fn edge_key(a: u32, b: u32) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    ((lo as u64) << 32) | hi as u64
}

/// Multiplicative hasher for edge keys.
#[derive(Default, Clone, Copy)]
pub(crate) struct EdgeHasher(u64);

impl std::hash::Hasher for EdgeHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(8) ^ b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    fn write_u64(&mut self, v: u64) {
        let mut z = v.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        self.0 = z ^ (z >> 31);
    }
}

pub(crate) type EdgeMap = HashMap<u64, u32, std::hash::BuildHasherDefault<EdgeHasher>>;

/// Summary counts and mesh sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_tets: usize,
    pub n_interior_dofs: usize,
    pub h_max: f64,
    pub h_min: f64,
}

/// Conforming tetrahedral mesh of the unit cube. Immutable; refinement
/// returns a new mesh.
#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Point>,
    /// Positively oriented vertex tuples.
    tets: Vec<[u32; 4]>,
    /// Tagged ordering: the refinement edge is `(v[0], v[tag])`.
    tagged: Vec<[u32; 4]>,
    tags: Vec<u8>,
    generation: Vec<u16>,
    boundary: Vec<bool>,
    /// Every edge ever bisected, mapped to its midpoint.
    midpoints: EdgeMap,
    structured_n: Option<usize>,
}

impl TetMesh {
    /// Uniform `n x n x n` cell grid, each cell split into the six Kuhn
    /// tetrahedra sharing its main diagonal.
    pub fn build_structured_cube(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("cells per axis must be >= 1".into()));
        }
        let m = n + 1;
        if m * m * m > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("n = {n} is too large")));
        }
        let vid = |i: usize, j: usize, k: usize| (i + m * (j + m * k)) as u32;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(m * m * m);
        for k in 0..m {
            for j in 0..m {
                for i in 0..m {
                    let c = |t: usize| if t == n { 1.0 } else { t as f64 * h };
                    vertices.push([c(i), c(j), c(k)]);
                }
            }
        }
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut tagged = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut t = [vid(c[0], c[1], c[2]); 4];
                        for (s, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            t[s + 1] = vid(c[0], c[1], c[2]);
                        }
                        tagged.push(t);
                    }
                }
            }
        }
        let ntets = tagged.len();
        let boundary = vertices.iter().map(on_boundary).collect();
        let mut mesh = Self {
            vertices,
            tets: Vec::new(),
            tagged,
            tags: vec![3; ntets],
            generation: vec![0; ntets],
            boundary,
            midpoints: EdgeMap::default(),
            structured_n: Some(n),
        };
        mesh.orient()?;
        Ok(mesh)
    }

    /// Rebuilds the positively oriented tuples from the tagged ordering.
    fn orient(&mut self) -> Result<()> {
        let mut tets = Vec::with_capacity(self.tagged.len());
        for (t, tv) in self.tagged.iter().enumerate() {
            let p = tv.map(|v| self.vertices[v as usize]);
            let vol = tet_volume(&p);
            if vol.abs() < 1e-300 {
                return Err(Error::DegenerateElement { tet: t, volume: vol });
            }
            tets.push(if vol > 0.0 {
                *tv
            } else {
                [tv[0], tv[1], tv[3], tv[2]]
            });
        }
        self.tets = tets;
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn boundary_vertex(&self) -> &[bool] {
        &self.boundary
    }

    pub fn generation(&self) -> &[u16] {
        &self.generation
    }

    /// Cells per axis when the mesh is an unrefined structured cube.
    pub fn structured_n(&self) -> Option<usize> {
        self.structured_n
    }

    pub fn tet_points(&self, t: usize) -> [Point; 4] {
        self.tets[t].map(|v| self.vertices[v as usize])
    }

    pub fn volume(&self, t: usize) -> f64 {
        tet_volume(&self.tet_points(t))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.volume(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.tet_points(t);
        let mut c = [0.0; 3];
        for q in &p {
            for d in 0..3 {
                c[d] += 0.25 * q[d];
            }
        }
        c
    }

    /// Longest edge of tetrahedron `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        LOCAL_EDGES
            .iter()
            .map(|&(a, b)| geometry::dist(&p[a], &p[b]))
            .fold(0.0, f64::max)
    }

    /// Index into [`LOCAL_EDGES`] (w.r.t. the oriented tuple) of the edge
    /// that the next bisection of `t` will split.
    pub fn refinement_edge(&self, t: usize) -> usize {
        let tv = self.tagged[t];
        let (a, b) = (tv[0], tv[self.tags[t] as usize]);
        let o = self.tets[t];
        let la = o.iter().position(|&v| v == a).unwrap();
        let lb = o.iter().position(|&v| v == b).unwrap();
        let e = (la.min(lb), la.max(lb));
        LOCAL_EDGES.iter().position(|&x| x == e).unwrap()
    }

    /// Map from vertex to interior dof index (`None` on the boundary).
    pub fn dof_map(&self) -> (Vec<Option<usize>>, Vec<usize>) {
        let mut map = vec![None; self.n_vertices()];
        let mut dofs = Vec::new();
        for (v, &b) in self.boundary.iter().enumerate() {
            if !b {
                map[v] = Some(dofs.len());
                dofs.push(v);
            }
        }
        (map, dofs)
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    pub fn stats(&self) -> MeshStats {
        let mut h_max = 0.0f64;
        let mut h_min = f64::INFINITY;
        for t in 0..self.n_tets() {
            let p = self.tet_points(t);
            for &(a, b) in &LOCAL_EDGES {
                let l = geometry::dist(&p[a], &p[b]);
                h_max = h_max.max(l);
                h_min = h_min.min(l);
            }
        }
        MeshStats {
            n_vertices: self.n_vertices(),
            n_tets: self.n_tets(),
            n_interior_dofs: self.n_interior_dofs(),
            h_max,
            h_min,
        }
    }

    /// Tetrahedra incident to each vertex, as CSR arrays `(ptr, tets)`,
    /// sorted ascending within each vertex.
    pub fn vertex_tets(&self) -> (Vec<usize>, Vec<u32>) {
        let mut ptr = vec![0usize; self.n_vertices() + 1];
        for t in &self.tets {
            for &v in t {
                ptr[v as usize + 1] += 1;
            }
        }
        for v in 0..self.n_vertices() {
            ptr[v + 1] += ptr[v];
        }
        let mut next = ptr.clone();
        let mut idx = vec![0u32; ptr[self.n_vertices()]];
        for (t, tv) in self.tets.iter().enumerate() {
            for &v in tv {
                idx[next[v as usize]] = t as u32;
                next[v as usize] += 1;
            }
        }
        (ptr, idx)
    }

    /// For each tet and each local face (opposite local vertex `i` of the
    /// oriented tuple), the neighbouring tet across that face.
    pub fn face_neighbors(&self) -> Vec<[Option<u32>; 4]> {
        let mut faces: Vec<([u32; 3], u32, u8)> = Vec::with_capacity(4 * self.n_tets());
        for (t, tv) in self.tets.iter().enumerate() {
            for i in 0..4 {
                let mut f = [0u32; 3];
                let mut k = 0;
                for (j, &v) in tv.iter().enumerate() {
                    if j != i {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                faces.push((f, t as u32, i as u8));
            }
        }
        faces.sort_unstable();
        let mut nb = vec![[None; 4]; self.n_tets()];
        let mut k = 0;
        while k < faces.len() {
            if k + 1 < faces.len() && faces[k].0 == faces[k + 1].0 {
                let (a, b) = (faces[k], faces[k + 1]);
                nb[a.1 as usize][a.2 as usize] = Some(b.1);
                nb[b.1 as usize][b.2 as usize] = Some(a.1);
                k += 2;
            } else {
                k += 1;
            }
        }
        nb
    }

    /// Face-matching conformity check: every face is shared by exactly two
    /// tets, or by one tet if it lies on a face of the cube.
    pub fn check_conformity(&self) -> Result<()> {
        let mut faces: Vec<[u32; 3]> = Vec::with_capacity(4 * self.n_tets());
        for tv in &self.tets {
            for i in 0..4 {
                let mut f = [0u32; 3];
                let mut k = 0;
                for (j, &v) in tv.iter().enumerate() {
                    if j != i {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                faces.push(f);
            }
        }
        faces.sort_unstable();
        let mut k = 0;
        while k < faces.len() {
            let mut c = 1;
            while k + c < faces.len() && faces[k + c] == faces[k] {
                c += 1;
            }
            let f = faces[k];
            let pts = f.map(|v| self.vertices[v as usize]);
            let on_cube_face = (0..3).any(|d| {
                [0.0, 1.0].iter().any(|&s| {
                    pts.iter().all(|p| (p[d] - s).abs() <= BOUNDARY_TOL)
                })
            });
            let expected = if on_cube_face { 1 } else { 2 };
            if c != expected {
                return Err(Error::InvalidArgument(format!(
                    "non-conforming face {f:?}: shared by {c} tets, expected {expected}"
                )));
            }
            k += c;
        }
        Ok(())
    }

    /// Smallest dihedral angle (radians) over all tets.
    pub fn min_dihedral_angle(&self) -> f64 {
        (0..self.n_tets())
            .flat_map(|t| dihedral_angles(&self.tet_points(t)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Bisects every tet three times: each tet is replaced by eight children
    /// and the longest edge halves.
    pub fn uniform_refine(&self) -> Result<Self> {
        let mut mesh = self.clone();
        for _ in 0..3 {
            let all: Vec<usize> = (0..mesh.n_tets()).collect();
            mesh = mesh.bisect_marked(&all)?;
        }
        Ok(mesh)
    }

    /// Nodal values of a P1 function from an ancestor mesh with
    /// `coarse.len()` vertices, extended linearly to the vertices created
    /// by bisection since.
    pub fn prolongate(&self, coarse: &[f64]) -> Result<Vec<f64>> {
        if coarse.len() > self.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vertices(),
                got: coarse.len(),
            });
        }
        let mut new: Vec<(u32, u32, u32)> = self
            .midpoints
            .iter()
            .filter(|(_, &z)| z as usize >= coarse.len())
            .map(|(&k, &z)| (z, (k >> 32) as u32, k as u32))
            .collect();
        new.sort_unstable();
        if new.len() != self.n_vertices() - coarse.len() {
            return Err(Error::InvalidArgument(
                "mesh is not a bisection refinement of the given vertex set".into(),
            ));
        }
        let mut u = coarse.to_vec();
        u.resize(self.n_vertices(), 0.0);
        for (z, a, b) in new {
            u[z as usize] = 0.5 * (u[a as usize] + u[b as usize]);
        }
        Ok(u)
    }

    /// Bisects every marked tet at its refinement edge, followed by the
    /// conforming closure.
    pub fn bisect_marked(&self, marked: &[usize]) -> Result<Self> {
        bisect::bisect_marked(self, marked)
    }
}
