use serde::{Deserialize, Serialize};

use crate::assembly::DofMap;
use crate::mesh::{Point, TetMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofClass {
    Interior(u32),
    Interface,
}

/// Element ownership and the induced classification of the interior dofs.
#[derive(Debug, Clone)]
pub struct Partition {
    p: usize,
    owner: Vec<u32>,
    dof_class: Vec<DofClass>,
    dof_subdomains: Vec<Vec<u32>>,
}

impl Partition {
    /// Builds a partition from an explicit per-tet owner array.
    pub fn from_owner(mesh: &TetMesh, p: usize, owner: Vec<u32>) -> Result<Self> {
        if owner.len() != mesh.n_tets() {
            return Err(Error::DimensionMismatch {
                expected: mesh.n_tets(),
                got: owner.len(),
            });
        }
        if let Some(&o) = owner.iter().find(|&&o| o as usize >= p) {
            return Err(Error::InvalidArgument(format!("owner {o} out of range for p = {p}")));
        }
        let dofs = DofMap::interior(mesh);
        let mut sets: Vec<Vec<u32>> = vec![Vec::new(); dofs.n_dofs()];
        for (t, tet) in mesh.tets().iter().enumerate() {
            for &v in tet {
                if let Some(d) = dofs.dof(v as usize) {
                    sets[d].push(owner[t]);
                }
            }
        }
        for s in sets.iter_mut() {
            s.sort_unstable();
            s.dedup();
        }
        let dof_class = sets
            .iter()
            .map(|s| match s.as_slice() {
                [i] => DofClass::Interior(*i),
                _ => DofClass::Interface,
            })
            .collect();
        Ok(Self {
            p,
            owner,
            dof_class,
            dof_subdomains: sets,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    pub fn dof_class(&self) -> &[DofClass] {
        &self.dof_class
    }

    /// Sorted subdomains touching each interior dof.
    pub fn dof_subdomains(&self) -> &[Vec<u32>] {
        &self.dof_subdomains
    }

    pub fn subdomain_sizes(&self) -> Vec<usize> {
        let mut c = vec![0; self.p];
        for &o in &self.owner {
            c[o as usize] += 1;
        }
        c
    }

    pub fn n_interface(&self) -> usize {
        self.dof_class.iter().filter(|c| **c == DofClass::Interface).count()
    }
}

/// Recursive coordinate bisection of tet centroids into `p` parts.
pub fn partition_geometric(mesh: &TetMesh, p: usize) -> Result<Partition> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 subdomains, got {p}")));
    }
    if p > mesh.n_tets() {
        return Err(Error::InvalidArgument(format!(
            "{p} subdomains requested for {} tets",
            mesh.n_tets()
        )));
    }
    let centroids: Vec<Point> = (0..mesh.n_tets()).map(|t| mesh.centroid(t)).collect();
    let mut order: Vec<usize> = (0..mesh.n_tets()).collect();
    let mut owner = vec![0u32; mesh.n_tets()];
    bisect(&mut order, &centroids, p, 0, &mut owner);
    Partition::from_owner(mesh, p, owner)
}

fn bisect(tets: &mut [usize], c: &[Point], p: usize, first: u32, owner: &mut [u32]) {
    if p == 1 {
        for &t in tets.iter() {
            owner[t] = first;
        }
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &t in tets.iter() {
        for d in 0..3 {
            lo[d] = lo[d].min(c[t][d]);
            hi[d] = hi[d].max(c[t][d]);
        }
    }
    let mut axis = 0;
    for d in 1..3 {
        if hi[d] - lo[d] > hi[axis] - lo[axis] {
            axis = d;
        }
    }
    tets.sort_unstable_by(|&a, &b| c[a][axis].total_cmp(&c[b][axis]).then(a.cmp(&b)));
    let p1 = p / 2;
    let n1 = tets.len() * p1 / p;
    let (left, right) = tets.split_at_mut(n1);
    bisect(left, c, p1, first, owner);
    bisect(right, c, p - p1, first + p1 as u32, owner);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_parts_split_along_x() {
        let m = TetMesh::build_structured_cube(4).unwrap();
        let part = partition_geometric(&m, 2).unwrap();
        assert_eq!(part.subdomain_sizes(), vec![192, 192]);
        for t in 0..m.n_tets() {
            let x = m.centroid(t)[0];
            assert_eq!(part.owner()[t], if x < 0.5 { 0 } else { 1 });
        }
        // the interface is the plane x = 1/2
        for (d, c) in part.dof_class().iter().enumerate() {
            let v = DofMap::interior(&m).vertex(d);
            let on_plane = (m.vertices()[v][0] - 0.5).abs() < 1e-12;
            assert_eq!(*c == DofClass::Interface, on_plane);
        }
    }

    #[test]
    fn eight_parts_balanced() {
        let m = TetMesh::build_structured_cube(8).unwrap();
        let part = partition_geometric(&m, 8).unwrap();
        let mean = m.n_tets() as f64 / 8.0;
        for s in part.subdomain_sizes() {
            assert!((s as f64 - mean).abs() <= 1.0);
        }
    }

    #[test]
    fn odd_part_count_balanced() {
        let m = TetMesh::build_structured_cube(3).unwrap();
        let part = partition_geometric(&m, 5).unwrap();
        let mean = m.n_tets() as f64 / 5.0;
        for s in part.subdomain_sizes() {
            assert!((s as f64 - mean).abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_counts() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        assert!(partition_geometric(&m, 1).is_err());
        assert!(partition_geometric(&m, 7).is_err());
    }
}
