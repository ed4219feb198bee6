use super::{edge_key, TetMesh, BOUNDARY_TOL};
use crate::{Error, Result};

const MAX_ROUNDS: usize = 256;

/// Maubach bisection of a tagged tet `(x0, x1, x2, x3; k)` at edge `x0 xk`.
fn children(tv: [u32; 4], k: u8, z: u32) -> ([u32; 4], [u32; 4], u8) {
    let k = k as usize;
    let mut c1 = [0u32; 4];
    let mut c2 = [0u32; 4];
    // c1 = (x0, x1..x_{k-1}, z, x_{k+1}..x3)
    // c2 = (x1..x_k, z, x_{k+1}..x3)
    c1[0] = tv[0];
    c1[1..k].copy_from_slice(&tv[1..k]);
    c2[..k].copy_from_slice(&tv[1..=k]);
    c1[k] = z;
    c2[k] = z;
    c1[k + 1..].copy_from_slice(&tv[k + 1..]);
    c2[k + 1..].copy_from_slice(&tv[k + 1..]);
    let next = if k > 1 { k as u8 - 1 } else { 3 };
    (c1, c2, next)
}

pub(super) fn bisect_marked(mesh: &TetMesh, marked: &[usize]) -> Result<TetMesh> {
    if let Some(&bad) = marked.iter().find(|&&t| t >= mesh.n_tets()) {
        return Err(Error::InvalidArgument(format!(
            "marked tet {bad} out of range ({} tets)",
            mesh.n_tets()
        )));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    let mut vertices = mesh.vertices.clone();
    let mut boundary = mesh.boundary.clone();
    let mut midpoints = mesh.midpoints.clone();
    let mut tagged = mesh.tagged.clone();
    let mut tags = mesh.tags.clone();
    let mut generation = mesh.generation.clone();

    let mut flag = vec![false; tagged.len()];
    for &t in marked {
        flag[t] = true;
    }
    // endpoints of every edge split during this call
    let mut touched = vec![false; vertices.len()];

    let mut rounds = 0;
    loop {
        if rounds == MAX_ROUNDS {
            return Err(Error::ClosureDiverged(rounds));
        }
        rounds += 1;
        let n_split = flag.iter().filter(|&&f| f).count();
        let mut next_tagged = Vec::with_capacity(tagged.len() + n_split);
        let mut next_tags = Vec::with_capacity(tagged.len() + n_split);
        let mut next_gen = Vec::with_capacity(tagged.len() + n_split);
        for t in 0..tagged.len() {
            let tv = tagged[t];
            if !flag[t] {
                next_tagged.push(tv);
                next_tags.push(tags[t]);
                next_gen.push(generation[t]);
                continue;
            }
            let (a, b) = (tv[0], tv[tags[t] as usize]);
            let z = *midpoints.entry(edge_key(a, b)).or_insert_with(|| {
                let (pa, pb) = (vertices[a as usize], vertices[b as usize]);
                let on_face = (0..3).any(|d| {
                    [0.0, 1.0].iter().any(|&s| {
                        (pa[d] - s).abs() <= BOUNDARY_TOL && (pb[d] - s).abs() <= BOUNDARY_TOL
                    })
                });
                vertices.push([
                    0.5 * (pa[0] + pb[0]),
                    0.5 * (pa[1] + pb[1]),
                    0.5 * (pa[2] + pb[2]),
                ]);
                boundary.push(on_face);
                touched.push(false);
                touched[a as usize] = true;
                touched[b as usize] = true;
                (vertices.len() - 1) as u32
            });
            let (c1, c2, k) = children(tv, tags[t], z);
            next_tagged.extend([c1, c2]);
            next_tags.extend([k, k]);
            next_gen.extend([generation[t] + 1; 2]);
        }
        tagged = next_tagged;
        tags = next_tags;
        generation = next_gen;

        // hanging nodes: an edge of a current tet that already has a midpoint
        flag = vec![false; tagged.len()];
        let mut hanging = 0;
        for (t, tv) in tagged.iter().enumerate() {
            if !tv.iter().any(|&v| touched[v as usize]) {
                continue;
            }
            let has_midpoint = super::LOCAL_EDGES
                .iter()
                .any(|&(i, j)| midpoints.contains_key(&edge_key(tv[i], tv[j])));
            if has_midpoint {
                flag[t] = true;
                hanging += 1;
            }
        }
        if hanging == 0 {
            break;
        }
    }

    let mut out = TetMesh {
        vertices,
        tets: Vec::new(),
        tagged,
        tags,
        generation,
        boundary,
        midpoints,
        structured_n: None,
    };
    out.orient()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{on_boundary, TetMesh};

    #[test]
    fn empty_marking_is_identity() {
        let m = TetMesh::build_structured_cube(2).unwrap();
        let r = m.bisect_marked(&[]).unwrap();
        assert_eq!(r.tets(), m.tets());
        assert_eq!(r.vertices(), m.vertices());
    }

    #[test]
    fn out_of_range_marking_rejected() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        assert!(m.bisect_marked(&[6]).is_err());
    }

    #[test]
    fn single_marked_tet_closure() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        let r = m.bisect_marked(&[0]).unwrap();
        r.check_conformity().unwrap();
        assert!(r.n_tets() >= 7);
        // the cell diagonal is shared by all six tets, so all are split
        assert_eq!(r.n_tets(), 12);
        assert!((r.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generations_increase_by_one() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        let r = m.bisect_marked(&[0, 1, 2, 3, 4, 5]).unwrap();
        assert!(r.generation().iter().all(|&g| g == 1));
    }

    #[test]
    fn uniform_refine_counts_and_size() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        let r = m.uniform_refine().unwrap();
        assert_eq!(r.n_tets(), 48);
        assert_eq!(r.n_vertices(), 27);
        r.check_conformity().unwrap();
        let m2 = TetMesh::build_structured_cube(2).unwrap();
        let r2 = m2.uniform_refine().unwrap();
        assert!((r2.stats().h_max - 3f64.sqrt() / 4.0).abs() < 1e-14);
        assert!((r2.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_sweeps_grow_eightfold() {
        let mut m = TetMesh::build_structured_cube(1).unwrap();
        let n0 = m.n_tets();
        for _ in 0..3 {
            let all: Vec<usize> = (0..m.n_tets()).collect();
            m = m.bisect_marked(&all).unwrap();
        }
        assert!(m.n_tets() >= 8 * n0);
    }

    #[test]
    fn boundary_flags_match_coordinates_after_local_refinement() {
        let mut m = TetMesh::build_structured_cube(2).unwrap();
        for step in 0..6 {
            let marked: Vec<usize> = (0..m.n_tets()).filter(|t| (t + step) % 5 == 0).collect();
            m = m.bisect_marked(&marked).unwrap();
            m.check_conformity().unwrap();
        }
        for (p, &b) in m.vertices().iter().zip(m.boundary_vertex()) {
            assert_eq!(on_boundary(p), b);
        }
    }
}
