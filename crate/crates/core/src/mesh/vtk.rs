//! Legacy ASCII VTK writer (unstructured grid, tetra cells = type 10).

use std::io::Write;

use super::TetMesh;
use crate::{Error, Result};

/// Writes `mesh` with optional per-vertex and per-cell scalar fields.
pub fn write_vtk<W: Write>(
    mut w: W,
    mesh: &TetMesh,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
) -> Result<()> {
    for (name, f) in point_data {
        if f.len() != mesh.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "point field `{name}` has {} values for {} vertices",
                f.len(),
                mesh.n_vertices()
            )));
        }
    }
    for (name, f) in cell_data {
        if f.len() != mesh.n_tets() {
            return Err(Error::InvalidArgument(format!(
                "cell field `{name}` has {} values for {} cells",
                f.len(),
                mesh.n_tets()
            )));
        }
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "rdfem tetrahedral mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2])?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets())?;
    for t in mesh.tets() {
        writeln!(w, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_tets())?;
    for _ in 0..mesh.n_tets() {
        writeln!(w, "10")?;
    }
    let write_fields = |w: &mut W, fields: &[(&str, &[f64])]| -> Result<()> {
        for (name, f) in fields {
            let name: String = name
                .chars()
                .map(|c| if c.is_whitespace() { '_' } else { c })
                .collect();
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in f.iter() {
                writeln!(w, "{v:.17e}")?;
            }
        }
        Ok(())
    };
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        write_fields(&mut w, point_data)?;
    }
    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {}", mesh.n_tets())?;
        write_fields(&mut w, cell_data)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_sections() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        let u: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let part = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let mut buf = Vec::new();
        write_vtk(&mut buf, &m, &[("u", &u)], &[("subdomain", &part)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 8 double"));
        assert!(s.contains("CELLS 6 30"));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), 6);
        assert!(s.contains("POINT_DATA 8"));
        assert!(s.contains("CELL_DATA 6"));
    }

    #[test]
    fn wrong_field_length_rejected() {
        let m = TetMesh::build_structured_cube(1).unwrap();
        let bad = vec![0.0; 3];
        assert!(write_vtk(Vec::new(), &m, &[("u", &bad)], &[]).is_err());
    }
}
