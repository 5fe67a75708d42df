//! Legacy VTK ASCII unstructured-grid output.

use std::fmt::Write as _;
use std::path::Path;

use super::{MeshError, TetMesh};

const VTK_TETRA: u8 = 10;

/// Renders the mesh with a per-tet `region` scalar and optional named
/// point vectors (one 3-vector per node).
pub fn vtk_string(mesh: &TetMesh, point_vectors: &[(&str, &[[f64; 3]])]) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\ngradhom cell\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_tets(), 5 * mesh.n_tets());
    for t in &mesh.tets {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_tets());
    for _ in 0..mesh.n_tets() {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    let _ = writeln!(s, "CELL_DATA {}\nSCALARS region int 1\nLOOKUP_TABLE default", mesh.n_tets());
    for tag in &mesh.region_tag {
        let _ = writeln!(s, "{tag}");
    }
    if !point_vectors.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        for (name, values) in point_vectors {
            assert_eq!(values.len(), mesh.n_nodes(), "one vector per node for {name}");
            let _ = writeln!(s, "VECTORS {name} double");
            for v in values.iter() {
                let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
            }
        }
    }
    s
}

pub fn write_vtk(mesh: &TetMesh, point_vectors: &[(&str, &[[f64; 3]])], path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, vtk_string(mesh, point_vectors))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::structured_box;

    #[test]
    fn sections_present() {
        let mesh = structured_box([1.0, 1.0, 1.0], [1, 1, 1]);
        let field = vec![[1.0, 2.0, 3.0]; mesh.n_nodes()];
        let s = vtk_string(&mesh, &[("phi_11", &field)]);
        assert!(s.contains("POINTS 8 double"));
        assert!(s.contains("CELLS 6 30"));
        assert!(s.contains("SCALARS region int 1"));
        assert!(s.contains("VECTORS phi_11 double"));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), 6);
    }
}
