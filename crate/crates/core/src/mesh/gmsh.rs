//! Gmsh ASCII 2.2 reader and writer for linear tetrahedra.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{Aabb, MeshError, TetMesh};

const TET4: u32 = 4;

#[derive(Debug, Clone)]
pub struct ImportedMesh {
    pub mesh: TetMesh,
    /// Node pairs found on opposite faces, per axis.
    pub face_pairs: [usize; 3],
    /// Tets whose node order was flipped to get positive volume.
    pub reoriented: usize,
}

pub fn import_msh(path: impl AsRef<Path>) -> Result<ImportedMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse { line: line + 1, message: message.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| parse_err(line, format!("expected {what}")))
}

/// Parses and verifies opposite-face congruence.
pub fn parse_msh(text: &str) -> Result<ImportedMesh, MeshError> {
    let (mesh, reoriented) = parse_msh_unchecked(text)?;
    let face_pairs = mesh.check_face_congruence(1e-8 * mesh.bbox.diagonal())?;
    log::info!("imported {} nodes, {} tets; face pairs per axis {:?}", mesh.n_nodes(), mesh.n_tets(), face_pairs);
    Ok(ImportedMesh { mesh, face_pairs, reoriented })
}

/// Parses without the periodicity check. Returns the mesh and the number
/// of reoriented tets.
pub fn parse_msh_unchecked(text: &str) -> Result<(TetMesh, usize), MeshError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut pos = 0;
    let mut node_ids: HashMap<u64, usize> = HashMap::new();
    let mut nodes: Vec<[f64; 3]> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut tags: Vec<u32> = Vec::new();
    let mut bad_types: BTreeSet<u32> = BTreeSet::new();
    let mut saw_format = false;
    let mut deferred: Vec<(usize, Vec<u64>, u32)> = Vec::new();

    while pos < lines.len() {
        let header = lines[pos].trim();
        pos += 1;
        match header {
            "$MeshFormat" => {
                let mut it = lines.get(pos).copied().unwrap_or("").split_whitespace();
                let version: String = num(it.next(), pos, "format version")?;
                let file_type: u32 = num(it.next(), pos, "file type")?;
                if !version.starts_with("2.2") || file_type != 0 {
                    return Err(parse_err(pos, format!("only ASCII version 2.2 is supported, got {version} type {file_type}")));
                }
                saw_format = true;
                pos += 1;
            }
            "$Nodes" => {
                let n: usize = num(lines.get(pos).map(|l| l.trim()), pos, "node count")?;
                pos += 1;
                for _ in 0..n {
                    let mut it = lines.get(pos).copied().unwrap_or("").split_whitespace();
                    let id: u64 = num(it.next(), pos, "node id")?;
                    let p = [
                        num(it.next(), pos, "x coordinate")?,
                        num(it.next(), pos, "y coordinate")?,
                        num(it.next(), pos, "z coordinate")?,
                    ];
                    if node_ids.insert(id, nodes.len()).is_some() {
                        return Err(parse_err(pos, format!("duplicate node id {id}")));
                    }
                    nodes.push(p);
                    pos += 1;
                }
            }
            "$Elements" => {
                let n: usize = num(lines.get(pos).map(|l| l.trim()), pos, "element count")?;
                pos += 1;
                for _ in 0..n {
                    let mut it = lines.get(pos).copied().unwrap_or("").split_whitespace();
                    let _id: u64 = num(it.next(), pos, "element id")?;
                    let etype: u32 = num(it.next(), pos, "element type")?;
                    let ntags: usize = num(it.next(), pos, "tag count")?;
                    let mut phys = 0;
                    for t in 0..ntags {
                        let v: u32 = num(it.next(), pos, "element tag")?;
                        if t == 0 {
                            phys = v;
                        }
                    }
                    if etype != TET4 {
                        bad_types.insert(etype);
                    } else {
                        let conn: Vec<u64> = it.map(|t| t.parse()).collect::<Result<_, _>>().map_err(|_| parse_err(pos, "bad node reference"))?;
                        if conn.len() != 4 {
                            return Err(parse_err(pos, format!("tetrahedron with {} nodes", conn.len())));
                        }
                        deferred.push((pos, conn, phys));
                    }
                    pos += 1;
                }
            }
            _ => {}
        }
    }
    if !saw_format {
        return Err(parse_err(0, "missing $MeshFormat section"));
    }
    if !bad_types.is_empty() {
        return Err(MeshError::UnsupportedElements { types: bad_types.into_iter().collect() });
    }
    for (line, conn, phys) in deferred {
        let mut tet = [0; 4];
        for (k, id) in conn.iter().enumerate() {
            tet[k] = *node_ids.get(id).ok_or_else(|| parse_err(line, format!("unknown node id {id}")))?;
        }
        tets.push(tet);
        tags.push(phys);
    }
    if tets.is_empty() {
        return Err(MeshError::Degenerate);
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for p in &nodes {
        for k in 0..3 {
            min[k] = min[k].min(p[k]);
            max[k] = max[k].max(p[k]);
        }
    }
    let mut reoriented = 0;
    for tet in tets.iter_mut() {
        if super::signed_volume(&tet.map(|v| nodes[v])) < 0.0 {
            tet.swap(2, 3);
            reoriented += 1;
        }
    }
    let mesh = TetMesh::new(nodes, tets, tags, Aabb::new(min, max))?;
    Ok((mesh, reoriented))
}

pub fn write_msh_string(mesh: &TetMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
    let _ = writeln!(s, "{}", mesh.n_nodes());
    for (i, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {:e} {:e} {:e}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n$Elements\n");
    let _ = writeln!(s, "{}", mesh.n_tets());
    for (t, tet) in mesh.tets.iter().enumerate() {
        let tag = mesh.region_tag[t];
        let _ = writeln!(s, "{} 4 2 {tag} {tag} {} {} {} {}", t + 1, tet[0] + 1, tet[1] + 1, tet[2] + 1, tet[3] + 1);
    }
    s.push_str("$EndElements\n");
    s
}

pub fn export_msh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, write_msh_string(mesh))?;
    Ok(())
}
