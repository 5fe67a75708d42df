//! Linear tetrahedron kernels and reduced stiffness assembly.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::periodic::PeriodicMap;
use crate::mesh::{det3, sub, MaterialField, MeshError, TetMesh};
use crate::tensors::Rank4;

/// Barycentric weights of the symmetric 4-point rule (degree 2).
pub const QUAD4_A: f64 = 0.5854101966249685;
pub const QUAD4_B: f64 = 0.1381966011250105;

pub fn quad4_barycentric() -> [[f64; 4]; 4] {
    std::array::from_fn(|q| std::array::from_fn(|v| if v == q { QUAD4_A } else { QUAD4_B }))
}

#[derive(Debug, Clone, Copy)]
pub struct TetGeometry {
    pub volume: f64,
    /// Shape-function gradients, one row per vertex.
    pub grads: [[f64; 3]; 4],
    pub points: [[f64; 3]; 4],
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl TetGeometry {
    pub fn new(points: [[f64; 3]; 4]) -> Self {
        let e1 = sub(points[1], points[0]);
        let e2 = sub(points[2], points[0]);
        let e3 = sub(points[3], points[0]);
        let det = det3(e1, e2, e3);
        let g1 = cross(e2, e3).map(|x| x / det);
        let g2 = cross(e3, e1).map(|x| x / det);
        let g3 = cross(e1, e2).map(|x| x / det);
        let g0 = std::array::from_fn(|k| -(g1[k] + g2[k] + g3[k]));
        Self { volume: det / 6.0, grads: [g0, g1, g2, g3], points }
    }

    /// Physical coordinates of the 4-point rule nodes.
    pub fn quad_points(&self) -> [[f64; 3]; 4] {
        let bary = quad4_barycentric();
        std::array::from_fn(|q| std::array::from_fn(|k| (0..4).map(|v| bary[q][v] * self.points[v][k]).sum()))
    }
}

/// Unpacked stiffness per tet, shared by all kernels.
#[derive(Debug, Clone)]
pub struct MaterialTable {
    pub tensors: Vec<Rank4>,
    pub of_tet: Vec<usize>,
}

impl MaterialTable {
    pub fn new(mesh: &TetMesh, materials: &MaterialField) -> Result<Self, MeshError> {
        materials.validate(mesh)?;
        let tags: Vec<u32> = materials.by_tag.keys().copied().collect();
        let tensors = materials.by_tag.values().map(|c| c.unpack()).collect();
        let of_tet = mesh.region_tag.iter().map(|t| tags.binary_search(t).expect("validated tag")).collect();
        Ok(Self { tensors, of_tet })
    }

    #[inline]
    pub fn of(&self, tet: usize) -> &Rank4 {
        &self.tensors[self.of_tet[tet]]
    }
}

/// Precomputed geometry of every tet.
pub fn mesh_geometry(mesh: &TetMesh) -> Vec<TetGeometry> {
    (0..mesh.n_tets()).into_par_iter().map(|t| TetGeometry::new(mesh.tet_points(t))).collect()
}

/// 12x12 element stiffness with dof order `3 * vertex + component`.
pub fn element_stiffness(geo: &TetGeometry, c: &Rank4) -> [[f64; 12]; 12] {
    let mut ke = [[0.0; 12]; 12];
    for a in 0..4 {
        for b in 0..4 {
            let (ga, gb) = (geo.grads[a], geo.grads[b]);
            for i in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for j in 0..3 {
                        for l in 0..3 {
                            s += c[i][j][k][l] * ga[j] * gb[l];
                        }
                    }
                    ke[3 * a + i][3 * b + k] = geo.volume * s;
                }
            }
        }
    }
    ke
}

/// Lower triangle (diagonal included) of the reduced symmetric matrix in
/// compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn assemble_stiffness(
    mesh: &TetMesh,
    geometry: &[TetGeometry],
    table: &MaterialTable,
    map: &PeriodicMap,
) -> ReducedSystem {
    let n = map.n_reduced;
    let blocks: Vec<[[f64; 12]; 12]> =
        (0..mesh.n_tets()).into_par_iter().map(|t| element_stiffness(&geometry[t], table.of(t))).collect();
    let mut triplets: Vec<(u64, f64)> = Vec::with_capacity(mesh.n_tets() * 78);
    for (t, ke) in blocks.iter().enumerate() {
        let dofs: [Option<usize>; 12] = std::array::from_fn(|p| map.reduced_index(3 * mesh.tets[t][p / 3] + p % 3));
        for p in 0..12 {
            let Some(r) = dofs[p] else { continue };
            for q in 0..12 {
                let Some(c) = dofs[q] else { continue };
                if r >= c {
                    triplets.push(((c as u64) * (n as u64) + r as u64, ke[p][q]));
                }
            }
        }
    }
    // Stable sort keeps element order within each entry, so the summation
    // order is fixed and the matrix is reproducible bit for bit.
    triplets.sort_by_key(|e| e.0);
    let mut col_ptr = vec![0usize; n + 1];
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    let mut last = u64::MAX;
    for (key, v) in triplets {
        if key == last {
            *values.last_mut().expect("entry exists") += v;
        } else {
            let c = (key / n as u64) as usize;
            row_idx.push((key % n as u64) as usize);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = key;
        }
    }
    for c in 0..n {
        col_ptr[c + 1] += col_ptr[c];
    }
    ReducedSystem { n, col_ptr, row_idx, values }
}

impl ReducedSystem {
    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let v = self.values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                if self.row_idx[k] == c {
                    d[c] = self.values[k];
                }
            }
        }
        d
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
        let _ = writeln!(s, "{} {} {}", self.n, self.n, self.nnz_lower());
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let _ = writeln!(s, "{} {} {:e}", self.row_idx[k] + 1, c + 1, self.values[k]);
            }
        }
        s
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.matrix_market())
    }
}

/// `sum_e u_e^T K_e u_e` on a full nodal field, without any tying.
pub fn unreduced_quadratic_form(
    mesh: &TetMesh,
    geometry: &[TetGeometry],
    table: &MaterialTable,
    field: &[[f64; 3]],
) -> f64 {
    (0..mesh.n_tets())
        .map(|t| {
            let ke = element_stiffness(&geometry[t], table.of(t));
            let u: [f64; 12] = std::array::from_fn(|p| field[mesh.tets[t][p / 3]][p % 3]);
            (0..12).map(|p| u[p] * (0..12).map(|q| ke[p][q] * u[q]).sum::<f64>()).sum::<f64>()
        })
        .sum()
}
