//! Linear tetrahedron finite elements with periodic tying.

pub mod assembly;
pub mod periodic;
pub mod solver;

use crate::mesh::TetMesh;
use assembly::TetGeometry;


pub use assembly::{assemble_stiffness, MaterialTable, ReducedSystem};
pub use periodic::{build_periodic_map, build_periodic_map_pinned, DofClass, PeriodicError, PeriodicMap};
pub use solver::{LinearSolver, SolverError, SolverKind, SolverOptions};

/// One 3-vector per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVectorField {
    pub values: Vec<[f64; 3]>,
}

impl NodalVectorField {
    pub fn zeros(n_nodes: usize) -> Self {
        Self { values: vec![[0.0; 3]; n_nodes] }
    }

    pub fn expand(map: &PeriodicMap, reduced: &[f64]) -> Self {
        Self { values: map.expand(reduced) }
    }

    /// Exact volume average of the piecewise-linear interpolant.
    pub fn volume_mean(&self, mesh: &TetMesh, geometry: &[TetGeometry]) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let mut vol = 0.0;
        for (t, tet) in mesh.tets.iter().enumerate() {
            let w = 0.25 * geometry[t].volume;
            vol += geometry[t].volume;
            for &v in tet {
                for i in 0..3 {
                    acc[i] += w * self.values[v][i];
                }
            }
        }
        acc.map(|a| a / vol)
    }

    /// Shifts the field to zero volume average. Periodic ties stay bitwise
    /// exact since every node receives the same shift.
    pub fn remove_mean(&mut self, mesh: &TetMesh, geometry: &[TetGeometry]) -> [f64; 3] {
        let mean = self.volume_mean(mesh, geometry);
        for v in self.values.iter_mut() {
            for i in 0..3 {
                v[i] -= mean[i];
            }
        }
        mean
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Interpolated value at barycentric weights inside tet `t`.
    pub fn at(&self, tet: &[usize; 4], bary: &[f64; 4]) -> [f64; 3] {
        std::array::from_fn(|i| (0..4).map(|v| bary[v] * self.values[tet[v]][i]).sum())
    }

    /// Element-constant gradient: `grad[i][j] = d u_i / d y_j`.
    pub fn gradient(&self, tet: &[usize; 4], geo: &TetGeometry) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for v in 0..4 {
            let u = self.values[tet[v]];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] += u[i] * geo.grads[v][j];
                }
            }
        }
        g
    }
}
