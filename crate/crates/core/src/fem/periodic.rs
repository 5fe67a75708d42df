//! Degree-of-freedom tying across opposite cell faces.
//!
//! Nodes on a max face are folded onto their partner on the min face;
//! edge and corner nodes resolve through successive axes to one master.
//! Rigid translations are removed by pinning one master node near the
//! geometric center, optionally restricted to an eligible subset.

use thiserror::Error;

use crate::mesh::{geometric_center, FaceIndex, MeshError, TetMesh};

#[derive(Debug, Error)]
pub enum PeriodicError {
    #[error("boundary node {node} on axis {} has no partner on the opposite face", .axis + 1)]
    Unmatched { node: usize, axis: usize },
    #[error("boundary node {node} on axis {} has {count} partners within tolerance", .axis + 1)]
    Ambiguous { node: usize, axis: usize, count: usize },
    #[error("master resolution for node {node} did not terminate")]
    Cycle { node: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofClass {
    /// Free unknown with the given reduced index.
    Master(usize),
    /// Tied to the full dof index of its master.
    Slave(usize),
    Fixed,
}

#[derive(Debug, Clone)]
pub struct PeriodicMap {
    /// Master node of each node (itself for masters).
    pub node_master: Vec<usize>,
    pub dof_class: Vec<DofClass>,
    pub n_reduced: usize,
    pub pinned_node: usize,
    /// Matched max-face nodes per axis.
    pub pairs_per_axis: [usize; 3],
    target: Vec<Option<usize>>,
}

/// Default matching tolerance: 1e-8 of the box diagonal.
pub fn default_tolerance(mesh: &TetMesh) -> f64 {
    1e-8 * mesh.bbox.diagonal()
}

pub fn build_periodic_map(mesh: &TetMesh, tolerance: f64) -> Result<PeriodicMap, PeriodicError> {
    build_periodic_map_pinned(mesh, tolerance, &vec![true; mesh.n_nodes()])
}

/// As [`build_periodic_map`], but the pin goes to the master nearest the
/// center among nodes with `pin_eligible` set. Pinning inside a very soft
/// phase leaves the stiff skeleton held by that phase alone and ruins the
/// conditioning.
pub fn build_periodic_map_pinned(
    mesh: &TetMesh,
    tolerance: f64,
    pin_eligible: &[bool],
) -> Result<PeriodicMap, PeriodicError> {
    let n = mesh.n_nodes();
    assert_eq!(pin_eligible.len(), n, "one eligibility flag per node");
    let mut partner: [Vec<Option<usize>>; 3] = std::array::from_fn(|_| vec![None; n]);
    let mut pairs_per_axis = [0; 3];
    for axis in 0..3 {
        let (lo, hi) = mesh.face_nodes(axis, tolerance);
        let lo_index = FaceIndex::new(&mesh.nodes, &lo, axis, tolerance);
        let hi_index = FaceIndex::new(&mesh.nodes, &hi, axis, tolerance);
        for &node in &hi {
            let m = lo_index.matches(&mesh.nodes, mesh.nodes[node]);
            match m.len() {
                0 => return Err(PeriodicError::Unmatched { node, axis }),
                1 => partner[axis][node] = Some(m[0]),
                count => return Err(PeriodicError::Ambiguous { node, axis, count }),
            }
        }
        for &node in &lo {
            match hi_index.matches(&mesh.nodes, mesh.nodes[node]).len() {
                0 => return Err(PeriodicError::Unmatched { node, axis }),
                1 => {}
                count => return Err(PeriodicError::Ambiguous { node, axis, count }),
            }
        }
        pairs_per_axis[axis] = hi.len();
    }

    let mut node_master = vec![0; n];
    for (node, master) in node_master.iter_mut().enumerate() {
        let mut cur = node;
        let mut steps = 0;
        while let Some(next) = (0..3).find_map(|a| partner[a][cur]) {
            cur = next;
            steps += 1;
            if steps > 3 {
                return Err(PeriodicError::Cycle { node });
            }
        }
        *master = cur;
    }

    let mut master_eligible = vec![false; n];
    for v in 0..n {
        master_eligible[node_master[v]] |= pin_eligible[v];
    }
    let center = geometric_center(mesh)?;
    let pinned_node = (0..n)
        .filter(|&v| node_master[v] == v && master_eligible[v])
        .min_by(|&a, &b| {
            let da = dist2(mesh.nodes[a], center);
            let db = dist2(mesh.nodes[b], center);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .ok_or(PeriodicError::Mesh(MeshError::Degenerate))?;

    let mut dof_class = vec![DofClass::Fixed; 3 * n];
    let mut target = vec![None; 3 * n];
    let mut n_reduced = 0;
    for node in 0..n {
        if node_master[node] == node && node != pinned_node {
            for i in 0..3 {
                dof_class[3 * node + i] = DofClass::Master(n_reduced);
                target[3 * node + i] = Some(n_reduced);
                n_reduced += 1;
            }
        }
    }
    for node in 0..n {
        let m = node_master[node];
        if m != node {
            for i in 0..3 {
                dof_class[3 * node + i] = DofClass::Slave(3 * m + i);
                target[3 * node + i] = target[3 * m + i];
            }
        }
    }
    log::debug!(
        "periodic map: {n_reduced} reduced dofs, pairs per axis {pairs_per_axis:?}, pinned node {pinned_node}"
    );
    Ok(PeriodicMap { node_master, dof_class, n_reduced, pinned_node, pairs_per_axis, target })
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum()
}

impl PeriodicMap {
    /// Reduced index receiving full dof `dof`, or `None` when it is fixed.
    #[inline]
    pub fn reduced_index(&self, dof: usize) -> Option<usize> {
        self.target[dof]
    }

    pub fn n_full(&self) -> usize {
        self.target.len()
    }

    /// Folds a full load vector onto the reduced unknowns.
    pub fn reduce(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reduced];
        for (dof, &f) in full.iter().enumerate() {
            if let Some(r) = self.target[dof] {
                out[r] += f;
            }
        }
        out
    }

    /// Copies reduced values to every node; fixed dofs read zero.
    pub fn expand(&self, reduced: &[f64]) -> Vec<[f64; 3]> {
        assert_eq!(reduced.len(), self.n_reduced);
        (0..self.node_master.len())
            .map(|node| std::array::from_fn(|i| self.target[3 * node + i].map_or(0.0, |r| reduced[r])))
            .collect()
    }

    /// Restriction of a periodic nodal field to the reduced unknowns.
    pub fn restrict(&self, field: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_reduced];
        for (dof, class) in self.dof_class.iter().enumerate() {
            if let DofClass::Master(r) = class {
                out[*r] = field[dof / 3][dof % 3];
            }
        }
        out
    }
}
