//! Tetrahedral periodic cell meshes, material tagging and moment integrals.

pub mod generate;
pub mod gmsh;
pub mod vtk;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensors::Stiffness4;

pub use generate::{generate, HoneycombLayout, Orientation, RveGeometry, RveShape, WallSpec};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has zero or negative total volume")]
    Degenerate,
    #[error("tet {tet} has non-positive volume {volume:.3e}")]
    InvertedTet { tet: usize, volume: f64 },
    #[error("tet {tet} references node {node} but the mesh has {n_nodes} nodes")]
    BadConnectivity { tet: usize, node: usize, n_nodes: usize },
    #[error("node {node} lies outside the periodic box by {distance:.3e}")]
    NodeOutsideBox { node: usize, distance: f64 },
    #[error("faces normal to axis {} are not congruent: worst mismatch {distance:.3e} at node {node}", .axis + 1)]
    FaceMismatch { axis: usize, node: usize, distance: f64 },
    #[error("region tag {0} has no assigned material")]
    MissingMaterial(u32),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry infeasible: {0}")]
    Infeasible(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("unsupported element types {types:?} (only type 4 tetrahedra are accepted)")]
    UnsupportedElements { types: Vec<u32> },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn from_lengths(lengths: [f64; 3]) -> Self {
        Self { min: [0.0; 3], max: lengths }
    }

    pub fn lengths(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.max[k] - self.min[k])
    }

    pub fn diagonal(&self) -> f64 {
        self.lengths().iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn midpoint(&self) -> [f64; 3] {
        std::array::from_fn(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    /// Distance of `p` outside the box, zero when inside.
    pub fn outside_distance(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|k| (self.min[k] - p[k]).max(p[k] - self.max[k]).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    pub nodes: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub region_tag: Vec<u32>,
    pub bbox: Aabb,
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

pub(crate) fn signed_volume(p: &[[f64; 3]; 4]) -> f64 {
    det3(sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0])) / 6.0
}

impl TetMesh {
    /// Validates orientation, connectivity and box containment.
    pub fn new(
        nodes: Vec<[f64; 3]>,
        tets: Vec<[usize; 4]>,
        region_tag: Vec<u32>,
        bbox: Aabb,
    ) -> Result<Self, MeshError> {
        assert_eq!(tets.len(), region_tag.len(), "one region tag per tet");
        let mesh = Self { nodes, tets, region_tag, bbox };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        for (t, tet) in self.tets.iter().enumerate() {
            if let Some(&node) = tet.iter().find(|&&v| v >= n) {
                return Err(MeshError::BadConnectivity { tet: t, node, n_nodes: n });
            }
            let v = self.tet_volume(t);
            if !(v > 0.0) {
                return Err(MeshError::InvertedTet { tet: t, volume: v });
            }
        }
        let tol = 1e-9 * self.bbox.diagonal();
        for (i, p) in self.nodes.iter().enumerate() {
            let d = self.bbox.outside_distance(*p);
            if d > tol {
                return Err(MeshError::NodeOutsideBox { node: i, distance: d });
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [[f64; 3]; 4] {
        self.tets[t].map(|v| self.nodes[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_points(t))
    }

    pub fn centroid(&self, t: usize) -> [f64; 3] {
        let p = self.tet_points(t);
        std::array::from_fn(|k| 0.25 * (p[0][k] + p[1][k] + p[2][k] + p[3][k]))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.tet_volume(t)).sum()
    }

    /// Volume carried by tets with the given tag.
    pub fn region_volume(&self, tag: u32) -> f64 {
        (0..self.n_tets())
            .filter(|&t| self.region_tag[t] == tag)
            .map(|t| self.tet_volume(t))
            .sum()
    }

    pub fn translated(&self, shift: [f64; 3]) -> Self {
        let add = |p: [f64; 3]| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]];
        Self {
            nodes: self.nodes.iter().map(|&p| add(p)).collect(),
            tets: self.tets.clone(),
            region_tag: self.region_tag.clone(),
            bbox: Aabb::new(add(self.bbox.min), add(self.bbox.max)),
        }
    }

    /// Distinct region tags in ascending order.
    pub fn tags(&self) -> Vec<u32> {
        let mut tags = self.region_tag.clone();
        tags.sort_unstable();
        tags.dedup();
        tags
    }

    /// Verifies that every node on a min face has a partner on the
    /// opposite max face (and conversely) with matching tangential
    /// coordinates within `tol`. Returns the number of pairs per axis.
    pub fn check_face_congruence(&self, tol: f64) -> Result<[usize; 3], MeshError> {
        let mut pairs = [0; 3];
        for axis in 0..3 {
            let (lo, hi) = self.face_nodes(axis, tol);
            let lo_index = FaceIndex::new(&self.nodes, &lo, axis, tol);
            let hi_index = FaceIndex::new(&self.nodes, &hi, axis, tol);
            for (from, index) in [(&hi, &lo_index), (&lo, &hi_index)] {
                for &node in from.iter() {
                    if index.nearest(&self.nodes, self.nodes[node]).is_none() {
                        return Err(MeshError::FaceMismatch {
                            axis,
                            node,
                            distance: index.nearest_distance(&self.nodes, self.nodes[node]),
                        });
                    }
                }
            }
            pairs[axis] = hi.len();
        }
        Ok(pairs)
    }

    /// Node ids on the min and max faces normal to `axis`.
    pub fn face_nodes(&self, axis: usize, tol: f64) -> (Vec<usize>, Vec<usize>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (i, p) in self.nodes.iter().enumerate() {
            if (p[axis] - self.bbox.min[axis]).abs() <= tol {
                lo.push(i);
            } else if (p[axis] - self.bbox.max[axis]).abs() <= tol {
                hi.push(i);
            }
        }
        (lo, hi)
    }
}

/// Hash of face nodes keyed on the two tangential coordinates.
pub(crate) struct FaceIndex {
    axis: usize,
    cell: f64,
    tol: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl FaceIndex {
    pub(crate) fn new(nodes: &[[f64; 3]], ids: &[usize], axis: usize, tol: f64) -> Self {
        let cell = 4.0 * tol.max(f64::MIN_POSITIVE);
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
        let mut me = Self { axis, cell, tol, buckets: Default::default() };
        for &id in ids {
            buckets.entry(me.key(nodes[id])).or_default().push(id);
        }
        me.buckets = buckets;
        me
    }

    fn tangential(&self, p: [f64; 3]) -> (f64, f64) {
        let (u, v) = ((self.axis + 1) % 3, (self.axis + 2) % 3);
        (p[u], p[v])
    }

    fn key(&self, p: [f64; 3]) -> (i64, i64) {
        let (u, v) = self.tangential(p);
        ((u / self.cell).floor() as i64, (v / self.cell).floor() as i64)
    }

    fn candidates(&self, nodes: &[[f64; 3]], p: [f64; 3]) -> Vec<(f64, usize)> {
        let (ku, kv) = self.key(p);
        let (pu, pv) = self.tangential(p);
        let mut out = Vec::new();
        for du in -1..=1 {
            for dv in -1..=1 {
                if let Some(ids) = self.buckets.get(&(ku + du, kv + dv)) {
                    for &id in ids {
                        let (qu, qv) = self.tangential(nodes[id]);
                        let d = (pu - qu).hypot(pv - qv);
                        if d <= self.tol {
                            out.push((d, id));
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    pub(crate) fn nearest(&self, nodes: &[[f64; 3]], p: [f64; 3]) -> Option<usize> {
        self.candidates(nodes, p).first().map(|c| c.1)
    }

    /// All partners within tolerance, nearest first.
    pub(crate) fn matches(&self, nodes: &[[f64; 3]], p: [f64; 3]) -> Vec<usize> {
        self.candidates(nodes, p).into_iter().map(|c| c.1).collect()
    }

    /// Brute-force nearest tangential distance, for diagnostics only.
    pub(crate) fn nearest_distance(&self, nodes: &[[f64; 3]], p: [f64; 3]) -> f64 {
        let (pu, pv) = self.tangential(p);
        self.buckets
            .values()
            .flatten()
            .map(|&id| {
                let (qu, qv) = self.tangential(nodes[id]);
                (pu - qu).hypot(pv - qv)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Piecewise-constant stiffness keyed by region tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialField {
    pub by_tag: BTreeMap<u32, Stiffness4>,
}

impl MaterialField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag: u32, c: Stiffness4) {
        self.by_tag.insert(tag, c);
    }

    pub fn get(&self, tag: u32) -> Option<&Stiffness4> {
        self.by_tag.get(&tag)
    }

    pub fn validate(&self, mesh: &TetMesh) -> Result<(), MeshError> {
        match mesh.tags().into_iter().find(|t| !self.by_tag.contains_key(t)) {
            Some(tag) => Err(MeshError::MissingMaterial(tag)),
            None => Ok(()),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { by_tag: self.by_tag.iter().map(|(&t, c)| (t, c.scaled(s))).collect() }
    }

    /// Largest stiffness entry across all phases.
    pub fn max_abs(&self) -> f64 {
        self.by_tag.values().map(Stiffness4::max_abs).fold(0.0, f64::max)
    }
}

/// Volume centroid over the whole meshed box.
pub fn geometric_center(mesh: &TetMesh) -> Result<[f64; 3], MeshError> {
    let mut v = 0.0;
    let mut m = [0.0; 3];
    for t in 0..mesh.n_tets() {
        let vol = mesh.tet_volume(t);
        let c = mesh.centroid(t);
        v += vol;
        for k in 0..3 {
            m[k] += vol * c[k];
        }
    }
    if !(v > 0.0) {
        return Err(MeshError::Degenerate);
    }
    Ok(m.map(|x| x / v))
}

/// Volume-normalized first moment about `center`.
pub fn first_moment(mesh: &TetMesh, center: [f64; 3]) -> Result<[f64; 3], MeshError> {
    let mut v = 0.0;
    let mut m = [0.0; 3];
    for t in 0..mesh.n_tets() {
        let vol = mesh.tet_volume(t);
        let c = sub(mesh.centroid(t), center);
        v += vol;
        for k in 0..3 {
            m[k] += vol * c[k];
        }
    }
    if !(v > 0.0) {
        return Err(MeshError::Degenerate);
    }
    Ok(m.map(|x| x / v))
}

/// Volume-normalized second moment `eps^2 (1/V) ∫ (y - c)(y - c)^T dV`
/// with mesh coordinates read as cell coordinates `y`.
pub fn second_moment(mesh: &TetMesh, center: [f64; 3], epsilon: f64) -> Result<[[f64; 3]; 3], MeshError> {
    let mut v = 0.0;
    let mut m = [[0.0; 3]; 3];
    for t in 0..mesh.n_tets() {
        let p = mesh.tet_points(t).map(|q| sub(q, center));
        let vol = signed_volume(&p);
        v += vol;
        let s: [f64; 3] = std::array::from_fn(|k| p.iter().map(|q| q[k]).sum());
        // Exact for linear simplices: V/20 (sum_i v_i v_i^T + s s^T).
        for a in 0..3 {
            for b in 0..3 {
                let vv: f64 = p.iter().map(|q| q[a] * q[b]).sum();
                m[a][b] += vol / 20.0 * (vv + s[a] * s[b]);
            }
        }
    }
    if !(v > 0.0) {
        return Err(MeshError::Degenerate);
    }
    let scale = epsilon * epsilon / v;
    Ok(m.map(|row| row.map(|x| x * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::structured_box;

    #[test]
    fn moments_of_box() {
        let mesh = structured_box([2.0, 3.0, 0.5], [4, 3, 2]);
        let c = geometric_center(&mesh).unwrap();
        for (k, expected) in [1.0, 1.5, 0.25].into_iter().enumerate() {
            assert!((c[k] - expected).abs() < 1e-14);
        }
        let i = second_moment(&mesh, c, 1.0).unwrap();
        let expected = [4.0 / 12.0, 9.0 / 12.0, 0.25 / 12.0];
        for a in 0..3 {
            for b in 0..3 {
                let e = if a == b { expected[a] } else { 0.0 };
                assert!((i[a][b] - e).abs() < 1e-13, "{a}{b}: {}", i[a][b]);
            }
        }
        let fm = first_moment(&mesh, c).unwrap();
        assert!(fm.iter().all(|x| x.abs() < 1e-12 * mesh.bbox.diagonal()));
        assert!((mesh.total_volume() - 3.0).abs() < 1e-10 * 3.0);
    }

    #[test]
    fn moment_refinement_invariant() {
        let coarse = structured_box([1.0, 1.0, 1.0], [2, 2, 2]);
        let fine = structured_box([1.0, 1.0, 1.0], [4, 4, 4]);
        let a = second_moment(&coarse, geometric_center(&coarse).unwrap(), 1.0).unwrap();
        let b = second_moment(&fine, geometric_center(&fine).unwrap(), 1.0).unwrap();
        for r in 0..3 {
            for s in 0..3 {
                assert!((a[r][s] - b[r][s]).abs() <= 1e-12 * (1.0 / 12.0));
            }
        }
        assert!((a[0][0] - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn center_translation_equivariance() {
        let mesh = structured_box([1.0, 1.0, 1.0], [3, 3, 3]);
        let shift = [0.3, -2.0, 5.5];
        let c0 = geometric_center(&mesh).unwrap();
        let c1 = geometric_center(&mesh.translated(shift)).unwrap();
        for k in 0..3 {
            assert!((c1[k] - c0[k] - shift[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn honeycomb_box_center() {
        let mesh = structured_box([240.0, 277.12, 20.0], [4, 4, 2]);
        let c = geometric_center(&mesh).unwrap();
        assert!((c[0] - 120.0).abs() < 1e-9);
        assert!((c[1] - 138.56).abs() < 1e-9);
        assert!((c[2] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn epsilon_scales_moment() {
        let mesh = structured_box([1.0, 1.0, 1.0], [2, 2, 2]);
        let c = geometric_center(&mesh).unwrap();
        let a = second_moment(&mesh, c, 1.0).unwrap();
        let b = second_moment(&mesh, c, 0.5).unwrap();
        assert!((b[1][1] - 0.25 * a[1][1]).abs() < 1e-15);
    }

    #[test]
    fn inverted_tet_rejected() {
        let mut mesh = structured_box([1.0, 1.0, 1.0], [1, 1, 1]);
        mesh.tets[0].swap(0, 1);
        assert!(matches!(mesh.validate(), Err(MeshError::InvertedTet { tet: 0, .. })));
    }

    #[test]
    fn congruence_pairs() {
        let mesh = structured_box([1.0, 1.0, 1.0], [3, 3, 3]);
        assert_eq!(mesh.check_face_congruence(1e-9).unwrap(), [16, 16, 16]);
    }

    #[test]
    fn missing_material_detected() {
        let mesh = structured_box([1.0, 1.0, 1.0], [1, 1, 1]);
        let field = MaterialField::new();
        assert!(matches!(field.validate(&mesh), Err(MeshError::MissingMaterial(0))));
    }
}
