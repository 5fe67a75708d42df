//! Generators for canonical periodic cells on structured tet grids.
//!
//! Every generator meshes the full box with a tensor grid of hexahedra,
//! each split into the six tets that share its main diagonal. The split is
//! translation invariant, so opposite faces always match, and it is
//! symmetric under point reflection when the grid coordinates are.

use serde::{Deserialize, Serialize};

use super::{signed_volume, Aabb, MaterialField, MeshError, TetMesh};
use crate::tensors::{isotropic_stiffness, IsotropicPhase};

/// Poisson ratio given to the derived void phase.
pub const VOID_POISSON: f64 = 0.35;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RveGeometry {
    /// Box edge lengths (m).
    pub dimensions: [f64; 3],
    /// Target element edge length (m).
    pub resolution: f64,
    #[serde(flatten)]
    pub shape: RveShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RveShape {
    Homogeneous,
    /// Phase 0 fills a band of `fractions[0]` centered in the box, phase 1
    /// the remainder. `normal_axis` is 1-based.
    Laminate { normal_axis: usize, fractions: [f64; 2] },
    /// Phase 1 fills the centered cube `center ± half_width_fraction * L`.
    CubicInclusion { half_width_fraction: f64 },
    /// Hexagonal walls extruded along axis 3. Phase 0 is the wall material;
    /// phase 1 (or a derived soft phase) fills the rest.
    Honeycomb {
        walls: WallSpec,
        #[serde(default)]
        layout: HoneycombLayout,
        #[serde(default)]
        orientation: Orientation,
        /// In-plane shift of the hexagon lattice (m).
        #[serde(default)]
        lattice_offset: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallSpec {
    /// Solid volume fraction; the wall thickness is solved for.
    Infill(f64),
    /// Wall thickness (m).
    Thickness(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoneycombLayout {
    /// One hexagon inscribed in the box.
    #[default]
    SingleCell,
    /// Regular honeycomb tiling stretched to fit `cells` rectangular
    /// periods along axes 1 and 2.
    Tiled { cells: [usize; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Vertices point along axis 2.
    #[default]
    Pointy,
    /// Vertices point along axis 1.
    Flat,
}

#[derive(Debug, Clone)]
pub struct GeneratedRve {
    pub mesh: TetMesh,
    pub materials: MaterialField,
    /// Volume fraction of phase 0 for two-phase cells.
    pub solid_fraction: Option<f64>,
    pub wall_thickness: Option<f64>,
}

fn axis_coords(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        for s in 1..n {
            out.push(w[0] + len * s as f64 / n as f64);
        }
        out.push(w[1]);
    }
    out
}

fn uniform_coords(length: f64, h: f64) -> Vec<f64> {
    axis_coords(&[0.0, length], h)
}

/// Six-tets-per-hex grid over the tensor product of `coords`.
pub fn kuhn_grid(coords: &[Vec<f64>; 3]) -> (Vec<[f64; 3]>, Vec<[usize; 4]>) {
    let n = [coords[0].len(), coords[1].len(), coords[2].len()];
    let id = |i: usize, j: usize, k: usize| i + n[0] * (j + n[1] * k);
    let mut nodes = Vec::with_capacity(n[0] * n[1] * n[2]);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                nodes.push([coords[0][i], coords[1][j], coords[2][k]]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::with_capacity(6 * (n[0] - 1) * (n[1] - 1) * (n[2] - 1));
    for k in 0..n[2] - 1 {
        for j in 0..n[1] - 1 {
            for i in 0..n[0] - 1 {
                for p in PERMS {
                    let mut corner = [i, j, k];
                    let mut tet = [id(i, j, k), 0, 0, 0];
                    for (s, &axis) in p.iter().enumerate() {
                        corner[axis] += 1;
                        tet[s + 1] = id(corner[0], corner[1], corner[2]);
                    }
                    if signed_volume(&tet.map(|v| nodes[v])) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    (nodes, tets)
}

/// Single-region box `[0, L]` with `divisions` hexes per axis.
pub fn structured_box(lengths: [f64; 3], divisions: [usize; 3]) -> TetMesh {
    let coords: [Vec<f64>; 3] = std::array::from_fn(|a| {
        (0..=divisions[a]).map(|s| lengths[a] * s as f64 / divisions[a] as f64).collect()
    });
    let (nodes, tets) = kuhn_grid(&coords);
    let tags = vec![0; tets.len()];
    TetMesh::new(nodes, tets, tags, Aabb::from_lengths(lengths)).expect("structured grid is valid")
}

fn check_common(geom: &RveGeometry) -> Result<(), MeshError> {
    if geom.dimensions.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(MeshError::InvalidGeometry(format!("dimensions must be positive, got {:?}", geom.dimensions)));
    }
    if !(geom.resolution > 0.0 && geom.resolution.is_finite()) {
        return Err(MeshError::InvalidGeometry(format!("resolution must be positive, got {}", geom.resolution)));
    }
    Ok(())
}

fn phase_count(phases: &[IsotropicPhase], needed: usize, kind: &str) -> Result<(), MeshError> {
    if phases.len() < needed {
        return Err(MeshError::InvalidGeometry(format!("{kind} needs {needed} phase(s), got {}", phases.len())));
    }
    Ok(())
}

fn in_unit_interval(x: f64, what: &str) -> Result<(), MeshError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(MeshError::InvalidGeometry(format!("{what} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

fn materials_for(phases: &[IsotropicPhase]) -> Result<MaterialField, MeshError> {
    let mut field = MaterialField::new();
    for p in phases {
        field.insert(p.phase_id, isotropic_stiffness(p).map_err(|e| MeshError::InvalidGeometry(e.to_string()))?);
    }
    Ok(field)
}

fn tag_by_centroid(nodes: &[[f64; 3]], tets: &[[usize; 4]], f: impl Fn([f64; 3]) -> u32) -> Vec<u32> {
    tets.iter()
        .map(|t| {
            let c = std::array::from_fn(|k| 0.25 * t.iter().map(|&v| nodes[v][k]).sum::<f64>());
            f(c)
        })
        .collect()
}

pub fn generate(
    geom: &RveGeometry,
    phases: &[IsotropicPhase],
    void_contrast: f64,
) -> Result<GeneratedRve, MeshError> {
    check_common(geom)?;
    let l = geom.dimensions;
    let h = geom.resolution;
    let bbox = Aabb::from_lengths(l);
    match &geom.shape {
        RveShape::Homogeneous => {
            phase_count(phases, 1, "homogeneous cell")?;
            let coords = std::array::from_fn(|a| uniform_coords(l[a], h));
            let (nodes, tets) = kuhn_grid(&coords);
            let tags = vec![phases[0].phase_id; tets.len()];
            let mesh = TetMesh::new(nodes, tets, tags, bbox)?;
            let materials = materials_for(&phases[..1])?;
            Ok(GeneratedRve { mesh, materials, solid_fraction: None, wall_thickness: None })
        }
        RveShape::Laminate { normal_axis, fractions } => {
            phase_count(phases, 2, "laminate")?;
            if !(1..=3).contains(normal_axis) {
                return Err(MeshError::InvalidGeometry(format!("normal_axis must be 1, 2 or 3, got {normal_axis}")));
            }
            in_unit_interval(fractions[0], "laminate fraction")?;
            in_unit_interval(fractions[1], "laminate fraction")?;
            if (fractions[0] + fractions[1] - 1.0).abs() > 1e-12 {
                return Err(MeshError::InvalidGeometry(format!("laminate fractions must sum to 1, got {fractions:?}")));
            }
            let n = normal_axis - 1;
            let lo = 0.5 * (1.0 - fractions[0]) * l[n];
            let hi = l[n] - lo;
            let coords = std::array::from_fn(|a| {
                if a == n {
                    axis_coords(&[0.0, lo, hi, l[n]], h)
                } else {
                    uniform_coords(l[a], h)
                }
            });
            let (nodes, tets) = kuhn_grid(&coords);
            let (inner, outer) = (phases[0].phase_id, phases[1].phase_id);
            let tags = tag_by_centroid(&nodes, &tets, |c| if c[n] > lo && c[n] < hi { inner } else { outer });
            let mesh = TetMesh::new(nodes, tets, tags, bbox)?;
            let fraction = mesh.region_volume(inner) / mesh.total_volume();
            let materials = materials_for(&phases[..2])?;
            Ok(GeneratedRve { mesh, materials, solid_fraction: Some(fraction), wall_thickness: None })
        }
        RveShape::CubicInclusion { half_width_fraction: w } => {
            phase_count(phases, 2, "cubic inclusion")?;
            if !(*w > 0.0 && *w < 0.5) {
                return Err(MeshError::InvalidGeometry(format!("half_width_fraction must lie in (0, 0.5), got {w}")));
            }
            let band: [(f64, f64); 3] = std::array::from_fn(|a| ((0.5 - w) * l[a], (0.5 + w) * l[a]));
            let coords = std::array::from_fn(|a| axis_coords(&[0.0, band[a].0, band[a].1, l[a]], h));
            let (nodes, tets) = kuhn_grid(&coords);
            let (matrix, inclusion) = (phases[0].phase_id, phases[1].phase_id);
            let tags = tag_by_centroid(&nodes, &tets, |c| {
                if (0..3).all(|a| c[a] > band[a].0 && c[a] < band[a].1) {
                    inclusion
                } else {
                    matrix
                }
            });
            let mesh = TetMesh::new(nodes, tets, tags, bbox)?;
            let fraction = mesh.region_volume(matrix) / mesh.total_volume();
            let materials = materials_for(&phases[..2])?;
            Ok(GeneratedRve { mesh, materials, solid_fraction: Some(fraction), wall_thickness: None })
        }
        RveShape::Honeycomb { walls, layout, orientation, lattice_offset } => {
            phase_count(phases, 1, "honeycomb")?;
            let solid = phases[0];
            let void = match phases.get(1) {
                Some(p) => *p,
                None => {
                    if !(void_contrast > 0.0) {
                        return Err(MeshError::InvalidGeometry(format!("void_contrast must be positive, got {void_contrast}")));
                    }
                    let id = phases.iter().map(|p| p.phase_id).max().unwrap_or(0) + 1;
                    IsotropicPhase::new(solid.young_modulus * void_contrast, VOID_POISSON, id)
                }
            };
            let lattice = HexLattice::new(l, *layout, *orientation, *lattice_offset)?;
            let coords = std::array::from_fn(|a| uniform_coords(l[a], h));
            let h_plane = (coords[0][1] - coords[0][0]).max(coords[1][1] - coords[1][0]);
            let (nodes, tets) = kuhn_grid(&coords);
            let dist: Vec<f64> = tets
                .iter()
                .map(|t| {
                    let cx = 0.25 * t.iter().map(|&v| nodes[v][0]).sum::<f64>();
                    let cy = 0.25 * t.iter().map(|&v| nodes[v][1]).sum::<f64>();
                    lattice.wall_distance([cx, cy])
                })
                .collect();
            let vols: Vec<f64> = tets.iter().map(|t| signed_volume(&t.map(|v| nodes[v]))).collect();
            let total: f64 = vols.iter().sum();
            let thickness = match *walls {
                WallSpec::Thickness(t) => {
                    if !(t > 0.0) {
                        return Err(MeshError::InvalidGeometry(format!("wall thickness must be positive, got {t}")));
                    }
                    t
                }
                WallSpec::Infill(target) => {
                    in_unit_interval(target, "infill")?;
                    thickness_for_infill(&dist, &vols, total, target, 1e-9 * l[0].max(l[1]))?
                }
            };
            if thickness < 2.0 * h_plane {
                return Err(MeshError::Resolution(format!(
                    "wall thickness {thickness:.4e} spans fewer than two elements of size {h_plane:.4e}"
                )));
            }
            let tags: Vec<u32> = dist
                .iter()
                .map(|&d| if d < 0.5 * thickness { solid.phase_id } else { void.phase_id })
                .collect();
            let mesh = TetMesh::new(nodes, tets, tags, bbox)?;
            let fraction = mesh.region_volume(solid.phase_id) / mesh.total_volume();
            if let WallSpec::Infill(target) = *walls {
                if (fraction - target).abs() > 0.01 {
                    return Err(MeshError::Resolution(format!(
                        "reached infill {fraction:.4} for target {target:.4}; refine the resolution"
                    )));
                }
            }
            let materials = materials_for(&[solid, void])?;
            Ok(GeneratedRve { mesh, materials, solid_fraction: Some(fraction), wall_thickness: Some(thickness) })
        }
    }
}

/// Wall thickness whose solid fraction is closest to `target`. The solid
/// fraction is a step function of the thickness, so the search runs over
/// the sorted wall distances rather than a continuous bisection. Distances
/// closer than `tie` count as equal, so mirror-image tets whose distances
/// differ by round-off always land on the same side.
fn thickness_for_infill(dist: &[f64], vols: &[f64], total: f64, target: f64, tie: f64) -> Result<f64, MeshError> {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut best: Option<(f64, f64)> = None;
    for (rank, &t) in order.iter().enumerate() {
        acc += vols[t];
        let next = order.get(rank + 1).map(|&u| dist[u]);
        if next.is_some_and(|d| d - dist[t] <= tie) {
            continue;
        }
        let frac = acc / total;
        let err = (frac - target).abs();
        let half = match next {
            Some(d) => 0.5 * (dist[t] + d),
            None => dist[t] * (1.0 + 1e-12) + f64::MIN_POSITIVE,
        };
        if best.is_none_or(|(e, _)| err < e) {
            best = Some((err, half));
        }
    }
    match best {
        Some((err, half)) if err <= 0.01 => Ok(2.0 * half),
        Some((err, _)) => Err(MeshError::Infeasible(format!(
            "closest reachable infill misses the target {target} by {err:.4}"
        ))),
        None => Err(MeshError::Infeasible("empty mesh".into())),
    }
}

/// Periodic hexagon lattice in the plane of axes 1 and 2.
#[derive(Debug, Clone)]
pub struct HexLattice {
    origin: [f64; 2],
    a1: [f64; 2],
    a2: [f64; 2],
    vertices: [[f64; 2]; 6],
}

impl HexLattice {
    pub fn new(
        l: [f64; 3],
        layout: HoneycombLayout,
        orientation: Orientation,
        offset: [f64; 2],
    ) -> Result<Self, MeshError> {
        let (lx, ly) = (l[0], l[1]);
        let origin = [0.5 * lx + offset[0], 0.5 * ly + offset[1]];
        let s3 = 3.0_f64.sqrt();
        let flip = |p: [f64; 2]| match orientation {
            Orientation::Flat => p,
            Orientation::Pointy => [p[1], p[0]],
        };
        match layout {
            HoneycombLayout::SingleCell => {
                let (hx, hy) = match orientation {
                    Orientation::Flat => (lx, ly),
                    Orientation::Pointy => (ly, lx),
                };
                let base = [
                    [0.5 * hx, 0.0],
                    [0.25 * hx, 0.5 * hy],
                    [-0.25 * hx, 0.5 * hy],
                    [-0.5 * hx, 0.0],
                    [-0.25 * hx, -0.5 * hy],
                    [0.25 * hx, -0.5 * hy],
                ];
                Ok(Self { origin, a1: [lx, 0.0], a2: [0.0, ly], vertices: base.map(flip) })
            }
            HoneycombLayout::Tiled { cells } => {
                if cells[0] == 0 || cells[1] == 0 {
                    return Err(MeshError::InvalidGeometry("tiled honeycomb needs at least one cell per axis".into()));
                }
                // Unit-circumradius flat-top tiling has rectangular period (3, sqrt 3).
                let period = flip([3.0, s3]);
                let sx = lx / (period[0] * cells[0] as f64);
                let sy = ly / (period[1] * cells[1] as f64);
                let scale = |p: [f64; 2]| {
                    let q = flip(p);
                    [q[0] * sx, q[1] * sy]
                };
                let vertices = std::array::from_fn(|k| {
                    let a = std::f64::consts::FRAC_PI_3 * k as f64;
                    scale([a.cos(), a.sin()])
                });
                Ok(Self { origin, a1: scale([1.5, 0.5 * s3]), a2: scale([0.0, s3]), vertices })
            }
        }
    }

    /// Distance from `p` to the nearest hexagon wall centerline.
    pub fn wall_distance(&self, p: [f64; 2]) -> f64 {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        let det = self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0];
        let s = (d[0] * self.a2[1] - d[1] * self.a2[0]) / det;
        let t = (self.a1[0] * d[1] - self.a1[1] * d[0]) / det;
        let (si, ti) = (s.floor() as i64, t.floor() as i64);
        let mut best = f64::INFINITY;
        for i in si - 2..=si + 2 {
            for j in ti - 2..=ti + 2 {
                let c = [
                    self.origin[0] + i as f64 * self.a1[0] + j as f64 * self.a2[0],
                    self.origin[1] + i as f64 * self.a1[1] + j as f64 * self.a2[1],
                ];
                let q = [p[0] - c[0], p[1] - c[1]];
                for e in 0..6 {
                    best = best.min(segment_distance(q, self.vertices[e], self.vertices[(e + 1) % 6]));
                }
            }
        }
        best
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phase(e: f64, id: u32) -> IsotropicPhase {
        IsotropicPhase::new(e, 0.0, id)
    }

    #[test]
    fn homogeneous_counts() {
        let geom = RveGeometry { dimensions: [1.0; 3], resolution: 0.25, shape: RveShape::Homogeneous };
        let rve = generate(&geom, &[phase(1.0, 0)], 1e-6).unwrap();
        // 4^3 hexes, 6 tets each; 5^3 grid nodes.
        assert_eq!(rve.mesh.n_tets(), 4 * 4 * 4 * 6);
        assert_eq!(rve.mesh.n_nodes(), 125);
        assert_eq!(rve.mesh.tags(), vec![0]);
        assert!((rve.mesh.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laminate_split() {
        let geom = RveGeometry {
            dimensions: [1.0; 3],
            resolution: 0.25,
            shape: RveShape::Laminate { normal_axis: 1, fractions: [0.5, 0.5] },
        };
        let rve = generate(&geom, &[phase(100.0, 0), phase(50.0, 1)], 1e-6).unwrap();
        let m = &rve.mesh;
        for t in 0..m.n_tets() {
            let x = m.centroid(t)[0];
            let inner = x > 0.25 && x < 0.75;
            assert_eq!(m.region_tag[t], if inner { 0 } else { 1 });
            let p = m.tet_points(t);
            let (lo, hi) = p.iter().fold((f64::MAX, f64::MIN), |(a, b), q| (a.min(q[0]), b.max(q[0])));
            assert!(!(lo < 0.25 && hi > 0.25) && !(lo < 0.75 && hi > 0.75), "tet straddles an interface");
        }
        assert!((m.region_volume(0) / m.total_volume() - 0.5).abs() < 1e-14);
        assert!((m.region_volume(1) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn laminate_rejects_bad_fractions() {
        let geom = RveGeometry {
            dimensions: [1.0; 3],
            resolution: 0.25,
            shape: RveShape::Laminate { normal_axis: 1, fractions: [0.5, 0.6] },
        };
        assert!(matches!(generate(&geom, &[phase(1.0, 0), phase(2.0, 1)], 1e-6), Err(MeshError::InvalidGeometry(_))));
    }

    #[test]
    fn inclusion_volume() {
        let geom = RveGeometry {
            dimensions: [2.0, 2.0, 2.0],
            resolution: 0.5,
            shape: RveShape::CubicInclusion { half_width_fraction: 0.25 },
        };
        let rve = generate(&geom, &[phase(1.0, 0), phase(10.0, 1)], 1e-6).unwrap();
        assert!((rve.mesh.region_volume(1) - 1.0).abs() < 1e-12);
    }

    fn honeycomb(offset: [f64; 2], layout: HoneycombLayout, h: f64) -> Result<GeneratedRve, MeshError> {
        let geom = RveGeometry {
            dimensions: [0.240, 0.27712, 0.020],
            resolution: h,
            shape: RveShape::Honeycomb {
                walls: WallSpec::Infill(0.5),
                layout,
                orientation: Orientation::Pointy,
                lattice_offset: offset,
            },
        };
        generate(&geom, &[IsotropicPhase::new(110e9, 0.35, 0)], 1e-6)
    }

    #[test]
    fn honeycomb_infill_and_void_phase() {
        let rve = honeycomb([0.0, 0.0], HoneycombLayout::SingleCell, 0.01).unwrap();
        let f = rve.solid_fraction.unwrap();
        assert!((0.49..=0.51).contains(&f), "{f}");
        assert_eq!(rve.mesh.tags(), vec![0, 1]);
        let void = rve.materials.get(1).unwrap();
        assert!((void.get(0, 0, 0, 0) / rve.materials.get(0).unwrap().get(0, 0, 0, 0) - 1e-6).abs() < 1e-15);
        assert!(rve.mesh.check_face_congruence(1e-12).is_ok());
    }

    #[test]
    fn centered_honeycomb_is_point_symmetric() {
        for h in [0.01, 0.008] {
            let rve = honeycomb([0.0, 0.0], HoneycombLayout::SingleCell, h).unwrap();
            let m = &rve.mesh;
            let center = m.bbox.midpoint();
            let mut moment = [0.0; 3];
            for t in (0..m.n_tets()).filter(|&t| m.region_tag[t] == 0) {
                let c = m.centroid(t);
                let v = m.tet_volume(t);
                (0..3).for_each(|k| moment[k] += v * (c[k] - center[k]));
            }
            let scale = m.total_volume() * m.bbox.diagonal();
            assert!(moment.iter().all(|x| x.abs() < 1e-12 * scale), "h = {h}: {moment:?}");
        }
    }

    #[test]
    fn honeycomb_lattice_translation() {
        let a = honeycomb([0.0, 0.0], HoneycombLayout::SingleCell, 0.01).unwrap();
        let b = honeycomb([0.240, 0.0], HoneycombLayout::SingleCell, 0.01).unwrap();
        assert!((a.solid_fraction.unwrap() - b.solid_fraction.unwrap()).abs() < 1e-6);
        let layout = HoneycombLayout::Tiled { cells: [1, 1] };
        let c = honeycomb([0.0, 0.0], layout, 0.01).unwrap();
        // One lattice vector of the stretched tiling.
        let d = honeycomb([0.5 * 0.240, 0.25 * 0.27712], layout, 0.01).unwrap();
        assert!((c.solid_fraction.unwrap() - d.solid_fraction.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn honeycomb_resolution_error() {
        assert!(matches!(
            honeycomb([0.0, 0.0], HoneycombLayout::SingleCell, 0.05),
            Err(MeshError::Resolution(_))
        ));
    }

    #[test]
    fn honeycomb_infeasible_thin_wall() {
        let geom = RveGeometry {
            dimensions: [0.240, 0.27712, 0.020],
            resolution: 0.01,
            shape: RveShape::Honeycomb {
                walls: WallSpec::Thickness(0.001),
                layout: HoneycombLayout::SingleCell,
                orientation: Orientation::Pointy,
                lattice_offset: [0.0; 2],
            },
        };
        assert!(matches!(
            generate(&geom, &[IsotropicPhase::new(110e9, 0.35, 0)], 1e-6),
            Err(MeshError::Resolution(_))
        ));
    }

    #[test]
    fn single_cell_is_regular_for_reference_box() {
        let lat = HexLattice::new([0.240, 0.27712, 0.02], HoneycombLayout::SingleCell, Orientation::Pointy, [0.0; 2])
            .unwrap();
        let v = lat.vertices;
        let edges: Vec<f64> = (0..6).map(|e| (v[e][0] - v[(e + 1) % 6][0]).hypot(v[e][1] - v[(e + 1) % 6][1])).collect();
        for e in &edges {
            assert!((e / edges[0] - 1.0).abs() < 1e-4, "{edges:?}");
        }
    }

    #[test]
    fn geometry_json_shape() {
        let geom: RveGeometry = serde_json::from_str(
            r#"{"kind":"laminate","dimensions":[1,1,1],"resolution":0.25,"normal_axis":1,"fractions":[0.5,0.5]}"#,
        )
        .unwrap();
        assert_eq!(geom.shape, RveShape::Laminate { normal_axis: 1, fractions: [0.5, 0.5] });
        let hc: RveGeometry = serde_json::from_str(
            r#"{"kind":"honeycomb","dimensions":[0.24,0.27712,0.02],"resolution":0.005,"walls":{"infill":0.5}}"#,
        )
        .unwrap();
        assert!(matches!(hc.shape, RveShape::Honeycomb { layout: HoneycombLayout::SingleCell, .. }));
    }
}
