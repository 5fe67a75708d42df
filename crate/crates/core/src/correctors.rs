//! First- and second-order cell problems and the derived element fields.
//!
//! Cell coordinates `y` are mesh coordinates measured from the geometric
//! center, with the scale ratio set to one. The first-order corrector of
//! pair `ab` solves
//!     ∫ C_ijkl (δ_ka δ_lb + ∂_l φ_k) ∂_j v_i = 0,
//! and the second-order corrector of triple `abc` solves
//!     ∫ C_ijkl ∂_l ψ_k ∂_j v_i = ∫ (C_ickl L_abkl − C^M_icab) v_i − ∫ C_ijkc φ_abk ∂_j v_i
//! for every periodic test field `v`.

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::assembly::{quad4_barycentric, MaterialTable, TetGeometry};
use crate::fem::periodic::PeriodicMap;
use crate::fem::solver::{LinearSolver, SolverError};
use crate::fem::NodalVectorField;
use crate::mesh::TetMesh;
use crate::tensors::{pair_index, triple_index, Rank4, VoigtTriple, VOIGT_PAIRS};

/// Bound on the net force of a second-order load relative to the largest
/// stiffness entry times the cell volume.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("load for triple {triple} is not self-equilibrated: net force {net:?} (relative {relative:.3e})")]
    Compatibility { triple: String, net: [f64; 3], relative: f64 },
    #[error("point {0:?} is outside the mesh")]
    PointOutside([f64; 3]),
    #[error("second macro gradient is not symmetric in its last two indices")]
    NonSymmetricGradient,
}

/// Read-only view of everything the cell problems need.
pub struct CellContext<'a> {
    pub mesh: &'a TetMesh,
    pub geometry: &'a [TetGeometry],
    pub table: &'a MaterialTable,
    pub map: &'a PeriodicMap,
    pub center: [f64; 3],
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct CorrectorSet {
    /// Indexed by pair.
    pub phi: Vec<NodalVectorField>,
    /// Indexed by triple.
    pub psi: Vec<NodalVectorField>,
}

#[derive(Debug, Clone)]
pub struct PhaseSolve {
    pub fields: Vec<NodalVectorField>,
    pub residuals: Vec<f64>,
    /// Wall time of the linear solves only.
    pub solve_seconds: f64,
    /// Largest relative net force over the loads (second order only).
    pub compatibility: f64,
}

/// Element-constant first-order map `L[A][i][j] = δ_ia δ_jb + ∂_j φ_Ai`.
pub fn l_tensor(phi: &[NodalVectorField], tet: &[usize; 4], geo: &TetGeometry) -> [[[f64; 3]; 3]; 6] {
    std::array::from_fn(|p| {
        let mut l = phi[p].gradient(tet, geo);
        let (a, b) = VOIGT_PAIRS[p];
        l[a][b] += 1.0;
        l
    })
}

fn contract(c: &Rank4, i: usize, j: usize, m: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            s += c[i][j][k][l] * m[k][l];
        }
    }
    s
}

impl CellContext<'_> {
    fn full_len(&self) -> usize {
        3 * self.mesh.n_nodes()
    }

    /// Reduced loads of the six first-order problems.
    pub fn phi_loads(&self) -> Vec<Vec<f64>> {
        (0..6)
            .into_par_iter()
            .map(|p| {
                let (a, b) = VOIGT_PAIRS[p];
                let mut f = vec![0.0; self.full_len()];
                for (t, tet) in self.mesh.tets.iter().enumerate() {
                    let geo = &self.geometry[t];
                    let c = self.table.of(t);
                    for (v, &node) in tet.iter().enumerate() {
                        for i in 0..3 {
                            let s: f64 = (0..3).map(|j| c[i][j][a][b] * geo.grads[v][j]).sum();
                            f[3 * node + i] -= geo.volume * s;
                        }
                    }
                }
                self.map.reduce(&f)
            })
            .collect()
    }

    /// Full (unreduced) load of the second-order problem for `triple`.
    pub fn psi_load_full(&self, phi: &[NodalVectorField], c_m: &Rank4, triple: VoigtTriple) -> Vec<f64> {
        let (a, b, cc) = triple.indices();
        let p = triple.pair().index();
        let bary = quad4_barycentric();
        let mut f = vec![0.0; self.full_len()];
        for (t, tet) in self.mesh.tets.iter().enumerate() {
            let geo = &self.geometry[t];
            let c = self.table.of(t);
            let l = phi[p].gradient(tet, geo);
            let mut lp = l;
            lp[a][b] += 1.0;
            let s: [f64; 3] = std::array::from_fn(|i| contract(c, i, cc, &lp) - c_m[i][cc][a][b]);
            let w = 0.25 * geo.volume;
            for q in 0..4 {
                let phi_q = phi[p].at(tet, &bary[q]);
                // σ_ij = C_ijkc φ_k at this point.
                let sigma: [[f64; 3]; 3] =
                    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| c[i][j][k][cc] * phi_q[k]).sum()));
                for (v, &node) in tet.iter().enumerate() {
                    let nv = bary[q][v];
                    for i in 0..3 {
                        let div: f64 = (0..3).map(|j| sigma[i][j] * geo.grads[v][j]).sum();
                        f[3 * node + i] += w * (s[i] * nv - div);
                    }
                }
            }
        }
        f
    }
}

/// Net force of a load and its size relative to `scale`.
fn net_force(f: &[f64], scale: f64) -> ([f64; 3], f64) {
    let mut net = [0.0; 3];
    for (dof, v) in f.iter().enumerate() {
        net[dof % 3] += v;
    }
    let worst = net.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (net, worst / scale)
}

fn finish(ctx: &CellContext, solutions: Vec<Vec<f64>>) -> Vec<NodalVectorField> {
    solutions
        .into_iter()
        .map(|u| {
            let mut field = NodalVectorField::expand(ctx.map, &u);
            field.remove_mean(ctx.mesh, ctx.geometry);
            field
        })
        .collect()
}

pub fn solve_phi(ctx: &CellContext, solver: &LinearSolver) -> Result<PhaseSolve, CorrectorError> {
    let loads = ctx.phi_loads();
    let out = solver.solve_multi(&loads)?;
    Ok(PhaseSolve {
        fields: finish(ctx, out.solutions),
        residuals: out.residuals,
        solve_seconds: out.seconds,
        compatibility: 0.0,
    })
}

pub fn solve_psi(
    ctx: &CellContext,
    solver: &LinearSolver,
    phi: &[NodalVectorField],
    c_m: &Rank4,
) -> Result<PhaseSolve, CorrectorError> {
    let full: Vec<Vec<f64>> =
        VoigtTriple::all().collect::<Vec<_>>().into_par_iter().map(|t| ctx.psi_load_full(phi, c_m, t)).collect();
    // A unit-strain stress over the whole cell.
    let stiffest = ctx.table.tensors.iter().flatten().flatten().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = stiffest * ctx.volume;
    let mut worst = 0.0_f64;
    for (t, f) in VoigtTriple::all().zip(&full) {
        let (net, rel) = net_force(f, scale);
        if rel > COMPATIBILITY_TOL {
            return Err(CorrectorError::Compatibility { triple: t.label(), net, relative: rel });
        }
        worst = worst.max(rel);
    }
    let loads: Vec<Vec<f64>> = full.iter().map(|f| ctx.map.reduce(f)).collect();
    let out = solver.solve_multi(&loads)?;
    Ok(PhaseSolve {
        fields: finish(ctx, out.solutions),
        residuals: out.residuals,
        solve_seconds: out.seconds,
        compatibility: worst,
    })
}

/// L, N and M of one tet. N and M are affine inside the tet and are
/// sampled at the four points of the degree-2 rule.
#[derive(Debug, Clone)]
pub struct ElementGradientFields {
    pub l: [[[f64; 3]; 3]; 6],
    /// `n[q][alpha][i][j]`.
    pub n: [[[[f64; 3]; 3]; 18]; 4],
    pub m: [[[[f64; 3]; 3]; 18]; 4],
    /// Cell coordinates of the quadrature points, relative to the center.
    pub y: [[f64; 3]; 4],
}

pub fn element_fields(ctx: &CellContext, correctors: &CorrectorSet, t: usize) -> ElementGradientFields {
    let tet = &ctx.mesh.tets[t];
    let geo = &ctx.geometry[t];
    let l = l_tensor(&correctors.phi, tet, geo);
    let bary = quad4_barycentric();
    let qp = geo.quad_points();
    let y: [[f64; 3]; 4] = std::array::from_fn(|q| std::array::from_fn(|k| qp[q][k] - ctx.center[k]));
    let dpsi: [[[f64; 3]; 3]; 18] = std::array::from_fn(|al| correctors.psi[al].gradient(tet, geo));
    let mut n = [[[[0.0; 3]; 3]; 18]; 4];
    let mut m = [[[[0.0; 3]; 3]; 18]; 4];
    for q in 0..4 {
        let phi_q: [[f64; 3]; 6] = std::array::from_fn(|p| correctors.phi[p].at(tet, &bary[q]));
        for al in 0..18 {
            let p = al % 6;
            let c = al / 6;
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = dpsi[al][i][j];
                    if j == c {
                        v += phi_q[p][i];
                    }
                    n[q][al][i][j] = v;
                    m[q][al][i][j] = y[q][c] * l[p][i][j] + v;
                }
            }
        }
    }
    ElementGradientFields { l, n, m, y }
}

fn barycentric(points: &[[f64; 3]; 4], x: [f64; 3]) -> [f64; 4] {
    let geo = TetGeometry::new(*points);
    // λ_v(x) = λ_v(p0) + ∇λ_v · (x − p0).
    std::array::from_fn(|v| {
        let base = if v == 0 { 1.0 } else { 0.0 };
        base + (0..3).map(|k| geo.grads[v][k] * (x[k] - points[0][k])).sum::<f64>()
    })
}

/// Two-scale displacement at a cell point `y`:
/// `u_i = g_ij d_j + ½ h_ijk d_j d_k + ε g_ab φ_abi(y) + ε² h_abc ψ_abci(y)`
/// with `d = ε (y − center)`. Indices of `h` are (component, derivative,
/// derivative).
pub fn reconstruct_micro_displacement(
    ctx: &CellContext,
    correctors: &CorrectorSet,
    point: [f64; 3],
    macro_grad: &[[f64; 3]; 3],
    macro_grad2: &[[[f64; 3]; 3]; 3],
    epsilon: f64,
) -> Result<[f64; 3], CorrectorError> {
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..b {
                let (x, y) = (macro_grad2[a][b][c], macro_grad2[a][c][b]);
                if (x - y).abs() > 1e-12 * (x.abs() + y.abs()).max(f64::MIN_POSITIVE) {
                    return Err(CorrectorError::NonSymmetricGradient);
                }
            }
        }
    }
    let tol = 1e-12;
    let found = (0..ctx.mesh.n_tets()).find_map(|t| {
        let bary = barycentric(&ctx.mesh.tet_points(t), point);
        bary.iter().all(|&w| w >= -tol).then_some((t, bary))
    });
    let Some((t, bary)) = found else {
        return Err(CorrectorError::PointOutside(point));
    };
    let tet = &ctx.mesh.tets[t];
    let d: [f64; 3] = std::array::from_fn(|k| epsilon * (point[k] - ctx.center[k]));
    let mut u = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            u[i] += macro_grad[i][j] * d[j];
            for k in 0..3 {
                u[i] += 0.5 * macro_grad2[i][j][k] * d[j] * d[k];
            }
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            let phi = correctors.phi[pair_index(a, b)].at(tet, &bary);
            for i in 0..3 {
                u[i] += epsilon * macro_grad[a][b] * phi[i];
            }
            for c in 0..3 {
                let psi = correctors.psi[triple_index(a, b, c)].at(tet, &bary);
                for i in 0..3 {
                    u[i] += epsilon * epsilon * macro_grad2[a][b][c] * psi[i];
                }
            }
        }
    }
    Ok(u)
}
