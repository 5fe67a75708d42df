//! Volume integrals of the corrector fields: effective C, G and D.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correctors::{element_fields, l_tensor, CellContext, CorrectorSet};
use crate::fem::assembly::quad4_barycentric;
use crate::fem::NodalVectorField;
use crate::tensors::{
    check_spectrum, pair_index, pair_labels, triple_index, triple_labels, Stiffness4, Tensor5, Tensor6, TensorError,
};

/// Largest tolerated relative asymmetry of the raw D integral.
pub const D_ASYMMETRY_TOL: f64 = 1e-6;

/// Tets per reduction chunk. Partial sums are combined in chunk order so
/// the result does not depend on the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum EffectiveError {
    #[error("effective stiffness: {0}")]
    Stiffness(#[from] TensorError),
    #[error("strain-gradient integral is asymmetric: relative deviation {0:.3e} exceeds {D_ASYMMETRY_TOL:.0e}")]
    Asymmetry(f64),
}

fn chunked_sum<T, F>(n: usize, zero: T, f: F) -> T
where
    T: Send + Copy + std::ops::AddAssign,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let parts: Vec<T> = starts.par_iter().map(|&s| f(s..(s + CHUNK).min(n))).collect();
    let mut acc = zero;
    for p in parts {
        acc += p;
    }
    acc
}

#[derive(Clone, Copy)]
struct Mat6([[f64; 6]; 6]);

impl std::ops::AddAssign for Mat6 {
    fn add_assign(&mut self, o: Self) {
        for a in 0..6 {
            for b in 0..6 {
                self.0[a][b] += o.0[a][b];
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Moments {
    g: [[f64; 18]; 6],
    d: [[f64; 18]; 18],
}

impl std::ops::AddAssign for Moments {
    fn add_assign(&mut self, o: Self) {
        for a in 0..6 {
            for b in 0..18 {
                self.g[a][b] += o.g[a][b];
            }
        }
        for a in 0..18 {
            for b in 0..18 {
                self.d[a][b] += o.d[a][b];
            }
        }
    }
}

fn stress(c: &crate::tensors::Rank4, m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    s += c[i][j][k][l] * m[k][l];
                }
            }
            s
        })
    })
}

fn ddot(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    (0..3).map(|i| (0..3).map(|j| a[i][j] * b[i][j]).sum::<f64>()).sum()
}

/// `(1/V) ∫ C_ijkl L_Aij L_Bkl dV`, exact for element-constant integrands.
pub fn compute_c(ctx: &CellContext, phi: &[NodalVectorField]) -> Result<Stiffness4, EffectiveError> {
    let acc = chunked_sum(ctx.mesh.n_tets(), Mat6([[0.0; 6]; 6]), |range| {
        let mut m = [[0.0; 6]; 6];
        for t in range {
            let geo = &ctx.geometry[t];
            let c = ctx.table.of(t);
            let l = l_tensor(phi, &ctx.mesh.tets[t], geo);
            let s: [[[f64; 3]; 3]; 6] = std::array::from_fn(|p| stress(c, &l[p]));
            for a in 0..6 {
                for b in 0..6 {
                    m[a][b] += geo.volume * ddot(&s[a], &l[b]);
                }
            }
        }
        Mat6(m)
    });
    Ok(Stiffness4::from_matrix(acc.0.map(|r| r.map(|v| v / ctx.volume)))?)
}

/// Raw coupling and strain-gradient integrals (per ε and per ε²):
/// `Ḡ_{A,α} = (1/V) ∫ C L_A M_α` and `D̄_{αβ} = (1/V) ∫ C M_α M_β`.
pub fn gradient_moments(ctx: &CellContext, correctors: &CorrectorSet) -> (Tensor5, Tensor6) {
    let zero = Moments { g: [[0.0; 18]; 6], d: [[0.0; 18]; 18] };
    let acc = chunked_sum(ctx.mesh.n_tets(), zero, |range| {
        let mut acc = zero;
        for t in range {
            let geo = &ctx.geometry[t];
            let c = ctx.table.of(t);
            let ef = element_fields(ctx, correctors, t);
            let w = 0.25 * geo.volume;
            let sl: [[[f64; 3]; 3]; 6] = std::array::from_fn(|p| stress(c, &ef.l[p]));
            for q in 0..4 {
                let m = &ef.m[q];
                let sm: [[[f64; 3]; 3]; 18] = std::array::from_fn(|al| stress(c, &m[al]));
                for a in 0..6 {
                    for al in 0..18 {
                        acc.g[a][al] += w * ddot(&sl[a], &m[al]);
                    }
                }
                for al in 0..18 {
                    for be in 0..18 {
                        acc.d[al][be] += w * ddot(&sm[al], &m[be]);
                    }
                }
            }
        }
        acc
    });
    let inv = 1.0 / ctx.volume;
    (Tensor5 { entries: acc.g.map(|r| r.map(|v| v * inv)) }, Tensor6 { entries: acc.d.map(|r| r.map(|v| v * inv)) })
}

/// `D^M_{ijk,lmn} = D̄_{ijk,lmn} − C^M_{ijlm} Ī_kn` after symmetrizing D̄.
/// Returns `(D^M, symmetrized D̄, pre-symmetrization asymmetry)`.
pub fn compute_d(d_bar: &Tensor6, c_m: &Stiffness4, i_bar: &[[f64; 3]; 3]) -> Result<(Tensor6, Tensor6, f64), EffectiveError> {
    let asym = d_bar.relative_asymmetry();
    if asym > D_ASYMMETRY_TOL {
        return Err(EffectiveError::Asymmetry(asym));
    }
    let sym = d_bar.symmetrized();
    let mut d = sym;
    for al in 0..18 {
        for be in 0..18 {
            let (a, k) = (al % 6, al / 6);
            let (b, n) = (be % 6, be / 6);
            d.entries[al][be] -= c_m.entries[a][b] * i_bar[k][n];
        }
    }
    Ok((d, sym, asym))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMetadata {
    pub corrector_gauge: String,
    pub rigid_mode_policy: String,
    pub moment_normalization: String,
    pub position_dependent_term: String,
    pub epsilon_convention: String,
    pub d_asymmetry_before_symmetrization: f64,
    pub c_eigenvalues: [f64; 6],
    /// Smallest eigenvalue of the packed 18x18 D matrix.
    pub d_min_eigenvalue: f64,
    pub d_positive_semidefinite: bool,
    pub psi_load_max_net_force: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationResult {
    pub c_m: Stiffness4,
    pub g_m_per_eps: Tensor5,
    pub d_m_per_eps2: Tensor6,
    /// Symmetrized raw integral behind `d_m_per_eps2`.
    pub d_bar_per_eps2: Tensor6,
    pub i_bar: [[f64; 3]; 3],
    pub volume: f64,
    pub center: [f64; 3],
    pub epsilon: f64,
    pub box_diagonal: f64,
    pub metadata: ResultMetadata,
}

/// `d_scale` is the natural magnitude of D used to tell round-off from a
/// genuinely negative eigenvalue.
pub fn default_metadata(d_m: &Tensor6, c_m: &Stiffness4, d_scale: f64, d_asym: f64, psi_net: f64) -> ResultMetadata {
    let dm = DMatrix::from_fn(18, 18, |a, b| d_m.entries[a][b]);
    let min_ev = dm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    ResultMetadata {
        corrector_gauge: "zero volume mean for all first- and second-order correctors".into(),
        rigid_mode_policy: "pin the master node nearest the geometric center among nodes of the stiffest phase, then shift to zero mean".into(),
        moment_normalization: "I_bar = (1/V) ∫ (y - y_c)(y - y_c) dV over the whole cell".into(),
        position_dependent_term: "2 eps y_k G term dropped: its volume average about the center vanishes".into(),
        epsilon_convention: "G stored per eps, D per eps^2; cell coordinates use eps = 1".into(),
        d_asymmetry_before_symmetrization: d_asym,
        c_eigenvalues: check_spectrum(c_m),
        d_min_eigenvalue: min_ev,
        d_positive_semidefinite: min_ev >= -1e-9 * d_scale,
        psi_load_max_net_force: psi_net,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    #[serde(rename = "C")]
    pub c: String,
    #[serde(rename = "G")]
    pub g: String,
    #[serde(rename = "D")]
    pub d: String,
    pub length: String,
}

/// Serialized result. Key names are part of the external interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub voigt_order_pairs: Vec<String>,
    pub voigt_order_triples: Vec<String>,
    #[serde(rename = "C")]
    pub c: Stiffness4,
    #[serde(rename = "G")]
    pub g: Tensor5,
    #[serde(rename = "D")]
    pub d: Tensor6,
    pub units: Units,
    pub epsilon: f64,
    pub volume: f64,
    pub center: [f64; 3],
    #[serde(rename = "I_bar")]
    pub i_bar: [[f64; 3]; 3],
    pub metadata: ResultMetadata,
}

impl HomogenizationResult {
    pub fn document(&self) -> ResultDocument {
        ResultDocument {
            voigt_order_pairs: pair_labels(),
            voigt_order_triples: triple_labels(),
            c: self.c_m,
            g: self.g_m_per_eps,
            d: self.d_m_per_eps2,
            units: Units {
                c: "Pa".into(),
                g: "N/m per eps".into(),
                d: "N per eps^2".into(),
                length: "m".into(),
            },
            epsilon: self.epsilon,
            volume: self.volume,
            center: self.center,
            i_bar: self.i_bar,
            metadata: self.metadata.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document()).expect("result serializes")
    }

    /// Natural magnitudes used for relative thresholds: `|C|`, `|C| L`,
    /// `|C| L²` with `|C|` the largest stiffness entry and `L` the box
    /// diagonal.
    pub fn scales(&self) -> [f64; 3] {
        let c = self.c_m.max_abs();
        [c, c * self.box_diagonal, c * self.box_diagonal.powi(2)]
    }
}

/// One macro state: first gradient `g[a][b] = ∂u_a/∂x_b` and second gradient
/// `h[a][b][c] = ∂²u_a/∂x_b∂x_c`.
pub type MacroSample = ([[f64; 3]; 3], [[[f64; 3]; 3]; 3]);

/// Reproducible random macro states; `length` sets the scale of `h` so
/// both gradients contribute comparable energy.
pub fn random_macro_samples(seed: u64, count: usize, length: f64) -> Vec<MacroSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
            let mut h = [[[0.0; 3]; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    for c in b..3 {
                        let v = rng.random_range(-1.0..1.0) / length;
                        h[a][b][c] = v;
                        h[a][c][b] = v;
                    }
                }
            }
            (g, h)
        })
        .collect()
}

/// Micro energy `½ ∫ C ∇u ∇u` built directly from nodal corrector
/// combinations, without the L/M element arrays.
pub fn direct_energy(ctx: &CellContext, correctors: &CorrectorSet, sample: &MacroSample) -> f64 {
    let (g, h) = sample;
    let n = ctx.mesh.n_nodes();
    let mut p = NodalVectorField::zeros(n);
    let mut q: [NodalVectorField; 3] = std::array::from_fn(|_| NodalVectorField::zeros(n));
    let mut r = NodalVectorField::zeros(n);
    for a in 0..3 {
        for b in 0..3 {
            let phi = &correctors.phi[pair_index(a, b)];
            for v in 0..n {
                for i in 0..3 {
                    p.values[v][i] += g[a][b] * phi.values[v][i];
                    for c in 0..3 {
                        q[c].values[v][i] += h[a][b][c] * phi.values[v][i];
                    }
                }
            }
            for c in 0..3 {
                let psi = &correctors.psi[triple_index(a, b, c)];
                for v in 0..n {
                    for i in 0..3 {
                        r.values[v][i] += h[a][b][c] * psi.values[v][i];
                    }
                }
            }
        }
    }
    let bary = quad4_barycentric();
    let total = chunked_sum(ctx.mesh.n_tets(), 0.0, |range| {
        let mut e = 0.0;
        for t in range {
            let tet = &ctx.mesh.tets[t];
            let geo = &ctx.geometry[t];
            let c = ctx.table.of(t);
            let dp = p.gradient(tet, geo);
            let dr = r.gradient(tet, geo);
            let dq: [[[f64; 3]; 3]; 3] = std::array::from_fn(|k| q[k].gradient(tet, geo));
            let qp = geo.quad_points();
            for s in 0..4 {
                let y: [f64; 3] = std::array::from_fn(|k| qp[s][k] - ctx.center[k]);
                let qv: [[f64; 3]; 3] = std::array::from_fn(|k| q[k].at(tet, &bary[s]));
                let grad: [[f64; 3]; 3] = std::array::from_fn(|i| {
                    std::array::from_fn(|j| {
                        let mut v = g[i][j] + dp[i][j] + dr[i][j] + qv[j][i];
                        for k in 0..3 {
                            v += y[k] * (h[i][j][k] + dq[k][i][j]);
                        }
                        v
                    })
                });
                e += 0.25 * geo.volume * 0.5 * ddot(&stress(c, &grad), &grad);
            }
        }
        e
    });
    total
}

/// `½ V (C̄ g g + 2 Ḡ g h + D̄ h h)` with full-index contractions of the
/// packed tensors.
pub fn quadratic_form_energy(result: &HomogenizationResult, sample: &MacroSample) -> f64 {
    let (g, h) = sample;
    let mut e = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let ab = pair_index(a, b);
            for c in 0..3 {
                for d in 0..3 {
                    e += result.c_m.entries[ab][pair_index(c, d)] * g[a][b] * g[c][d];
                    for f in 0..3 {
                        e += 2.0 * result.g_m_per_eps.entries[ab][triple_index(c, d, f)] * g[a][b] * h[c][d][f];
                    }
                }
            }
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let al = triple_index(a, b, c);
                for d in 0..3 {
                    for f in 0..3 {
                        for k in 0..3 {
                            e += result.d_bar_per_eps2.entries[al][triple_index(d, f, k)] * h[a][b][c] * h[d][f][k];
                        }
                    }
                }
            }
        }
    }
    0.5 * result.volume * e
}

/// Largest relative mismatch between the two energy evaluations.
pub fn energy_consistency_check(
    ctx: &CellContext,
    correctors: &CorrectorSet,
    result: &HomogenizationResult,
    samples: &[MacroSample],
) -> f64 {
    samples
        .iter()
        .map(|s| {
            let direct = direct_energy(ctx, correctors, s);
            let form = quadratic_form_energy(result, s);
            (direct - form).abs() / direct.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}
