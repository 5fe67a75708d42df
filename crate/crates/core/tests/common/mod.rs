//! Closed-form reference for layered cells: every field depends on the
//! coordinate along the layer normal only, so the cell problems reduce to
//! ordinary differential equations with piecewise-constant coefficients.

#![allow(dead_code)]

use gradhom_core::tensors::{isotropic_stiffness, pair_index, Rank4, VOIGT_PAIRS};
use gradhom_core::IsotropicPhase;
use nalgebra::{Matrix3, Vector3};

pub struct Layer {
    pub c: Rank4,
}

/// One 1D element of the through-thickness discretization.
#[derive(Clone, Copy)]
pub struct Segment {
    pub y0: f64,
    pub y1: f64,
    pub layer: usize,
}

pub struct LaminateOracle {
    pub normal: usize,
    pub lengths: [f64; 3],
    pub segments: Vec<Segment>,
    pub layers: Vec<Layer>,
    /// Nodal first-order fields per Voigt pair at the segment ends.
    pub phi_nodes: Vec<Vec<Vector3<f64>>>,
    pub phi_slopes: Vec<Vec<Vector3<f64>>>,
    pub c_m: [[f64; 6]; 6],
    pub psi_nodes: Vec<Vec<Vector3<f64>>>,
    pub psi_slopes: Vec<Vec<Vector3<f64>>>,
    pub g_bar: [[f64; 18]; 6],
    pub d_bar: [[f64; 18]; 18],
    pub d_m: [[f64; 18]; 18],
}

fn a_matrix(c: &Rank4, n: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|i, k| c[i][n][k][n])
}

fn b_matrix(c: &Rank4, n: usize, col: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|i, k| c[i][n][k][col])
}

/// `(1/len) ∫ f` over the segments for a segment-constant `f`.
fn average_const(segs: &[Segment], len: f64, f: impl Fn(&Segment) -> Matrix3<f64>) -> Matrix3<f64> {
    segs.iter().map(|s| f(s) * (s.y1 - s.y0)).sum::<Matrix3<f64>>() / len
}

fn ddot(c: &Rank4, a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += c[i][j][k][l] * a[i][j] * b[k][l];
                }
            }
        }
    }
    s
}

impl LaminateOracle {
    /// `breaks` are the sorted node coordinates along the normal, starting
    /// at 0 and ending at the cell length; `layer_of` maps a segment
    /// midpoint to its layer.
    pub fn new(
        normal: usize,
        lengths: [f64; 3],
        breaks: &[f64],
        phases: &[IsotropicPhase],
        layer_of: impl Fn(f64) -> usize,
    ) -> Self {
        let n = normal;
        let len = lengths[n];
        let layers: Vec<Layer> =
            phases.iter().map(|p| Layer { c: isotropic_stiffness(p).unwrap().unpack() }).collect();
        let segments: Vec<Segment> = breaks
            .windows(2)
            .map(|w| Segment { y0: w[0], y1: w[1], layer: layer_of(0.5 * (w[0] + w[1])) })
            .collect();
        let a_inv = |s: &Segment| a_matrix(&layers[s.layer].c, n).try_inverse().unwrap();
        let mean_a_inv = average_const(&segments, len, a_inv);
        let mean_a_inv_inv = mean_a_inv.try_inverse().unwrap();

        // First order: A φ' + c = t with ⟨φ'⟩ = 0.
        let mut phi_slopes = Vec::new();
        let mut phi_nodes = Vec::new();
        for &(a, b) in &VOIGT_PAIRS {
            let cvec = |s: &Segment| Vector3::from_fn(|i, _| layers[s.layer].c[i][n][a][b]);
            let rhs: Vector3<f64> =
                segments.iter().map(|s| a_inv(s) * cvec(s) * (s.y1 - s.y0)).sum::<Vector3<f64>>() / len;
            let t = mean_a_inv_inv * rhs;
            let slopes: Vec<Vector3<f64>> = segments.iter().map(|s| a_inv(s) * (t - cvec(s))).collect();
            phi_nodes.push(integrate_and_center(&segments, &slopes, len));
            phi_slopes.push(slopes);
        }

        let l_tensor = |p: usize, seg: usize| -> [[f64; 3]; 3] {
            let (a, b) = VOIGT_PAIRS[p];
            let mut l = [[0.0; 3]; 3];
            l[a][b] += 1.0;
            for k in 0..3 {
                l[k][n] += phi_slopes[p][seg][k];
            }
            l
        };

        let mut c_m = [[0.0; 6]; 6];
        for p in 0..6 {
            for q in 0..6 {
                let (i, j) = VOIGT_PAIRS[p];
                let mut e = [[0.0; 3]; 3];
                e[i][j] = 1.0;
                c_m[p][q] = segments
                    .iter()
                    .enumerate()
                    .map(|(k, s)| ddot(&layers[s.layer].c, &e, &l_tensor(q, k)) * (s.y1 - s.y0))
                    .sum::<f64>()
                    / len;
            }
        }
        let c_m_full = |i: usize, j: usize, a: usize, b: usize| c_m[pair_index(i, j)][pair_index(a, b)];

        // Second order: F = A ψ' + B φ, F' = -s, ⟨ψ'⟩ = 0.
        let mut psi_nodes = Vec::new();
        let mut psi_slopes = Vec::new();
        for col in 0..3 {
            for p in 0..6 {
                let (a, b) = VOIGT_PAIRS[p];
                let s_of = |k: usize| -> Vector3<f64> {
                    let c = &layers[segments[k].layer].c;
                    let l = l_tensor(p, k);
                    Vector3::from_fn(|i, _| {
                        let mut v = -c_m_full(i, col, a, b);
                        for kk in 0..3 {
                            for ll in 0..3 {
                                v += c[i][col][kk][ll] * l[kk][ll];
                            }
                        }
                        v
                    })
                };
                // S(y) = ∫_0^y s at segment starts.
                let mut s_start = Vec::with_capacity(segments.len());
                let mut acc = Vector3::zeros();
                for (k, seg) in segments.iter().enumerate() {
                    s_start.push(acc);
                    acc += s_of(k) * (seg.y1 - seg.y0);
                }
                assert!(acc.norm() <= 1e-9 * layers.iter().map(|l| a_matrix(&l.c, n).norm()).fold(0.0, f64::max) * len);
                // ψ' = A⁻¹(F0 − S − Bφ) is linear on each segment; its
                // segment mean is the value at the midpoint.
                let mid = |k: usize| -> (Matrix3<f64>, Vector3<f64>) {
                    let seg = &segments[k];
                    let h = seg.y1 - seg.y0;
                    let bm = b_matrix(&layers[seg.layer].c, n, col);
                    let phi_mid = phi_nodes[p][k] + phi_slopes[p][k] * (0.5 * h);
                    let s_mid = s_start[k] + s_of(k) * (0.5 * h);
                    (a_inv(seg), bm * phi_mid + s_mid)
                };
                let rhs: Vector3<f64> = (0..segments.len())
                    .map(|k| {
                        let (ai, v) = mid(k);
                        ai * v * (segments[k].y1 - segments[k].y0)
                    })
                    .sum::<Vector3<f64>>()
                    / len;
                let f0 = mean_a_inv_inv * rhs;
                let slopes: Vec<Vector3<f64>> = (0..segments.len())
                    .map(|k| {
                        let (ai, v) = mid(k);
                        ai * (f0 - v)
                    })
                    .collect();
                psi_nodes.push(integrate_and_center(&segments, &slopes, len));
                psi_slopes.push(slopes);
            }
        }

        // Moments of the discrete fields. Within a segment everything is at
        // most linear along the normal; two Gauss points integrate the
        // products exactly, and transverse coordinates enter only through
        // their centered second moments L²/12.
        let center = lengths.map(|l| 0.5 * l);
        let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        let mut g_bar = [[0.0; 18]; 6];
        let mut d_bar = [[0.0; 18]; 18];
        for (k, seg) in segments.iter().enumerate() {
            let c = &layers[seg.layer].c;
            let h = seg.y1 - seg.y0;
            for &xi in &gauss {
                let yn = seg.y0 + xi * h;
                let w = 0.5 * h / len;
                // Along-normal part of M for every triple.
                let m_normal: Vec<[[f64; 3]; 3]> = (0..18)
                    .map(|al| {
                        let (p, col) = (al % 6, al / 6);
                        let l = l_tensor(p, k);
                        let phi = phi_nodes[p][k] + phi_slopes[p][k] * (xi * h);
                        let dpsi = psi_slopes[al][k];
                        let mut m = [[0.0; 3]; 3];
                        for i in 0..3 {
                            if col == n {
                                for j in 0..3 {
                                    m[i][j] += (yn - center[n]) * l[i][j];
                                }
                            }
                            m[i][col] += phi[i];
                            m[i][n] += dpsi[i];
                        }
                        m
                    })
                    .collect();
                for p in 0..6 {
                    let l = l_tensor(p, k);
                    for al in 0..18 {
                        g_bar[p][al] += w * ddot(c, &l, &m_normal[al]);
                    }
                }
                for al in 0..18 {
                    for be in 0..18 {
                        let mut v = ddot(c, &m_normal[al], &m_normal[be]);
                        let (ca, cb) = (al / 6, be / 6);
                        if ca == cb && ca != n {
                            let la = l_tensor(al % 6, k);
                            let lb = l_tensor(be % 6, k);
                            v += lengths[ca] * lengths[ca] / 12.0 * ddot(c, &la, &lb);
                        }
                        d_bar[al][be] += w * v;
                    }
                }
            }
        }
        let mut d_m = d_bar;
        for al in 0..18 {
            for be in 0..18 {
                let (ka, kb) = (al / 6, be / 6);
                if ka == kb {
                    d_m[al][be] -= c_m[al % 6][be % 6] * lengths[ka] * lengths[ka] / 12.0;
                }
            }
        }
        Self {
            normal,
            lengths,
            segments,
            layers,
            phi_nodes,
            phi_slopes,
            c_m,
            psi_nodes,
            psi_slopes,
            g_bar,
            d_bar,
            d_m,
        }
    }

    /// Value of a nodal field at normal coordinate `y` (must be a break).
    pub fn nodal(&self, nodes: &[Vector3<f64>], y: f64) -> Vector3<f64> {
        let tol = 1e-9 * self.lengths[self.normal];
        if (y - self.lengths[self.normal]).abs() < tol {
            return nodes[0];
        }
        let k = self.segments.iter().position(|s| (s.y0 - y).abs() < tol).expect("coordinate is a mesh break");
        nodes[k]
    }
}

/// Nodal values at segment starts of the field with the given slopes,
/// shifted so the piecewise-linear interpolant has zero mean.
fn integrate_and_center(segs: &[Segment], slopes: &[Vector3<f64>], len: f64) -> Vec<Vector3<f64>> {
    let mut nodes = Vec::with_capacity(segs.len() + 1);
    let mut acc = Vector3::zeros();
    for (s, d) in segs.iter().zip(slopes) {
        nodes.push(acc);
        acc += d * (s.y1 - s.y0);
    }
    nodes.push(acc);
    let mean: Vector3<f64> =
        segs.iter().enumerate().map(|(k, s)| (nodes[k] + nodes[k + 1]) * (0.5 * (s.y1 - s.y0))).sum::<Vector3<f64>>()
            / len;
    nodes.iter_mut().for_each(|v| *v -= mean);
    nodes.pop();
    nodes
}

/// Sorted distinct node coordinates along `axis`.
pub fn breaks_along(nodes: &[[f64; 3]], axis: usize) -> Vec<f64> {
    let mut v: Vec<f64> = nodes.iter().map(|p| p[axis]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}
