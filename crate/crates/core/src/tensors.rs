//! Rank-4/5/6 elasticity tensors in Voigt-like matrix layouts.
//!
//! Pairs follow the order 11, 22, 33, 23, 13, 12. Triples append a third
//! index to each pair, so triple `6 * k + A` is pair `A` followed by `k`.
//! No engineering-shear factors are applied: the packed matrices are raw
//! component tables and every contraction runs on unpacked arrays.

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Full 3x3x3x3 array.
pub type Rank4 = [[[[f64; 3]; 3]; 3]; 3];

/// Index pairs in packed order (0-based).
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Relative tolerance for symmetry checks on assembled tensors.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("Young's modulus must be positive, got {0}")]
    YoungModulus(f64),
    #[error("Poisson ratio must lie in (-1, 0.5), got {0}")]
    PoissonRatio(f64),
    #[error("minor symmetry violated at C[{}][{}][{}][{}] (deviation {deviation:.3e})", .worst[0] + 1, .worst[1] + 1, .worst[2] + 1, .worst[3] + 1)]
    MinorSymmetry { worst: [usize; 4], deviation: f64 },
    #[error("major symmetry violated at ({row}, {col}) (relative deviation {deviation:.3e})")]
    MajorSymmetry { row: usize, col: usize, deviation: f64 },
}

/// Packed index of an unordered pair.
pub fn pair_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (1, 2) => 3,
        (0, 2) => 4,
        (0, 1) => 5,
        _ => panic!("pair index out of range: ({i}, {j})"),
    }
}

/// Packed index of a triple whose first two indices are symmetric.
pub fn triple_index(i: usize, j: usize, k: usize) -> usize {
    assert!(k < 3, "triple index out of range");
    6 * k + pair_index(i, j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoigtPair(usize);

impl VoigtPair {
    pub fn new(index: usize) -> Option<Self> {
        (index < 6).then_some(Self(index))
    }

    pub fn from_indices(i: usize, j: usize) -> Self {
        Self(pair_index(i, j))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn indices(self) -> (usize, usize) {
        VOIGT_PAIRS[self.0]
    }

    pub fn all() -> impl Iterator<Item = VoigtPair> {
        (0..6).map(VoigtPair)
    }

    /// One-based label such as "23".
    pub fn label(self) -> String {
        let (i, j) = self.indices();
        format!("{}{}", i + 1, j + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoigtTriple(usize);

impl VoigtTriple {
    pub fn new(index: usize) -> Option<Self> {
        (index < 18).then_some(Self(index))
    }

    pub fn from_indices(i: usize, j: usize, k: usize) -> Self {
        Self(triple_index(i, j, k))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn pair(self) -> VoigtPair {
        VoigtPair(self.0 % 6)
    }

    pub fn third(self) -> usize {
        self.0 / 6
    }

    pub fn indices(self) -> (usize, usize, usize) {
        let (i, j) = self.pair().indices();
        (i, j, self.third())
    }

    pub fn all() -> impl Iterator<Item = VoigtTriple> {
        (0..18).map(VoigtTriple)
    }

    pub fn label(self) -> String {
        let (i, j, k) = self.indices();
        format!("{}{}{}", i + 1, j + 1, k + 1)
    }
}

fn max_abs<'a>(values: impl IntoIterator<Item = &'a f64>) -> f64 {
    values.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Rank-4 stiffness in packed 6x6 form (Pa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Stiffness4 {
    pub entries: [[f64; 6]; 6],
}

impl Stiffness4 {
    pub fn zeros() -> Self {
        Self { entries: [[0.0; 6]; 6] }
    }

    /// Builds from a packed matrix, rejecting major asymmetry above
    /// [`SYMMETRY_TOL`] and averaging away what remains.
    pub fn from_matrix(entries: [[f64; 6]; 6]) -> Result<Self, TensorError> {
        let scale = max_abs(entries.iter().flatten());
        let mut worst = (0, 0, 0.0);
        for a in 0..6 {
            for b in (a + 1)..6 {
                let d = (entries[a][b] - entries[b][a]).abs();
                if d > worst.2 {
                    worst = (a, b, d);
                }
            }
        }
        if scale > 0.0 && worst.2 > SYMMETRY_TOL * scale {
            return Err(TensorError::MajorSymmetry {
                row: worst.0,
                col: worst.1,
                deviation: worst.2 / scale,
            });
        }
        let mut sym = entries;
        for a in 0..6 {
            for b in (a + 1)..6 {
                let m = 0.5 * (entries[a][b] + entries[b][a]);
                sym[a][b] = m;
                sym[b][a] = m;
            }
        }
        Ok(Self { entries: sym })
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.entries[pair_index(i, j)][pair_index(k, l)]
    }

    pub fn unpack(&self) -> Rank4 {
        voigt_unpack4(self)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.entries.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.entries.iter().flatten())
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Rank-5 tensor packed as 6 pair rows by 18 triple columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tensor5 {
    pub entries: [[f64; 18]; 6],
}

impl Tensor5 {
    pub fn zeros() -> Self {
        Self { entries: [[0.0; 18]; 6] }
    }

    /// Component `(ij, klm)` with `ij` and `kl` symmetric.
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.entries[pair_index(i, j)][triple_index(k, l, m)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.entries.iter().flatten())
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Rank-6 tensor packed as 18x18 over triples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tensor6 {
    pub entries: [[f64; 18]; 18],
}

impl Tensor6 {
    pub fn zeros() -> Self {
        Self { entries: [[0.0; 18]; 18] }
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize, m: usize, n: usize) -> f64 {
        self.entries[triple_index(i, j, k)][triple_index(l, m, n)]
    }

    /// Largest `|D[a][b] - D[b][a]|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for a in 0..18 {
            for b in (a + 1)..18 {
                worst = worst.max((self.entries[a][b] - self.entries[b][a]).abs());
            }
        }
        worst / scale
    }

    pub fn symmetrized(&self) -> Self {
        let mut out = *self;
        for a in 0..18 {
            for b in (a + 1)..18 {
                let m = 0.5 * (self.entries[a][b] + self.entries[b][a]);
                out.entries[a][b] = m;
                out.entries[b][a] = m;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(self.entries.iter().flatten())
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicPhase {
    /// Pa.
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub phase_id: u32,
}

impl IsotropicPhase {
    pub fn new(young_modulus: f64, poisson_ratio: f64, phase_id: u32) -> Self {
        Self { young_modulus, poisson_ratio, phase_id }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return Err(TensorError::YoungModulus(self.young_modulus));
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return Err(TensorError::PoissonRatio(self.poisson_ratio));
        }
        Ok(())
    }

    /// True when the bulk/shear ratio is large enough to hurt conditioning.
    pub fn near_incompressible(&self) -> bool {
        0.5 - self.poisson_ratio < 1e-6
    }

    /// Lamé constants (lambda, mu).
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young_modulus, self.poisson_ratio);
        (e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }
}

pub fn isotropic_stiffness(phase: &IsotropicPhase) -> Result<Stiffness4, TensorError> {
    phase.validate()?;
    if phase.near_incompressible() {
        log::warn!(
            "phase {} has Poisson ratio {} close to 0.5; the stiffness is badly conditioned",
            phase.phase_id,
            phase.poisson_ratio
        );
    }
    let (lambda, mu) = phase.lame();
    let mut c = [[0.0; 6]; 6];
    for a in 0..3 {
        for b in 0..3 {
            c[a][b] = lambda;
        }
        c[a][a] = lambda + 2.0 * mu;
        c[a + 3][a + 3] = mu;
    }
    Ok(Stiffness4 { entries: c })
}

pub fn voigt_unpack4(c: &Stiffness4) -> Rank4 {
    let mut full = [[[[0.0; 3]; 3]; 3]; 3];
    for (i, fi) in full.iter_mut().enumerate() {
        for (j, fij) in fi.iter_mut().enumerate() {
            for (k, fijk) in fij.iter_mut().enumerate() {
                for (l, v) in fijk.iter_mut().enumerate() {
                    *v = c.get(i, j, k, l);
                }
            }
        }
    }
    full
}

/// Packs a full array, checking both minor symmetries to 1e-12 relative.
pub fn voigt_pack4(full: &Rank4) -> Result<Stiffness4, TensorError> {
    let scale = max_abs(full.iter().flatten().flatten().flatten());
    let mut worst = ([0; 4], 0.0_f64);
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let v = full[i][j][k][l];
                    let d = (v - full[j][i][k][l]).abs().max((v - full[i][j][l][k]).abs());
                    if d > worst.1 {
                        worst = ([i, j, k, l], d);
                    }
                }
            }
        }
    }
    if worst.1 > 1e-12 * scale {
        return Err(TensorError::MinorSymmetry { worst: worst.0, deviation: worst.1 });
    }
    let mut c = Stiffness4::zeros();
    for (a, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for (b, &(k, l)) in VOIGT_PAIRS.iter().enumerate() {
            c.entries[a][b] = full[i][j][k][l];
        }
    }
    Ok(c)
}

/// Eigenvalues of the raw packed matrix in ascending order.
pub fn check_spectrum(c: &Stiffness4) -> [f64; 6] {
    let m = Matrix6::from_fn(|a, b| c.entries[a][b]);
    let eig = SymmetricEigen::new(m);
    let mut values: [f64; 6] = std::array::from_fn(|a| eig.eigenvalues[a]);
    values.sort_by(f64::total_cmp);
    values
}

pub fn pair_labels() -> Vec<String> {
    VoigtPair::all().map(VoigtPair::label).collect()
}

pub fn triple_labels() -> Vec<String> {
    VoigtTriple::all().map(VoigtTriple::label).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_round_trip() {
        for p in VoigtPair::all() {
            let (i, j) = p.indices();
            assert_eq!(VoigtPair::from_indices(i, j), p);
            assert_eq!(VoigtPair::from_indices(j, i), p);
        }
        let labels = pair_labels();
        assert_eq!(labels, ["11", "22", "33", "23", "13", "12"]);
        assert!(VoigtPair::new(6).is_none());
    }

    #[test]
    fn triple_round_trip() {
        let expected = [
            "111", "221", "331", "231", "131", "121", "112", "222", "332", "232", "132", "122",
            "113", "223", "333", "233", "133", "123",
        ];
        assert_eq!(triple_labels(), expected);
        let mut seen = std::collections::HashSet::new();
        for t in VoigtTriple::all() {
            let (i, j, k) = t.indices();
            assert_eq!(VoigtTriple::from_indices(i, j, k), t);
            assert_eq!(VoigtTriple::from_indices(j, i, k), t);
            assert!(seen.insert((i.min(j), i.max(j), k)));
        }
        assert_eq!(seen.len(), 18);
    }

    #[test]
    fn lame_values() {
        let c = isotropic_stiffness(&IsotropicPhase::new(110e9, 0.35, 0)).unwrap();
        // lambda = 110*0.35/(1.35*0.3) = 95.0617..., mu = 110/2.7 = 40.7407...
        let lambda = 110.0 * 0.35 / (1.35 * 0.3);
        let mu = 110.0 / 2.7;
        assert!((c.get(0, 0, 0, 0) / 1e9 - (lambda + 2.0 * mu)).abs() < 1e-9);
        assert!((c.get(0, 0, 1, 1) / 1e9 - lambda).abs() < 1e-9);
        assert!((c.get(1, 2, 1, 2) / 1e9 - mu).abs() < 1e-9);
        assert!((c.get(0, 0, 0, 0) / 1e9 - 176.543).abs() < 5e-4);
        assert!((c.get(0, 0, 1, 1) / 1e9 - 95.062).abs() < 5e-4);
        assert!((c.get(1, 2, 1, 2) / 1e9 - 40.741).abs() < 5e-4);
        assert_eq!(c.get(0, 0, 1, 2), 0.0);
    }

    #[test]
    fn unit_decoupled() {
        let c = isotropic_stiffness(&IsotropicPhase::new(1.0, 0.0, 0)).unwrap();
        assert_eq!(c.get(0, 0, 0, 0), 1.0);
        assert_eq!(c.get(0, 0, 1, 1), 0.0);
        assert_eq!(c.get(1, 2, 1, 2), 0.5);
    }

    #[test]
    fn poisson_domain() {
        assert!(matches!(
            isotropic_stiffness(&IsotropicPhase::new(1.0, 0.5, 0)),
            Err(TensorError::PoissonRatio(_))
        ));
        assert!(isotropic_stiffness(&IsotropicPhase::new(1.0, -1.0, 0)).is_err());
        assert!(isotropic_stiffness(&IsotropicPhase::new(0.0, 0.2, 0)).is_err());
        let p = IsotropicPhase::new(3.0, 0.5 - 1e-12, 0);
        assert!(p.near_incompressible());
        assert!(isotropic_stiffness(&p).is_ok());
        assert!(!IsotropicPhase::new(3.0, 0.35, 0).near_incompressible());
    }

    #[test]
    fn pack_identity_like() {
        let mut full = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let dik = (i == k) as u8 as f64;
                        let djl = (j == l) as u8 as f64;
                        let dil = (i == l) as u8 as f64;
                        let djk = (j == k) as u8 as f64;
                        full[i][j][k][l] = 0.5 * (dik * djl + dil * djk);
                    }
                }
            }
        }
        let c = voigt_pack4(&full).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let expected = if a != b { 0.0 } else if a < 3 { 1.0 } else { 0.5 };
                assert_eq!(c.entries[a][b], expected);
            }
        }
    }

    #[test]
    fn pack_round_trip_isotropic() {
        let c = isotropic_stiffness(&IsotropicPhase::new(110e9, 0.35, 0)).unwrap();
        assert_eq!(voigt_pack4(&voigt_unpack4(&c)).unwrap(), c);
    }

    #[test]
    fn pack_rejects_asymmetric() {
        let mut full = voigt_unpack4(&isotropic_stiffness(&IsotropicPhase::new(1.0, 0.3, 0)).unwrap());
        full[1][0][2][2] += 1e-3;
        match voigt_pack4(&full) {
            Err(TensorError::MinorSymmetry { worst, .. }) => {
                assert!(worst == [1, 0, 2, 2] || worst == [0, 1, 2, 2]);
            }
            other => panic!("expected symmetry error, got {other:?}"),
        }
    }

    #[test]
    fn spectrum_isotropic_unit() {
        let c = isotropic_stiffness(&IsotropicPhase::new(1.0, 0.0, 0)).unwrap();
        let ev = check_spectrum(&c);
        let expected = [0.5, 0.5, 0.5, 1.0, 1.0, 1.0];
        for (v, e) in ev.iter().zip(expected) {
            assert!((v - e).abs() < 1e-14);
        }
        assert_eq!(check_spectrum(&Stiffness4::zeros()), [0.0; 6]);
    }

    #[test]
    fn spectrum_published_honeycomb_positive() {
        let c = [
            [16.0, 10.0, 9.0, 0.0, 0.0, 0.0],
            [10.0, 11.0, 7.0, 0.0, 0.0, 0.0],
            [9.0, 7.0, 43.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 8.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 8.0, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 3.0],
        ];
        let ev = check_spectrum(&Stiffness4::from_matrix(c).unwrap());
        assert!(ev.iter().all(|&v| v > 0.0), "{ev:?}");
    }

    #[test]
    fn major_symmetry_gate() {
        let mut c = isotropic_stiffness(&IsotropicPhase::new(1.0, 0.3, 0)).unwrap().entries;
        c[0][1] += 1e-6;
        assert!(matches!(Stiffness4::from_matrix(c), Err(TensorError::MajorSymmetry { .. })));
        c[0][1] -= 1e-6 - 1e-14;
        let s = Stiffness4::from_matrix(c).unwrap();
        assert_eq!(s.entries[0][1], s.entries[1][0]);
    }

    #[test]
    fn isotropy_under_signed_permutations() {
        let c = isotropic_stiffness(&IsotropicPhase::new(7.0, 0.27, 0)).unwrap().unpack();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            for signs in 0..8u32 {
                let mut q = [[0.0; 3]; 3];
                for r in 0..3 {
                    q[r][p[r]] = if signs >> r & 1 == 1 { -1.0 } else { 1.0 };
                }
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            for l in 0..3 {
                                let mut v = 0.0;
                                for a in 0..3 {
                                    for b in 0..3 {
                                        for cc in 0..3 {
                                            for d in 0..3 {
                                                v += q[i][a] * q[j][b] * q[k][cc] * q[l][d] * c[a][b][cc][d];
                                            }
                                        }
                                    }
                                }
                                assert!((v - c[i][j][k][l]).abs() < 1e-12);
                            }
                        }
                    }
                }
            }
        }
    }
}
