//! Multi-right-hand-side solution of the reduced periodic system.
//!
//! The direct path factors once (sparse Cholesky with AMD ordering) and
//! reuses the factor for every right-hand side. A Jacobi-preconditioned
//! conjugate-gradient path is available as a fallback.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{LltError, LltRegularization};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::assembly::ReducedSystem;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("system has no unknowns")]
    Empty,
    #[error("symbolic factorization failed: {0}")]
    Symbolic(String),
    #[error("matrix is not positive definite: non-positive pivot at reduced dof {index} (diagonal {diagonal:.3e})")]
    NonPositivePivot { index: usize, diagonal: f64 },
    #[error("right-hand side {rhs}: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    Residual { rhs: usize, residual: f64, tolerance: f64 },
    #[error("conjugate gradient stalled on right-hand side {rhs} after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { rhs: usize, iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Acceptance bound on `|K u - f| / |f|` for every solve.
    pub residual_tolerance: f64,
    /// Stopping tolerance of the iterative path.
    pub iterative_tolerance: f64,
    pub max_iterations: usize,
    /// Allow multithreaded kernels; results may then differ in the last bits.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Direct,
            residual_tolerance: 1e-8,
            iterative_tolerance: 1e-10,
            max_iterations: 20_000,
            parallel: false,
        }
    }
}

#[derive(Debug, Default)]
pub struct SolveCounters {
    pub factorizations: AtomicUsize,
    pub solves: AtomicUsize,
    pub refinements: AtomicUsize,
}

impl SolveCounters {
    pub fn factorizations(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn refinements(&self) -> usize {
        self.refinements.load(Ordering::Relaxed)
    }
}

enum Backend {
    Cholesky { symbolic: SymbolicCholesky<usize>, values: Vec<f64> },
    Jacobi { inv_diag: Vec<f64> },
}

pub struct LinearSolver {
    system: ReducedSystem,
    backend: Backend,
    options: SolverOptions,
    pub counters: SolveCounters,
    /// Wall time of the numeric setup (factorization or preconditioner).
    pub setup_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct MultiSolve {
    pub solutions: Vec<Vec<f64>>,
    /// Final relative residual per right-hand side.
    pub residuals: Vec<f64>,
    pub seconds: f64,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearSolver {
    pub fn new(system: ReducedSystem, options: SolverOptions) -> Result<Self, SolverError> {
        if system.n == 0 {
            return Err(SolverError::Empty);
        }
        let start = Instant::now();
        let counters = SolveCounters::default();
        let backend = match options.kind {
            SolverKind::Direct => {
                let backend = factorize(&system, par(options.parallel))?;
                counters.factorizations.fetch_add(1, Ordering::Relaxed);
                backend
            }
            SolverKind::Iterative => {
                let diag = system.diagonal();
                if let Some((index, &d)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
                    return Err(SolverError::NonPositivePivot { index, diagonal: d });
                }
                Backend::Jacobi { inv_diag: diag.iter().map(|d| 1.0 / d).collect() }
            }
        };
        let setup_seconds = start.elapsed().as_secs_f64();
        log::info!(
            "{:?} solver ready for {} unknowns ({} stored entries) in {:.3} s",
            options.kind,
            system.n,
            system.nnz_lower(),
            setup_seconds
        );
        Ok(Self { system, backend, options, counters, setup_seconds })
    }

    pub fn system(&self) -> &ReducedSystem {
        &self.system
    }

    pub fn n(&self) -> usize {
        self.system.n
    }

    /// Solves every right-hand side against the single setup.
    pub fn solve_multi(&self, rhs: &[Vec<f64>]) -> Result<MultiSolve, SolverError> {
        let start = Instant::now();
        let n = self.system.n;
        for f in rhs {
            assert_eq!(f.len(), n, "right-hand side length");
        }
        let mut solutions = match &self.backend {
            Backend::Cholesky { .. } => self.direct_block(rhs),
            Backend::Jacobi { inv_diag } => {
                let mut out = Vec::with_capacity(rhs.len());
                for (k, f) in rhs.iter().enumerate() {
                    out.push(self.pcg(inv_diag, f, k)?);
                }
                out
            }
        };
        self.counters.solves.fetch_add(rhs.len(), Ordering::Relaxed);
        let mut residuals = Vec::with_capacity(rhs.len());
        for (k, (f, u)) in rhs.iter().zip(solutions.iter_mut()).enumerate() {
            let fn_ = norm(f);
            let mut res = self.residual(f, u);
            let mut steps = 0;
            while norm(&res) > self.options.residual_tolerance * fn_ && steps < 3 {
                let du = match &self.backend {
                    Backend::Cholesky { .. } => self.direct_block(std::slice::from_ref(&res)).pop().expect("one column"),
                    Backend::Jacobi { inv_diag } => self.pcg(inv_diag, &res, k)?,
                };
                u.iter_mut().zip(&du).for_each(|(a, b)| *a += b);
                self.counters.refinements.fetch_add(1, Ordering::Relaxed);
                res = self.residual(f, u);
                steps += 1;
                log::debug!("rhs {k}: refinement step {steps}, relative residual {:.3e}", norm(&res) / fn_);
            }
            let rel = if fn_ > 0.0 { norm(&res) / fn_ } else { norm(&res) };
            if rel > self.options.residual_tolerance {
                return Err(SolverError::Residual { rhs: k, residual: rel, tolerance: self.options.residual_tolerance });
            }
            residuals.push(rel);
        }
        Ok(MultiSolve { solutions, residuals, seconds: start.elapsed().as_secs_f64() })
    }

    fn residual(&self, f: &[f64], u: &[f64]) -> Vec<f64> {
        let ku = self.system.mul_vec(u);
        f.iter().zip(ku).map(|(a, b)| a - b).collect()
    }

    fn direct_block(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let Backend::Cholesky { symbolic, values } = &self.backend else { unreachable!("direct backend") };
        let n = self.system.n;
        let m = rhs.len();
        if m == 0 {
            return Vec::new();
        }
        let mut block: Vec<f64> = rhs.iter().flatten().copied().collect();
        let par = par(self.options.parallel);
        let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(m, par));
        let stack = MemStack::new(&mut mem);
        let llt = LltRef::<'_, usize, f64>::new(symbolic, values);
        llt.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut block, n, m), par, stack);
        block.chunks_exact(n).map(<[f64]>::to_vec).collect()
    }

    fn pcg(&self, inv_diag: &[f64], f: &[f64], k: usize) -> Result<Vec<f64>, SolverError> {
        let n = self.system.n;
        let mut x = vec![0.0; n];
        let fn_ = norm(f);
        if fn_ == 0.0 {
            return Ok(x);
        }
        let mut r = f.to_vec();
        let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, b)| a * b).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 0..self.options.max_iterations {
            let kp = self.system.mul_vec(&p);
            let alpha = rz / dot(&p, &kp);
            x.iter_mut().zip(&p).for_each(|(a, b)| *a += alpha * b);
            r.iter_mut().zip(&kp).for_each(|(a, b)| *a -= alpha * b);
            let rel = norm(&r) / fn_;
            if rel <= self.options.iterative_tolerance {
                log::debug!("cg converged in {} iterations", it + 1);
                return Ok(x);
            }
            z.iter_mut().zip(r.iter().zip(inv_diag)).for_each(|(a, (b, c))| *a = b * c);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(a, b)| *a = b + beta * *a);
        }
        Err(SolverError::NotConverged {
            rhs: k,
            iterations: self.options.max_iterations,
            residual: norm(&r) / fn_,
        })
    }
}

fn par(parallel: bool) -> Par {
    if parallel {
        Par::rayon(0)
    } else {
        Par::Seq
    }
}

fn factorize(system: &ReducedSystem, par: Par) -> Result<Backend, SolverError> {
    let n = system.n;
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &system.col_ptr, None, &system.row_idx);
    let a = SparseColMatRef::new(sym, &system.values);
    let symbolic = factorize_symbolic_cholesky(sym, Side::Lower, SymmetricOrdering::Amd, Default::default())
        .map_err(|e| SolverError::Symbolic(format!("{e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut mem = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default()));
    let stack = MemStack::new(&mut mem);
    let result = symbolic.factorize_numeric_llt(
        &mut values,
        a,
        Side::Lower,
        LltRegularization::default(),
        par,
        stack,
        Default::default(),
    );
    match result {
        Ok(_) => {}
        Err(LltError::NonPositivePivot { index }) => {
            // The pivot index refers to the permuted ordering; report the
            // original dof when the permutation is available.
            let original = symbolic.perm().map_or(index, |p| p.arrays().0[index]);
            let diagonal = system.diagonal().get(original).copied().unwrap_or(f64::NAN);
            return Err(SolverError::NonPositivePivot { index: original, diagonal });
        }
    }
    Ok(Backend::Cholesky { symbolic, values })
}
