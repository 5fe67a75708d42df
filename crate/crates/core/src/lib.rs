//! Periodic-cell asymptotic homogenization for strain-gradient elasticity.
//!
//! Given a periodic tetrahedral cell with piecewise-constant isotropic
//! phases, the crate solves the first- and second-order corrector problems
//! and returns the effective stiffness `C` (rank 4), the strain/strain-
//! gradient coupling `G` (rank 5) and the strain-gradient stiffness `D`
//! (rank 6).

pub mod fem;
pub mod mesh;
pub mod tensors;

pub mod correctors;
pub mod effective;
pub mod error;
pub mod pipeline;
pub mod report;

pub use correctors::{CellContext, CorrectorSet};
pub use effective::{HomogenizationResult, ResultDocument};
pub use error::GradhomError;
pub use mesh::{RveGeometry, RveShape, TetMesh, WallSpec};
pub use pipeline::{run, run_full, CompletedRun, Determinism, RunConfig, RunReport};
pub use report::{render_report, render_run_summary, DisplayUnits, ReportOptions};
pub use tensors::{IsotropicPhase, Stiffness4, Tensor5, Tensor6};
