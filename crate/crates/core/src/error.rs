use std::path::PathBuf;

use thiserror::Error;

use crate::correctors::CorrectorError;
use crate::effective::EffectiveError;
use crate::fem::{PeriodicError, SolverError};
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum GradhomError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error("periodicity: {0}")]
    Periodic(#[from] PeriodicError),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("consistency check failed: {0}")]
    Consistency(String),
    #[error("writing {}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
}

impl GradhomError {
    /// Process exit status: 2 configuration, 3 mesh or periodicity,
    /// 4 solver, 5 consistency, 1 output I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Mesh(_) | Self::Periodic(_) => 3,
            Self::Solver(_) => 4,
            Self::Consistency(_) => 5,
            Self::Output { .. } => 1,
        }
    }
}

impl From<CorrectorError> for GradhomError {
    fn from(e: CorrectorError) -> Self {
        match e {
            CorrectorError::Solver(s) => Self::Solver(s),
            other => Self::Consistency(other.to_string()),
        }
    }
}

impl From<EffectiveError> for GradhomError {
    fn from(e: EffectiveError) -> Self {
        Self::Consistency(e.to_string())
    }
}
