use std::path::PathBuf;

use adsis_core::gp::SolveStatus;
use adsis_core::{AllocationError, Error as CoreError};

use crate::config::ConfigError;
use crate::plot::PlotError;
use crate::table::TableError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// A downstream failure at one sweep point.
    #[error("at {point}: {source}")]
    Point { point: String, source: CoreError },
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn at(point: impl Into<String>, source: impl Into<CoreError>) -> Self {
        Self::Point { point: point.into(), source: source.into() }
    }

    /// 2 for configuration errors, 3 for numerical failures, 4 for
    /// infeasible optimization problems and 1 for I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Plot(_) | Self::Pool(_) => 2,
            Self::Point { source, .. } => match source {
                CoreError::Model(_) => 2,
                CoreError::Allocation(e) => match e {
                    AllocationError::Model(_) | AllocationError::InvalidCost(_) | AllocationError::OutOfBox { .. } => 2,
                    AllocationError::InfeasibleBudget { .. } | AllocationError::PerformanceInfeasible { .. } => 4,
                    AllocationError::Solver { status: SolveStatus::Infeasible, .. } => 4,
                    _ => 3,
                },
                _ => 3,
            },
            Self::Table(_) => 3,
            Self::Io { .. } => 1,
        }
    }
}
