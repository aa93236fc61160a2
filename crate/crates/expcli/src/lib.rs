//! Seeded experiment runner for the `fwsparse` solvers.
//!
//! Each experiment regenerates a Gaussian dictionary and an m-sparse
//! signal per trial, runs the solvers, and writes a versioned CSV, an SVG
//! view of the same data, and a metadata JSON record.

pub mod config;
pub mod curves;
pub mod experiments;
pub mod plot;

use thiserror::Error;

pub use config::{BetaRule, DictKind, ExperimentConfig, FileConfig, MRule};
pub use curves::AggregateCurve;
pub use experiments::{
    analyze, exp1_convergence, exp2_sparsity_sweep, exp3_beta_effect, run_recovery_audit,
    AnalyzeReport, AuditSummary, Exp1Output, Exp2Output, Exp3Output, Metadata,
};

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] fwsparse::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExpError {
    /// Process exit status: 2 for configuration problems, 3 for audit
    /// invariant violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExpError::Config(_) => 2,
            ExpError::Invariant(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExpError>;
