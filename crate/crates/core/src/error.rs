use thiserror::Error;

use crate::apg::{ApgTrace, Certificate};
use crate::model::OracleCounters;
use crate::outer::{KktReport, OuterTraceRow};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle returned a non-finite value at coordinate {coordinate}")]
    NonFinite { coordinate: usize },

    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    LineSearchFailed { iteration: usize, backtracks: usize },

    #[error("multiplier coordinate {index} is outside the dual cone (defect {defect:e})")]
    NotInDualCone { index: usize, defect: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("iteration budget of {} exhausted", .0.iterations)]
    ApgTimeout(Box<ApgTimeout>),

    #[error("outer iteration budget of {} exhausted", .0.rows.len())]
    OuterTimeout(Box<OuterTimeout>),

    #[error("problem generation failed: {0}")]
    Generation(String),
}

/// Partial result of an inner solve that ran out of iterations.
#[derive(Debug, Clone)]
pub struct ApgTimeout {
    pub iterations: usize,
    pub best: Option<Certificate>,
    pub trace: ApgTrace,
}

/// Partial result of an outer solve that ran out of outer iterations.
#[derive(Debug, Clone)]
pub struct OuterTimeout {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Smallest certified bound seen (residual bound for the proximal point
    /// wrapper, max of the two KKT residuals for the augmented Lagrangian).
    pub best_bound: f64,
    pub best_report: Option<KktReport>,
    pub rows: Vec<OuterTraceRow>,
    /// Oracle totals up to the point the budget ran out.
    pub counters: OracleCounters,
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
