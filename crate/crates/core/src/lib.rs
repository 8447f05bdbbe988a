//! Density evolution and threshold analysis for spatially coupled LDPC
//! ensembles over binary memoryless symmetric (BMS) channels.
//!
//! The crate provides:
//!
//! - a quantized symmetric L-density algebra (variable-side and check-side
//!   convolutions plus the usual scalar functionals),
//! - BMS channel families (BEC, BSC, BAWGN) with entropy inversion and the
//!   BAWGN GEXIT kernel,
//! - uncoupled and coupled density evolution with BP-threshold bisection,
//!   including a fast scalar path for the BEC,
//! - entropy-anchored fixed-point continuation (EBP GEXIT curves) and the
//!   Maxwell-construction MAP-threshold upper bound,
//! - closed-form design rates for line, circular and one-sided ensembles and
//!   the rate-loss mitigation sweeps.

pub mod bec;
pub mod channel;
pub mod de;
pub mod density;
pub mod ebp;
pub mod grid;
pub mod rates;

pub use channel::{ChannelFamily, ChannelParam};
pub use de::{Constellation, CoupledSpec, DeReport, ScheduleSpec, StopReason, StopRule, Topology};
pub use density::Density;
pub use ebp::{EbpCurve, EbpPoint};
pub use grid::GridSpec;

use thiserror::Error;

/// Errors for the whole analysis stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("incompatible grids: {0} vs {1}")]
    GridMismatch(String, String),
    #[error("invalid channel parameter: {0}")]
    InvalidParam(String),
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
    #[error("mixture weights must be non-negative and sum to 1 (sum = {0})")]
    BadWeights(f64),
    #[error("malformed check profile: {0}")]
    BadProfile(String),
    #[error("no bisection bracket: {0}")]
    NoBracket(String),
    #[error("anchor {0} unattainable within the channel parameter range")]
    AnchorUnattainable(f64),
    #[error("curve area never reaches rate {rate} (accumulated {reached})")]
    AreaShortfall { rate: f64, reached: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
