//! Streaming maintenance of the inverse of a symmetric positive definite
//! moment matrix under rank-k updates, with three interchangeable update
//! strategies, cost models for choosing between them, a Christoffel-function
//! outlier score, and a benchmark harness for timing and error studies.
//!
//! The short version of the selection rule: iterate Sherman-Morrison for a
//! rank-1 update, use the Woodbury identity while k stays below s/3, and
//! rebuild-and-invert beyond that.

pub mod basis;
pub mod bench;
pub mod christoffel;
pub mod costmodel;
pub mod eigen;
pub mod error;
pub mod mat;
pub mod moment;
pub mod snapshot;
pub mod update;

pub use basis::{basis_size, MonomialBasis, MultiIndex, UpdateBatch};
pub use christoffel::{inverse_cf, score, DetectorConfig, LearnPolicy, ScoreReport, StreamDetector};
pub use error::{Error, Result};
pub use mat::Mat;
pub use moment::{renormalize, FitOptions, MomentState};
pub use update::{
    di_update, ism_update, select_method, spd_invert, wmi_update, FlopLedger, SelectionRule,
    UpdateMethod,
};
