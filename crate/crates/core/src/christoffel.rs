//! Outlier scoring through the inverse Christoffel function, and the
//! streaming detector that couples scoring with batched rank-k learning.
//!
//! The raw score of a point is the quadratic form Q(x) = v(x)ᵀ·M⁻¹·v(x)
//! against the normalized inverse moment matrix. Averaged over the training
//! points Q equals the basis size s exactly (trace identity), which makes
//! s the natural default threshold: scores are reported relative to a
//! configurable γ, and a point is an outlier when Q/γ ≥ 1.

use crate::error::{Error, Result};
use crate::mat::dot;
use crate::moment::MomentState;
use crate::update::UpdateMethod;

/// What the detector learns from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LearnPolicy {
    /// Integrate every scored point.
    Always,
    /// Integrate only points classified as inliers.
    InliersOnly,
    /// Score only; never touch the state.
    Never,
}

/// Detector configuration. `gamma = None` selects the trace-identity
/// default γ = s, which thresholds at the training mean of the raw score.
#[derive(Clone, Debug)]
pub struct DetectorConfig {
    pub gamma: Option<f64>,
    pub learn_policy: LearnPolicy,
    pub batch_size: usize,
    pub method: UpdateMethod,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            learn_policy: LearnPolicy::InliersOnly,
            batch_size: 1,
            method: UpdateMethod::Auto,
        }
    }
}

/// Score of a single point.
#[derive(Clone, Copy, Debug)]
pub struct ScoreReport {
    /// Raw inverse Christoffel value Q(x).
    pub inverse_cf: f64,
    /// Q(x) / γ.
    pub score: f64,
    /// score ≥ 1, boundary inclusive.
    pub is_outlier: bool,
}

/// Q(x) = v(x)ᵀ·M⁻¹·v(x). Strictly positive when the inverse is
/// numerically SPD.
pub fn inverse_cf(state: &MomentState, x: &[f64]) -> Result<f64> {
    let basis = state.basis().ok_or(Error::MissingBasis)?;
    let v = basis.vectorize(x)?;
    let inv = state.inverse();
    let mut q = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        q += vi * dot(inv.row(i), &v);
    }
    Ok(q)
}

/// Score `x` against threshold `gamma`.
pub fn score(state: &MomentState, x: &[f64], gamma: f64) -> Result<ScoreReport> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must be positive (got {gamma})"
        )));
    }
    let q = inverse_cf(state, x)?;
    let s = q / gamma;
    Ok(ScoreReport {
        inverse_cf: q,
        score: s,
        is_outlier: s >= 1.0,
    })
}

/// Streaming detector: scores points one at a time and folds buffered
/// points into the moment state one rank-k batch at a time. Single-writer;
/// clone the inner state for concurrent read-only scoring.
#[derive(Clone, Debug)]
pub struct StreamDetector {
    state: MomentState,
    gamma: f64,
    learn_policy: LearnPolicy,
    batch_size: usize,
    method: UpdateMethod,
    pending: Vec<Vec<f64>>,
}

impl StreamDetector {
    pub fn new(state: MomentState, config: &DetectorConfig) -> Result<Self> {
        if state.basis().is_none() {
            return Err(Error::MissingBasis);
        }
        if config.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be >= 1".to_string()));
        }
        let gamma = config.gamma.unwrap_or(state.width() as f64);
        if !(gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be positive (got {gamma})"
            )));
        }
        Ok(Self {
            state,
            gamma,
            learn_policy: config.learn_policy,
            batch_size: config.batch_size,
            method: config.method,
            pending: Vec::new(),
        })
    }

    pub fn state(&self) -> &MomentState {
        &self.state
    }

    pub fn into_state(self) -> MomentState {
        self.state
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Score one point, buffer it according to the learn policy, and apply
    /// a rank-k update once the buffer holds a full batch.
    pub fn step(&mut self, x: &[f64]) -> Result<ScoreReport> {
        let report = score(&self.state, x, self.gamma)?;
        let learn = match self.learn_policy {
            LearnPolicy::Always => true,
            LearnPolicy::InliersOnly => !report.is_outlier,
            LearnPolicy::Never => false,
        };
        if learn {
            self.pending.push(x.to_vec());
            if self.pending.len() >= self.batch_size {
                self.flush_pending()?;
            }
        }
        Ok(report)
    }

    /// Fold any partially filled buffer into the state. Returns whether an
    /// update was applied.
    pub fn flush_pending(&mut self) -> Result<bool> {
        if self.pending.is_empty() {
            return Ok(false);
        }
        let basis = self.state.basis().ok_or(Error::MissingBasis)?;
        let batch = basis.vectorize_batch(&self.pending)?;
        self.state = self.state.apply_update(&batch, self.method)?;
        self.pending.clear();
        Ok(true)
    }
}
