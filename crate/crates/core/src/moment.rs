//! Streaming empirical moment matrices and their inverses.
//!
//! A fitted [`MomentState`] summarizes N samples through the normalized
//! moment matrix `M = (1/N)·XᵀX + λI` and its inverse. Integrating a batch
//! of k new rows runs in three steps: denormalize (drop the 1/N), correct
//! the inverse with one of the rank-k kernels, renormalize by N+k. Only the
//! inverse is required for scoring, so the matrix itself is retained only
//! on request (direct inversion is the one method that needs it).

use std::ops::Range;
use std::sync::Arc;

use crate::basis::{MonomialBasis, UpdateBatch};
use crate::error::{Error, Result};
use crate::mat::{axpy, identity_residual, Mat};
use crate::update::{
    di_update, ism_update, select_method, spd_invert, wmi_update, FlopLedger, SelectionRule,
    UpdateMethod,
};

/// Fitting knobs.
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Ridge term λ added to the normalized matrix diagonal. Zero by
    /// default; a positive value is the guard rail for samples counts close
    /// to the basis size. Applied at fit time only.
    pub lambda: f64,
    /// Retain the normalized moment matrix alongside its inverse. Required
    /// for direct-inversion updates.
    pub track_matrix: bool,
    /// Re-symmetrize the inverse every this many updates to counter drift
    /// in long Sherman-Morrison chains. Disabled by default so update
    /// timings stay comparable across methods.
    pub resymmetrize_every: Option<u64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            track_matrix: false,
            resymmetrize_every: None,
        }
    }
}

/// Streaming summary of a sample cloud: sample count, normalized inverse
/// moment matrix, optionally the matrix itself, and the basis the samples
/// were vectorized through (absent when fitted from raw design rows).
///
/// Updates take `&mut self` exclusively; read-only scoring against a clone
/// or snapshot is freely shareable.
#[derive(Clone, Debug)]
pub struct MomentState {
    basis: Option<Arc<MonomialBasis>>,
    width: usize,
    sample_count: u64,
    lambda: f64,
    inv: Mat,
    matrix: Option<Mat>,
    resymmetrize_every: Option<u64>,
    updates_applied: u64,
}

/// gram += Σ over `rows` of the outer product of each design row with
/// itself, accumulated row by row so prefix sums extend bitwise.
pub(crate) fn accumulate_gram(gram: &mut Mat, design: &Mat, rows: Range<usize>) {
    let s = design.cols();
    for l in rows {
        let row = design.row(l);
        for i in 0..s {
            axpy(gram.row_mut(i), row[i], row);
        }
    }
}

impl MomentState {
    /// Fit on points in R^d, vectorized through `basis`.
    pub fn fit(points: &[Vec<f64>], basis: MonomialBasis, opts: &FitOptions) -> Result<Self> {
        let basis = Arc::new(basis);
        let s = basis.size();
        let mut design = Mat::zeros(points.len(), s);
        for (i, p) in points.iter().enumerate() {
            let v = basis.vectorize(p)?;
            design.row_mut(i).copy_from_slice(&v);
        }
        let mut state = Self::fit_design(&design, opts)?;
        state.basis = Some(basis);
        Ok(state)
    }

    /// Fit directly on pre-vectorized design rows (one sample per row).
    /// The resulting state cannot score points, only be updated.
    pub fn fit_design(design: &Mat, opts: &FitOptions) -> Result<Self> {
        let n = design.rows() as u64;
        let s = design.cols();
        if n <= s as u64 && opts.lambda == 0.0 {
            return Err(Error::RankDeficient { n, s });
        }
        if n == 0 {
            return Err(Error::RankDeficient { n: 0, s });
        }

        let mut normalized = Mat::zeros(s, s);
        accumulate_gram(&mut normalized, design, 0..design.rows());
        normalized.scale(1.0 / n as f64);
        if opts.lambda != 0.0 {
            normalized.add_diagonal(opts.lambda);
        }

        let inv = spd_invert(&normalized, &mut FlopLedger::new())?;
        Ok(Self {
            basis: None,
            width: s,
            sample_count: n,
            lambda: opts.lambda,
            inv,
            matrix: opts.track_matrix.then_some(normalized),
            resymmetrize_every: opts.resymmetrize_every,
            updates_applied: 0,
        })
    }

    pub fn basis(&self) -> Option<&MonomialBasis> {
        self.basis.as_deref()
    }

    pub(crate) fn restore(
        basis: Option<Arc<MonomialBasis>>,
        width: usize,
        sample_count: u64,
        lambda: f64,
        inv: Mat,
        matrix: Option<Mat>,
        resymmetrize_every: Option<u64>,
        updates_applied: u64,
    ) -> Self {
        Self {
            basis,
            width,
            sample_count,
            lambda,
            inv,
            matrix,
            resymmetrize_every,
            updates_applied,
        }
    }

    /// Basis size s (the matrix dimension).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn updates_applied(&self) -> u64 {
        self.updates_applied
    }

    pub fn resymmetrize_every(&self) -> Option<u64> {
        self.resymmetrize_every
    }

    /// Inverse of the normalized moment matrix.
    pub fn inverse(&self) -> &Mat {
        &self.inv
    }

    /// The normalized moment matrix, when retained.
    pub fn matrix(&self) -> Option<&Mat> {
        self.matrix.as_ref()
    }

    /// Denormalized inverse: M⁻¹ / N.
    pub fn denormalized_inverse(&self) -> Result<Mat> {
        if self.sample_count == 0 {
            return Err(Error::EmptyState);
        }
        let n = self.sample_count as f64;
        let mut out = self.inv.clone();
        out.scale(1.0 / n);
        Ok(out)
    }

    /// Denormalized matrix: N·M. Requires `track_matrix`.
    pub fn denormalized_matrix(&self) -> Result<Mat> {
        if self.sample_count == 0 {
            return Err(Error::EmptyState);
        }
        let m = self.matrix.as_ref().ok_or(Error::MissingMatrix)?;
        Ok(m.scaled(self.sample_count as f64))
    }

    /// ‖I − M·M⁻¹‖_F for states that retain the matrix.
    pub fn consistency_residual(&self) -> Option<f64> {
        self.matrix
            .as_ref()
            .map(|m| identity_residual(m, &self.inv))
    }

    /// Integrate a batch of k new samples and return the updated state.
    ///
    /// `Auto` resolves through the measured selection rule. The result is
    /// equivalent (within tolerance) to refitting on the union of old and
    /// new samples.
    pub fn apply_update(&self, batch: &UpdateBatch, method: UpdateMethod) -> Result<MomentState> {
        if batch.width() != self.width {
            return Err(Error::ShapeMismatch {
                expected: self.width,
                got: batch.width(),
            });
        }
        if self.sample_count == 0 {
            return Err(Error::EmptyState);
        }
        let k = batch.k();
        let method = match method {
            UpdateMethod::Auto => {
                let preferred = select_method(self.width, k, SelectionRule::Experimental);
                // A state without the retained matrix cannot run DI; the
                // batched inverse-only route stands in. Explicitly requested
                // DI still errors below.
                if preferred == UpdateMethod::Di && self.matrix.is_none() {
                    UpdateMethod::Wmi
                } else {
                    preferred
                }
            }
            m => m,
        };

        let n = self.sample_count as f64;
        let mut ledger = FlopLedger::new();
        let x = batch.design();

        let raw_updated_inv = match method {
            UpdateMethod::Di => {
                let m_raw = self.denormalized_matrix()?;
                di_update(&m_raw, x, &mut ledger)?
            }
            UpdateMethod::Ism => {
                let raw_inv = self.denormalized_inverse()?;
                ism_update(&raw_inv, x, &mut ledger)?
            }
            UpdateMethod::Wmi => {
                let raw_inv = self.denormalized_inverse()?;
                wmi_update(&raw_inv, x, &mut ledger)?
            }
            UpdateMethod::Auto => unreachable!("Auto resolved above"),
        };

        let new_count = self.sample_count + k as u64;
        let mut inv = renormalize(raw_updated_inv, self.sample_count, k);

        let matrix = match &self.matrix {
            Some(m) => {
                let mut raw = m.scaled(n);
                accumulate_gram(&mut raw, x, 0..k);
                raw.scale(1.0 / new_count as f64);
                Some(raw)
            }
            None => None,
        };

        let updates_applied = self.updates_applied + 1;
        if let Some(period) = self.resymmetrize_every {
            if period > 0 && updates_applied % period == 0 {
                inv.symmetrize();
            }
        }

        Ok(MomentState {
            basis: self.basis.clone(),
            width: self.width,
            sample_count: new_count,
            lambda: self.lambda,
            inv,
            matrix,
            resymmetrize_every: self.resymmetrize_every,
            updates_applied,
        })
    }
}

/// Renormalize an updated raw inverse: multiply by N + k.
pub fn renormalize(mut raw_updated_inv: Mat, n: u64, k: usize) -> Mat {
    raw_updated_inv.scale((n + k as u64) as f64);
    raw_updated_inv
}
