//! Calibration diagnostics for fitted reference equations: binned
//! exceedance rates with exact binomial acceptance bands, QQ points with
//! simultaneous equal-local-level bands, status classification with
//! Cohen's kappa, and per-age-group z-score summaries.

pub mod ell;
pub mod exceedance;
pub mod qq;
pub mod status;
pub mod summary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ell::{ell_qq_band, EllBand, RankBand};
pub use exceedance::{binomial_band, exceedance_table, ExceedanceRow, ExceedanceTable};
pub use qq::{exits_near_marker, qq_points, QqData, QqPoint};
pub use status::{classify_status, cross_tab_and_kappa, StatusTable, StatusTaxonomy};
pub use summary::{zscore_group_summary, GroupSummary};

/// Bins with fewer observations are reported but excluded from pass/fail.
pub const MIN_BIN_COUNT: usize = 20;

/// Half-open age bins `[start + k w, start + (k+1) w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeBins {
    pub start: f64,
    pub width: f64,
}

impl AgeBins {
    /// Bins of `width` anchored at `floor(min(ages))`.
    pub fn anchored(ages: &[f64], width: f64) -> Result<Self> {
        let min = ages.iter().copied().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::Input("no finite ages to bin".into()));
        }
        AgeBins::new(min.floor(), width)
    }

    pub fn new(start: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() || !start.is_finite() {
            return Err(Error::Input(format!("invalid age bins: start {start}, width {width}")));
        }
        Ok(AgeBins { start, width })
    }

    /// Bin index of `age`; `None` below `start` or for non-finite ages.
    pub fn index(&self, age: f64) -> Option<usize> {
        if !age.is_finite() || age < self.start {
            return None;
        }
        Some(((age - self.start) / self.width).floor() as usize)
    }

    pub fn bounds(&self, k: usize) -> (f64, f64) {
        let lo = self.start + k as f64 * self.width;
        (lo, lo + self.width)
    }

    /// Indices of observations per bin, for bins up to the last occupied
    /// one. Ages below `start` are dropped.
    pub fn assign(&self, ages: &[f64]) -> Vec<Vec<usize>> {
        let mut bins: Vec<Vec<usize>> = Vec::new();
        for (i, &a) in ages.iter().enumerate() {
            if let Some(k) = self.index(a) {
                if k >= bins.len() {
                    bins.resize_with(k + 1, Vec::new);
                }
                bins[k].push(i);
            }
        }
        bins
    }
}
