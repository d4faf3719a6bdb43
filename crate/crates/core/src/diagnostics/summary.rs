//! Moments of z-scores per age group.

use serde::{Deserialize, Serialize};

use super::{AgeBins, MIN_BIN_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub age_lo: f64,
    pub age_hi: f64,
    pub n: usize,
    pub mean: f64,
    /// Sample SD (divisor n - 1); 0 for a single observation.
    pub sd: f64,
    /// Moment coefficient m3 / m2^1.5; 0 when degenerate.
    pub skewness: f64,
    pub low_count: bool,
    /// All z-scores in the group are equal.
    pub degenerate: bool,
}

pub fn zscore_group_summary(z: &[f64], ages: &[f64], bin_width: f64, start: Option<f64>) -> Result<Vec<GroupSummary>> {
    if z.len() != ages.len() {
        return Err(Error::Dimension(format!("{} z-scores but {} ages", z.len(), ages.len())));
    }
    let bins = match start {
        Some(s) => AgeBins::new(s, bin_width)?,
        None => AgeBins::anchored(ages, bin_width)?,
    };
    let mut out = Vec::new();
    for (k, members) in bins.assign(ages).iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let nf = n as f64;
        let mean = members.iter().map(|&i| z[i]).sum::<f64>() / nf;
        let m2 = members.iter().map(|&i| (z[i] - mean).powi(2)).sum::<f64>() / nf;
        let m3 = members.iter().map(|&i| (z[i] - mean).powi(3)).sum::<f64>() / nf;
        let first = z[members[0]];
        let degenerate = members.iter().all(|&i| z[i] == first);
        let sd = if n > 1 { (m2 * nf / (nf - 1.0)).sqrt() } else { 0.0 };
        let skewness = if degenerate || m2 <= 0.0 { 0.0 } else { m3 / m2.powf(1.5) };
        let (age_lo, age_hi) = bins.bounds(k);
        out.push(GroupSummary {
            age_lo,
            age_hi,
            n,
            mean,
            sd,
            skewness,
            low_count: n < MIN_BIN_COUNT,
            degenerate,
        });
    }
    Ok(out)
}
