//! Fraction of observations flagged below the lower limit of normal per
//! age bin, against exact binomial acceptance bands.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use super::{AgeBins, MIN_BIN_COUNT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub age_lo: f64,
    pub age_hi: f64,
    pub n: usize,
    pub k: usize,
    pub proportion: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub inside_band: bool,
    /// `n < 20`: excluded from pass counts.
    pub low_count: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceTable {
    pub level: f64,
    pub bins: AgeBins,
    pub rows: Vec<ExceedanceRow>,
}

impl ExceedanceTable {
    /// Bins with enough observations to be judged.
    pub fn evaluated(&self) -> usize {
        self.rows.iter().filter(|r| !r.low_count).count()
    }

    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| !r.low_count && r.inside_band).count()
    }

    pub fn failed(&self) -> usize {
        self.evaluated() - self.passed()
    }
}

/// Central 95% acceptance band for a Binomial(n, p) proportion:
/// `[k_lo / n, k_hi / n]` with `k_lo` the smallest k whose CDF reaches
/// 0.025 and `k_hi` the smallest k whose CDF reaches 0.975. The ends are
/// widened to include `p` itself; this never changes which counts are
/// accepted, since no multiple of 1/n lies strictly between.
pub fn binomial_band(n: usize, p: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Input("binomial band needs n >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("binomial probability {p} not in (0, 1)")));
    }
    let dist = Binomial::new(p, n as u64).map_err(|e| Error::Domain(e.to_string()))?;
    let (mut lo, mut hi) = (None, None);
    let mut cdf = 0.0;
    for k in 0..=n {
        cdf += dist.pmf(k as u64);
        if lo.is_none() && cdf >= 0.025 {
            lo = Some(k);
        }
        if cdf >= 0.975 {
            hi = Some(k);
            break;
        }
    }
    let lo = lo.unwrap_or(n) as f64 / n as f64;
    let hi = hi.unwrap_or(n) as f64 / n as f64;
    Ok((lo.min(p), hi.max(p)))
}

/// Exceedance table with bins of `bin_width` anchored at
/// `floor(min(ages))`, or at `start` when given. Only occupied bins up to
/// the oldest observation are reported.
pub fn exceedance_table(
    ages: &[f64],
    flags: &[bool],
    level: f64,
    bin_width: f64,
    start: Option<f64>,
) -> Result<ExceedanceTable> {
    if ages.len() != flags.len() {
        return Err(Error::Dimension(format!(
            "{} ages but {} flags",
            ages.len(),
            flags.len()
        )));
    }
    let bins = match start {
        Some(s) => AgeBins::new(s, bin_width)?,
        None => AgeBins::anchored(ages, bin_width)?,
    };
    let mut rows = Vec::new();
    for (k, members) in bins.assign(ages).iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let hits = members.iter().filter(|&&i| flags[i]).count();
        let proportion = hits as f64 / n as f64;
        let (band_lo, band_hi) = binomial_band(n, level)?;
        let (age_lo, age_hi) = bins.bounds(k);
        rows.push(ExceedanceRow {
            age_lo,
            age_hi,
            n,
            k: hits,
            proportion,
            band_lo,
            band_hi,
            inside_band: proportion >= band_lo && proportion <= band_hi,
            low_count: n < MIN_BIN_COUNT,
        });
    }
    Ok(ExceedanceTable { level, bins, rows })
}
