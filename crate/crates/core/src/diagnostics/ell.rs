//! Simultaneous QQ-plot bands with equal local levels.
//!
//! For n standard normal order statistics, the i-th uniform order
//! statistic is Beta(i, n - i + 1). A single local level `alpha` is
//! calibrated by Monte Carlo so that all n pointwise intervals
//! `[BetaInv(alpha/2), BetaInv(1 - alpha/2)]` hold together with the
//! requested coverage; the intervals are mapped to z through the normal
//! quantile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, inv_beta_reg};

use crate::distributions::normal_quantile;
use crate::error::{Error, Result};

/// Replicates per RNG stream; fixed so results do not depend on the
/// thread count.
const SHARD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankBand {
    pub rank: usize,
    pub lo_z: f64,
    pub hi_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllBand {
    pub n: usize,
    pub coverage: f64,
    pub mc_reps: usize,
    pub seed: u64,
    /// Calibrated pointwise level.
    pub alpha: f64,
    /// One band per rank, ascending.
    pub bands: Vec<RankBand>,
}

impl EllBand {
    /// Ranks (1-based) whose sorted z-score falls outside the band.
    pub fn exits(&self, sorted_z: &[f64]) -> Result<Vec<usize>> {
        if sorted_z.len() != self.n {
            return Err(Error::Dimension(format!(
                "band built for n = {} but {} z-scores given",
                self.n,
                sorted_z.len()
            )));
        }
        Ok(self
            .bands
            .iter()
            .zip(sorted_z)
            .filter(|(b, &z)| z < b.lo_z || z > b.hi_z)
            .map(|(b, _)| b.rank)
            .collect())
    }

    pub fn contains(&self, sorted_z: &[f64]) -> Result<bool> {
        Ok(self.exits(sorted_z)?.is_empty())
    }
}

/// Beta(i, n - i + 1) CDF of the i-th order statistic of n uniforms.
fn order_cdf(i: usize, n: usize, u: f64) -> f64 {
    beta_reg(i as f64, (n - i + 1) as f64, u.clamp(0.0, 1.0))
}

/// Smallest two-sided pointwise p-value over all ranks of one sorted
/// uniform sample.
pub fn min_local_level(sorted_u: &[f64]) -> f64 {
    let n = sorted_u.len();
    sorted_u
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let f = order_cdf(k + 1, n, u);
            2.0 * f.min(1.0 - f)
        })
        .fold(1.0, f64::min)
}

/// Minimum local level of one sorted sample, exact when below `cut`.
/// Ranks inside the screening band `[lo_i, hi_i]` have local level at
/// least `cut` and are skipped; the result is `1.0` if every rank is
/// inside.
fn screened_min(sorted_u: &[f64], screen: &[(f64, f64)]) -> f64 {
    let n = sorted_u.len();
    let mut s: f64 = 1.0;
    for (k, (&u, &(lo, hi))) in sorted_u.iter().zip(screen).enumerate() {
        if u < lo || u > hi {
            let f = order_cdf(k + 1, n, u);
            s = s.min(2.0 * f.min(1.0 - f));
        }
    }
    s
}

/// Simulated minimum local levels, sorted. Values at or above `cut` are
/// only lower bounds unless `screen` is `None`.
fn simulate(n: usize, reps: usize, seed: u64, screen: Option<&[(f64, f64)]>) -> Vec<f64> {
    let shards = reps.div_ceil(SHARD);
    let mut stats: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = SHARD.min(reps - s * SHARD);
            let mut u = vec![0.0; n];
            (0..count)
                .map(|_| {
                    for x in u.iter_mut() {
                        *x = rng.gen::<f64>();
                    }
                    u.sort_by(f64::total_cmp);
                    match screen {
                        Some(b) => screened_min(&u, b),
                        None => min_local_level(&u),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    stats
}

/// Pointwise intervals for the order statistics at local level `alpha`.
fn uniform_band(n: usize, alpha: f64) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let (a, b) = (i as f64, (n - i + 1) as f64);
            (inv_beta_reg(a, b, alpha / 2.0), inv_beta_reg(a, b, 1.0 - alpha / 2.0))
        })
        .collect()
}

/// Zero-based index of the lower empirical `q` quantile among `reps`
/// sorted values. The small offset absorbs rounding in `1 - coverage`.
fn quantile_index(q: f64, reps: usize) -> usize {
    ((q * reps as f64 - 1e-9).ceil() as usize).clamp(1, reps) - 1
}

fn calibrate(n: usize, coverage: f64, mc_reps: usize, seed: u64) -> f64 {
    let q = 1.0 - coverage;
    let idx = quantile_index(q, mc_reps);
    // The calibrated level never exceeds the pointwise level and shrinks
    // roughly like 1 / sqrt(n), so exact values are only needed below a
    // small cut. Each cut is padded so rounding in the inverse beta cannot
    // hide a rank; a cut that turns out too small falls back to the next.
    let mut cuts = vec![1.5 * q];
    let tight = 10.0 * q / (n as f64).sqrt();
    if tight < q {
        cuts.insert(0, tight);
    }
    for cut in cuts {
        let screen = uniform_band(n, cut.min(1.0));
        let stats = simulate(n, mc_reps, seed, Some(&screen));
        if stats[idx] < cut / 1.5 {
            return stats[idx];
        }
    }
    simulate(n, mc_reps, seed, None)[idx]
}

/// ELL band for `n` z-scores. `alpha` is the `1 - coverage` empirical
/// quantile (inverse ECDF, lower value) of the simulated minimum local
/// levels. For `n = 1` the pointwise and simultaneous levels coincide and
/// `alpha = 1 - coverage` without simulation.
pub fn ell_qq_band(n: usize, coverage: f64, mc_reps: usize, seed: u64) -> Result<EllBand> {
    if n == 0 {
        return Err(Error::Input("ELL band needs n >= 1".into()));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Input(format!("coverage {coverage} not in (0, 1)")));
    }
    if mc_reps == 0 {
        return Err(Error::Input("mc_reps must be positive".into()));
    }
    let alpha = if n == 1 {
        1.0 - coverage
    } else {
        calibrate(n, coverage, mc_reps, seed)
    };
    if !(alpha > 0.0) {
        return Err(Error::Degenerate(format!(
            "calibrated ELL level is {alpha}; increase mc_reps"
        )));
    }
    let bands = (1..=n)
        .map(|i| {
            let (a, b) = (i as f64, (n - i + 1) as f64);
            let lo = normal_quantile(inv_beta_reg(a, b, alpha / 2.0))?;
            let hi = normal_quantile(inv_beta_reg(a, b, 1.0 - alpha / 2.0))?;
            Ok(RankBand { rank: i, lo_z: lo, hi_z: hi })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EllBand {
        n,
        coverage,
        mc_reps,
        seed,
        alpha,
        bands,
    })
}
