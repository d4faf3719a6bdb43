//! Normal QQ coordinates for z-scores.

use serde::{Deserialize, Serialize};

use crate::distributions::normal_quantile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub rank: usize,
    /// Normal quantile at plotting position `(i - 0.5) / n`.
    pub theoretical: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqData {
    pub points: Vec<QqPoint>,
    /// Theoretical z of the 5th centile, the lower limit of normal.
    pub lln_marker: f64,
}

pub fn qq_points(z: &[f64]) -> Result<QqData> {
    if z.is_empty() {
        return Err(Error::Input("no z-scores".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("z-scores must be finite".into()));
    }
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let points = sorted
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            Ok(QqPoint {
                rank: k + 1,
                theoretical: normal_quantile((k as f64 + 0.5) / n)?,
                empirical: e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QqData {
        points,
        lln_marker: normal_quantile(0.05)?,
    })
}

/// Number of exiting ranks (1-based) whose theoretical quantile lies
/// within `window` of the LLN marker.
pub fn exits_near_marker(qq: &QqData, exits: &[usize], window: f64) -> usize {
    exits
        .iter()
        .filter(|&&r| {
            qq.points
                .get(r.wrapping_sub(1))
                .is_some_and(|p| (p.theoretical - qq.lln_marker).abs() <= window)
        })
        .count()
}
