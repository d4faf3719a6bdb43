//! Segmented linear regression baseline.
//!
//! Mean: `b0 + sum_j b_j x_j + h * (age - psi)_+` with a single
//! breakpoint `psi` in age, found by a grid search over the 5th..95th age
//! percentiles followed by golden-section refinement inside the winning
//! grid cell. Residuals are normal with one constant SD below (age <= psi)
//! and another above the breakpoint.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{columns, Covariates, Observation, Response};
use crate::distributions::normal::LN_SQRT_2PI;
use crate::distributions::normal_quantile;
use crate::error::{Error, Result};
use crate::gamlss::{InformationCriteria, Term};

pub const GRID_SIZE: usize = 200;
const GOLDEN_TOL: f64 = 0.01;
const MIN_SEGMENT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlrSettings {
    /// Linear covariate terms (the intercept is implicit). Include `age`
    /// so the hinge slope is a change of age slope.
    pub terms: Vec<Term>,
    pub allow_breakpoint: bool,
}

impl Default for SlrSettings {
    fn default() -> Self {
        SlrSettings {
            terms: vec!["age".parse::<Term>().unwrap(), "height".parse::<Term>().unwrap()],
            allow_breakpoint: true,
        }
    }
}

impl SlrSettings {
    /// Simple linear regression on the same covariates.
    pub fn simple() -> Self {
        SlrSettings {
            allow_breakpoint: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSlrModel {
    pub terms: Vec<Term>,
    pub intercept: f64,
    /// One slope per term.
    pub slopes: Vec<f64>,
    /// Change in age slope above the breakpoint (0 for simple linear).
    pub hinge_slope: f64,
    /// Breakpoint in years; equals the maximum training age when
    /// `simple_linear` is set.
    pub psi: f64,
    pub sd_low: f64,
    pub sd_high: f64,
    pub n_low: usize,
    pub n_high: usize,
    pub simple_linear: bool,
    pub rss: f64,
}

impl FittedSlrModel {
    pub fn n(&self) -> usize {
        self.n_low + self.n_high
    }

    pub fn n_params(&self) -> usize {
        1 + self.slopes.len() + if self.simple_linear { 0 } else { 1 }
    }

    pub fn sd_at(&self, age: f64) -> f64 {
        if self.simple_linear || age <= self.psi {
            self.sd_low
        } else {
            self.sd_high
        }
    }
}

fn design_row(terms: &[Term], c: &Covariates, psi: Option<f64>) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(terms.len() + 2);
    row.push(1.0);
    for t in terms {
        row.push(t.eval(c)?);
    }
    if let Some(psi) = psi {
        row.push((c.age - psi).max(0.0));
    }
    Ok(row)
}

/// Least squares coefficients and residual sum of squares via QR.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("collinear regression design".into()))?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular("collinear regression design".into()));
    }
    let resid = y - x * &beta;
    Ok((beta, resid.norm_squared()))
}

struct Problem {
    base: DMatrix<f64>,
    ages: Vec<f64>,
    y: DVector<f64>,
}

impl Problem {
    fn design(&self, psi: f64) -> DMatrix<f64> {
        let (n, p) = self.base.shape();
        let mut x = self.base.clone().resize_horizontally(p + 1, 0.0);
        for i in 0..n {
            x[(i, p)] = (self.ages[i] - psi).max(0.0);
        }
        x
    }

    fn rss(&self, psi: f64) -> Result<f64> {
        Ok(ols(&self.design(psi), &self.y)?.1)
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Candidate breakpoints: `GRID_SIZE` points spanning the 5th to 95th
/// age percentiles.
pub fn breakpoint_grid(ages: &[f64]) -> Vec<f64> {
    let mut sorted = ages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, 0.05);
    let hi = percentile(&sorted, 0.95);
    (0..GRID_SIZE)
        .map(|j| lo + (hi - lo) * j as f64 / (GRID_SIZE - 1) as f64)
        .collect()
}

/// Residual sum of squares of the hinge model at a given breakpoint.
pub fn rss_at(cov: &[Covariates], y: &[f64], settings: &SlrSettings, psi: f64) -> Result<f64> {
    let mut x = DMatrix::zeros(cov.len(), settings.terms.len() + 2);
    for (i, c) in cov.iter().enumerate() {
        for (j, v) in design_row(&settings.terms, c, Some(psi))?.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    Ok(ols(&x, &DVector::from_column_slice(y))?.1)
}

fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

pub fn fit_slr(data: &[Observation], response: Response, settings: &SlrSettings) -> Result<FittedSlrModel> {
    let (cov, y) = columns(data, response);
    fit_slr_xy(&cov, &y, settings)
}

pub fn fit_slr_xy(cov: &[Covariates], y: &[f64], settings: &SlrSettings) -> Result<FittedSlrModel> {
    let n = y.len();
    if cov.len() != n {
        return Err(Error::Dimension("covariates and responses differ in length".into()));
    }
    if n < 30 {
        return Err(Error::Degenerate(format!("need at least 30 observations, got {n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("responses must be finite".into()));
    }
    let p = settings.terms.len() + 1;
    let mut base = DMatrix::zeros(n, p);
    for (i, c) in cov.iter().enumerate() {
        for (j, v) in design_row(&settings.terms, c, None)?.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Input(format!("covariate value in row {i} is not finite")));
            }
            base[(i, j)] = v;
        }
    }
    let ages: Vec<f64> = cov.iter().map(|c| c.age).collect();
    let problem = Problem {
        base,
        ages: ages.clone(),
        y: DVector::from_column_slice(y),
    };

    if settings.allow_breakpoint {
        let grid = breakpoint_grid(&ages);
        let mut best = (0usize, f64::INFINITY);
        for (j, &psi) in grid.iter().enumerate() {
            let rss = problem.rss(psi)?;
            if rss < best.1 {
                best = (j, rss);
            }
        }
        let j = best.0;
        let lo = grid[j.saturating_sub(1)];
        let hi = grid[(j + 1).min(grid.len() - 1)];
        let (mut psi, mut rss) = (grid[j], best.1);
        if hi > lo {
            let (g_psi, g_rss) = golden_section(|t| problem.rss(t), lo, hi, GOLDEN_TOL)?;
            if g_rss < rss {
                psi = g_psi;
                rss = g_rss;
            }
        }
        let n_low = ages.iter().filter(|&&a| a <= psi).count();
        let n_high = n - n_low;
        if n_low >= MIN_SEGMENT && n_high >= MIN_SEGMENT {
            let (beta, _) = ols(&problem.design(psi), &problem.y)?;
            return Ok(finish(&problem, settings, &beta, Some(psi), rss));
        }
        log::warn!(
            "breakpoint {psi:.2} leaves {n_low}/{n_high} observations per segment; \
             falling back to simple linear regression"
        );
    }
    let (beta, rss) = ols(&problem.base, &problem.y)?;
    Ok(finish(&problem, settings, &beta, None, rss))
}

fn finish(
    problem: &Problem,
    settings: &SlrSettings,
    beta: &DVector<f64>,
    psi: Option<f64>,
    rss: f64,
) -> FittedSlrModel {
    let p_total = beta.len();
    let x = match psi {
        Some(psi) => problem.design(psi),
        None => problem.base.clone(),
    };
    let resid = &problem.y - x * beta;
    let split = psi.unwrap_or(f64::INFINITY);
    let (mut ss_low, mut ss_high, mut n_low, mut n_high) = (0.0, 0.0, 0usize, 0usize);
    for (i, r) in resid.iter().enumerate() {
        if problem.ages[i] <= split {
            ss_low += r * r;
            n_low += 1;
        } else {
            ss_high += r * r;
            n_high += 1;
        }
    }
    let sd = |ss: f64, n: usize, p: usize| (ss / (n.saturating_sub(p).max(1)) as f64).sqrt();
    let (sd_low, sd_high) = match psi {
        // the hinge column vanishes below the breakpoint
        Some(_) => (sd(ss_low, n_low, p_total - 1), sd(ss_high, n_high, p_total)),
        None => {
            let s = sd(ss_low, n_low, p_total);
            (s, s)
        }
    };
    let max_age = problem.ages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let k = settings.terms.len();
    FittedSlrModel {
        terms: settings.terms.clone(),
        intercept: beta[0],
        slopes: beta.rows(1, k).iter().cloned().collect(),
        hinge_slope: if psi.is_some() { beta[k + 1] } else { 0.0 },
        psi: psi.unwrap_or(max_age),
        sd_low: sd_low.max(f64::MIN_POSITIVE),
        sd_high: sd_high.max(f64::MIN_POSITIVE),
        n_low,
        n_high,
        simple_linear: psi.is_none(),
        rss,
    }
}

/// Predicted mean response.
pub fn slr_predict(model: &FittedSlrModel, c: &Covariates) -> Result<f64> {
    let mut v = model.intercept;
    for (t, b) in model.terms.iter().zip(&model.slopes) {
        v += b * t.eval(c)?;
    }
    if !model.simple_linear {
        v += model.hinge_slope * (c.age - model.psi).max(0.0);
    }
    Ok(v)
}

pub fn slr_zscore(y: f64, model: &FittedSlrModel, c: &Covariates) -> Result<f64> {
    Ok((y - slr_predict(model, c)?) / model.sd_at(c.age))
}

/// Lower limit of normal: the `level` centile of the normal predictive
/// distribution.
pub fn slr_lln(model: &FittedSlrModel, c: &Covariates, level: f64) -> Result<f64> {
    Ok(slr_predict(model, c)? + normal_quantile(level)? * model.sd_at(c.age))
}

pub fn slr_zscores(model: &FittedSlrModel, data: &[Observation], response: Response) -> Result<Vec<f64>> {
    data.iter()
        .map(|o| slr_zscore(o.response(response), model, &o.covariates))
        .collect()
}

/// Normal log-likelihood of `y` under the model.
pub fn slr_log_likelihood(model: &FittedSlrModel, cov: &[Covariates], y: &[f64]) -> Result<f64> {
    let mut ll = 0.0;
    for (c, &yi) in cov.iter().zip(y) {
        let sd = model.sd_at(c.age);
        let z = (yi - slr_predict(model, c)?) / sd;
        ll += -LN_SQRT_2PI - sd.ln() - 0.5 * z * z;
    }
    Ok(ll)
}

/// Deviance, AIC and BIC. Degrees of freedom: regression coefficients,
/// the breakpoint, and one or two residual SDs.
pub fn slr_information_criteria(model: &FittedSlrModel, cov: &[Covariates], y: &[f64]) -> Result<InformationCriteria> {
    let ll = slr_log_likelihood(model, cov, y)?;
    let df = model.n_params() + if model.simple_linear { 1 } else { 1 + 2 };
    Ok(InformationCriteria::new(-2.0 * ll, df as f64, y.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hinge_data(n: usize, psi: f64, noise: impl Fn(usize) -> f64) -> (Vec<Covariates>, Vec<f64>) {
        let cov: Vec<Covariates> = (0..n)
            .map(|i| Covariates::new(5.0 + 60.0 * i as f64 / (n - 1) as f64, 160.0))
            .collect();
        let y = cov
            .iter()
            .enumerate()
            .map(|(i, c)| 1.0 + 0.3 * c.age.min(psi) - 0.02 * (c.age - psi).max(0.0) + noise(i))
            .collect();
        (cov, y)
    }

    fn age_only() -> SlrSettings {
        SlrSettings {
            terms: vec!["age".parse::<Term>().unwrap()],
            allow_breakpoint: true,
        }
    }

    #[test]
    fn noiseless_break_recovered() {
        let (cov, y) = hinge_data(600, 18.0, |_| 0.0);
        let m = fit_slr_xy(&cov, &y, &age_only()).unwrap();
        assert!((m.psi - 18.0).abs() < 0.05, "psi = {}", m.psi);
        assert!(m.rss < 1e-3, "rss = {}", m.rss);
        assert!((m.slopes[0] - 0.3).abs() < 1e-2);
        assert!((m.hinge_slope + 0.32).abs() < 1e-2);
    }

    #[test]
    fn hinge_contributes_nothing_at_breakpoint() {
        let (cov, y) = hinge_data(300, 30.0, |i| ((i * 7919) % 13) as f64 * 0.01);
        let m = fit_slr_xy(&cov, &y, &age_only()).unwrap();
        let at = Covariates::new(m.psi, 160.0);
        let linear_only = m.intercept + m.slopes[0] * m.psi;
        assert!((slr_predict(&m, &at).unwrap() - linear_only).abs() < 1e-12);
        let eps = 1e-9;
        let l = slr_predict(&m, &Covariates::new(m.psi - eps, 160.0)).unwrap();
        let r = slr_predict(&m, &Covariates::new(m.psi + eps, 160.0)).unwrap();
        assert!((l - r).abs() < 1e-7);
    }

    #[test]
    fn prediction_matches_hand_assembly() {
        let m = FittedSlrModel {
            terms: vec!["age".parse::<Term>().unwrap(), "height".parse::<Term>().unwrap()],
            intercept: -2.0,
            slopes: vec![0.05, 0.03],
            hinge_slope: -0.08,
            psi: 20.0,
            sd_low: 0.5,
            sd_high: 0.4,
            n_low: 10,
            n_high: 10,
            simple_linear: false,
            rss: 0.0,
        };
        let c = Covariates::new(35.0, 170.0);
        let hand = -2.0 + 0.05 * 35.0 + 0.03 * 170.0 - 0.08 * 15.0;
        assert!((slr_predict(&m, &c).unwrap() - hand).abs() < 1e-12);
        let y = hand + 0.8;
        assert!((slr_zscore(y, &m, &c).unwrap() - 2.0).abs() < 1e-12);
        assert!((slr_zscore(hand, &m, &c).unwrap()).abs() < 1e-12);
        assert!((slr_lln(&m, &c, 0.5).unwrap() - hand).abs() < 1e-12);
    }

    #[test]
    fn lln_example() {
        let m = FittedSlrModel {
            terms: vec![],
            intercept: 4.0,
            slopes: vec![],
            hinge_slope: 0.0,
            psi: 50.0,
            sd_low: 0.5,
            sd_high: 0.5,
            n_low: 40,
            n_high: 0,
            simple_linear: true,
            rss: 0.0,
        };
        let lln = slr_lln(&m, &Covariates::new(30.0, 160.0), 0.05).unwrap();
        assert!((lln - 3.17757).abs() < 1e-4, "{lln}");
        assert!((lln - (4.0 - 1.644_853_626_951_473 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn falls_back_when_segment_too_small() {
        // all but five subjects share one age, so any breakpoint leaves a
        // tiny segment
        let mut cov: Vec<Covariates> = (0..40).map(|_| Covariates::new(30.0, 160.0)).collect();
        for i in 0..5 {
            cov.push(Covariates::new(60.0 + i as f64, 160.0));
        }
        let y: Vec<f64> = (0..45).map(|i| 3.0 + 0.01 * (i % 7) as f64).collect();
        let m = fit_slr_xy(&cov, &y, &age_only()).unwrap();
        assert!(m.simple_linear);
        assert_eq!(m.n_low + m.n_high, 45);
    }

    #[test]
    fn too_few_observations() {
        let (cov, y) = hinge_data(20, 18.0, |_| 0.0);
        assert!(fit_slr_xy(&cov, &y, &age_only()).is_err());
    }
}
