//! Box-Cox Cole & Green (LMS) distribution.
//!
//! The density is the untruncated LMS form: the Box-Cox transform
//! `z = ((y/mu)^nu - 1) / (nu * sigma)` is treated as exactly standard
//! normal. The exact BCCG renormalises by `Phi(1/(sigma*|nu|))`, which is
//! within 1e-9 of one for the sigma and nu values met in lung function
//! reference work, so it is omitted throughout (density, CDF and z-scores
//! are mutually consistent under this convention).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normal::{normal_cdf, normal_quantile, LN_SQRT_2PI};
use crate::error::{Error, Result};

/// Below this |nu| the logarithmic (lognormal) branch is used.
pub const NU_EPS: f64 = 1e-7;

/// Below this |nu * ln(y/mu)| the nu-derivative of z switches to its
/// power series.
const SERIES_EPS: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BccgParams {
    /// Median, in response units.
    pub mu: f64,
    /// Approximate coefficient of variation.
    pub sigma: f64,
    /// Box-Cox power (skewness).
    pub nu: f64,
}

impl BccgParams {
    pub fn new(mu: f64, sigma: f64, nu: f64) -> Result<Self> {
        let p = BccgParams { mu, sigma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Domain(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.nu.is_finite() {
            return Err(Error::Domain(format!("nu must be finite, got {}", self.nu)));
        }
        Ok(())
    }

    fn check_y(&self, y: f64) -> Result<()> {
        self.validate()?;
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::Domain(format!("response must be positive, got {y}")));
        }
        Ok(())
    }

    /// Standard-normal deviate of `y`.
    pub fn zscore(&self, y: f64) -> Result<f64> {
        self.check_y(y)?;
        Ok(self.zscore_unchecked(y))
    }

    pub(crate) fn zscore_unchecked(&self, y: f64) -> f64 {
        let l = (y / self.mu).ln();
        if self.nu.abs() > NU_EPS {
            (self.nu * l).exp_m1() / (self.nu * self.sigma)
        } else {
            l / self.sigma
        }
    }

    /// Value of `y` at cumulative probability `prob`.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        self.validate()?;
        let z = normal_quantile(prob)?;
        self.quantile_at_z(z).ok_or(Error::OutOfSupport {
            prob,
            mu: self.mu,
            sigma: self.sigma,
            nu: self.nu,
        })
    }

    /// Inverse of the z-score map; `None` outside the support.
    pub fn quantile_at_z(&self, z: f64) -> Option<f64> {
        if self.nu.abs() > NU_EPS {
            let base = self.nu * self.sigma * z;
            if 1.0 + base <= 0.0 {
                return None;
            }
            let y = self.mu * (base.ln_1p() / self.nu).exp();
            if y.is_finite() && y > 0.0 {
                Some(y)
            } else {
                None
            }
        } else {
            Some(self.mu * (self.sigma * z).exp())
        }
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        Ok(normal_cdf(self.zscore(y)?))
    }

    pub fn logpdf(&self, y: f64) -> Result<f64> {
        self.check_y(y)?;
        Ok(self.logpdf_unchecked(y))
    }

    pub(crate) fn logpdf_unchecked(&self, y: f64) -> f64 {
        let z = self.zscore_unchecked(y);
        (self.nu - 1.0) * y.ln() - self.nu * self.mu.ln() - self.sigma.ln() - LN_SQRT_2PI
            - 0.5 * z * z
    }

    pub fn pdf(&self, y: f64) -> Result<f64> {
        Ok(self.logpdf(y)?.exp())
    }

    /// Gradient of the log density with respect to (mu, sigma, nu).
    pub fn logpdf_gradient(&self, y: f64) -> Result<[f64; 3]> {
        self.check_y(y)?;
        Ok(self.gradient_unchecked(y))
    }

    pub(crate) fn gradient_unchecked(&self, y: f64) -> [f64; 3] {
        let (mu, sigma, nu) = (self.mu, self.sigma, self.nu);
        let l = (y / mu).ln();
        let z = self.zscore_unchecked(y);
        let d_mu = z / (mu * sigma) + nu * (z * z - 1.0) / mu;
        let d_sigma = (z * z - 1.0) / sigma;
        let t = nu * l;
        // dz/dnu = l^2 / sigma * g(t), g(t) = (t e^t - (e^t - 1)) / t^2
        let g = if t.abs() < SERIES_EPS {
            0.5 + t / 3.0 + t * t / 8.0 + t * t * t / 30.0 + t.powi(4) / 144.0
        } else {
            (t * t.exp() - t.exp_m1()) / (t * t)
        };
        let dz_dnu = l * l / sigma * g;
        let d_nu = l - z * dz_dnu;
        [d_mu, d_sigma, d_nu]
    }

    /// Expected Fisher information (diagonal) with respect to
    /// (mu, sigma, nu) under the untruncated LMS model.
    pub fn expected_information(&self) -> [f64; 3] {
        let (mu, sigma, nu) = (self.mu, self.sigma, self.nu);
        [
            (1.0 + 2.0 * nu * nu * sigma * sigma) / (mu * mu * sigma * sigma),
            2.0 / (sigma * sigma),
            1.75 * sigma * sigma,
        ]
    }

    /// Draws from the distribution with an explicit generator. Draws that
    /// fall outside the support are re-drawn; the number of re-draws is
    /// returned alongside the sample.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
        self.validate()?;
        let mut out = Vec::with_capacity(n);
        let mut redraws = 0usize;
        while out.len() < n {
            let u: f64 = rng.gen();
            if u <= 0.0 {
                continue;
            }
            let z = normal_quantile(u)?;
            match self.quantile_at_z(z) {
                Some(y) => out.push(y),
                None => {
                    redraws += 1;
                    if redraws > 1000 + 100 * n {
                        return Err(Error::Domain(
                            "support too narrow to sample from".to_string(),
                        ));
                    }
                }
            }
        }
        if redraws as f64 > 0.001 * n as f64 {
            log::warn!(
                "bccg sample: {redraws} of {n} draws fell outside the support and were re-drawn"
            );
        }
        Ok((out, redraws))
    }
}

/// Seeded sample of size `n`. The generator is ChaCha8 seeded through
/// `seed_from_u64(seed)`.
pub fn bccg_sample(p: &BccgParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(p.sample_with(n, &mut rng)?.0)
}

pub fn bccg_zscore(y: f64, p: &BccgParams) -> Result<f64> {
    p.zscore(y)
}

pub fn bccg_quantile(prob: f64, p: &BccgParams) -> Result<f64> {
    p.quantile(prob)
}

pub fn bccg_cdf(y: f64, p: &BccgParams) -> Result<f64> {
    p.cdf(y)
}

pub fn bccg_logpdf(y: f64, p: &BccgParams) -> Result<f64> {
    p.logpdf(y)
}
