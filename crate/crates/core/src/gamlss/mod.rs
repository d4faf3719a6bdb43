//! BCCG distributional regression fitted by the RS algorithm: each of
//! mu, sigma and nu gets its own predictor (linear terms plus an optional
//! penalised spline in age) and the predictors are updated in turn by
//! penalised iteratively reweighted least squares.

mod fit;
pub mod formula;

use serde::{Deserialize, Serialize};

use crate::data::{Covariates, Observation, Response};
use crate::distributions::BccgParams;
use crate::error::{Error, Result};
use crate::splines::{SmoothFit, SplineBasisSpec};

pub use fit::{fit_gamlss, fit_gamlss_xy};
pub use formula::{Convergence, GamlssSpec, Link, ParamFormula, SmoothTerm, Term};

/// Which distribution parameter a predictor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Mu,
    Sigma,
    Nu,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::Mu, Param::Sigma, Param::Nu];

    pub fn index(&self) -> usize {
        match self {
            Param::Mu => 0,
            Param::Sigma => 1,
            Param::Nu => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSmooth {
    pub basis: SplineBasisSpec,
    pub fit: SmoothFit,
}

impl FittedSmooth {
    /// Smooth value at `x`, continued linearly at the boundary slope
    /// outside the basis domain. The flag reports extrapolation.
    pub fn eval(&self, x: f64) -> Result<(f64, bool)> {
        let a = &self.fit.coefficients;
        let dot = |row: Vec<f64>| row.iter().zip(a).map(|(b, c)| b * c).sum::<f64>();
        let (lo, hi) = (self.basis.x_min, self.basis.x_max);
        if !x.is_finite() {
            return Err(Error::Domain(format!("covariate {x} is not finite")));
        }
        if x < lo || x > hi {
            let edge = if x < lo { lo } else { hi };
            let value = dot(self.basis.row(edge)?);
            let slope = dot(self.basis.derivative_row(edge)?);
            Ok((value + slope * (x - edge), true))
        } else {
            Ok((dot(self.basis.row(x)?), false))
        }
    }
}

/// Predictor of one distribution parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedParameter {
    pub link: Link,
    pub terms: Vec<Term>,
    /// One coefficient per linear term; the intercept is the coefficient
    /// of the term `1`.
    pub coefficients: Vec<f64>,
    pub smooth: Option<FittedSmooth>,
    /// Trace of the parameter's hat matrix (linear terms plus smooth).
    pub edf: f64,
}

impl FittedParameter {
    pub(crate) fn constant(link: Link, value: f64) -> Self {
        FittedParameter {
            link,
            terms: vec![Term::intercept()],
            coefficients: vec![link.apply(value)],
            smooth: None,
            edf: 0.0,
        }
    }

    pub fn intercept(&self) -> Option<f64> {
        self.terms
            .iter()
            .position(Term::is_intercept)
            .map(|i| self.coefficients[i])
    }

    /// Linear predictor and extrapolation flag.
    pub fn eta(&self, c: &Covariates) -> Result<(f64, bool)> {
        let mut eta = 0.0;
        for (t, b) in self.terms.iter().zip(&self.coefficients) {
            eta += b * t.eval(c)?;
        }
        let mut extrapolated = false;
        if let Some(s) = &self.smooth {
            let (v, e) = s.eval(c.age)?;
            eta += v;
            extrapolated = e;
        }
        Ok((eta, extrapolated))
    }

    pub fn value(&self, c: &Covariates) -> Result<(f64, bool)> {
        let (eta, e) = self.eta(c)?;
        Ok((self.link.inverse(eta), e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGamlssModel {
    pub mu: FittedParameter,
    pub sigma: FittedParameter,
    pub nu: FittedParameter,
    pub global_deviance: f64,
    pub total_edf: f64,
    pub n: usize,
    pub converged: bool,
    /// Global deviance after each outer iteration.
    pub trace: Vec<f64>,
    pub nu_fixed: Option<f64>,
    /// Observed age range of the training data.
    pub age_range: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub global_deviance: f64,
    pub edf: f64,
    pub n: usize,
    pub aic: f64,
    pub bic: f64,
}

impl InformationCriteria {
    pub fn new(global_deviance: f64, edf: f64, n: usize) -> Self {
        InformationCriteria {
            global_deviance,
            edf,
            n,
            aic: global_deviance + 2.0 * edf,
            bic: global_deviance + (n as f64).ln() * edf,
        }
    }
}

impl FittedGamlssModel {
    pub fn parameter(&self, p: Param) -> &FittedParameter {
        match p {
            Param::Mu => &self.mu,
            Param::Sigma => &self.sigma,
            Param::Nu => &self.nu,
        }
    }

    /// Distribution parameters at `c`, with an extrapolation flag.
    pub fn predict_checked(&self, c: &Covariates) -> Result<(BccgParams, bool)> {
        let (mu, e1) = self.mu.value(c)?;
        let (sigma, e2) = self.sigma.value(c)?;
        let (nu, e3) = self.nu.value(c)?;
        Ok((BccgParams::new(mu, sigma, nu)?, e1 || e2 || e3))
    }
}

/// Distribution parameters at `c`. Ages outside the spline domain are
/// handled by linear continuation and logged as a warning.
pub fn predict_params(model: &FittedGamlssModel, c: &Covariates) -> Result<BccgParams> {
    let (p, extrapolated) = model.predict_checked(c)?;
    if extrapolated {
        log::warn!(
            "age {} outside training range [{}, {}]; smooth terms extrapolated linearly",
            c.age,
            model.age_range[0],
            model.age_range[1]
        );
    }
    Ok(p)
}

/// z-score of each observation's response, in input order.
pub fn zscores(model: &FittedGamlssModel, data: &[Observation], response: Response) -> Result<Vec<f64>> {
    data.iter()
        .map(|o| predict_params(model, &o.covariates)?.zscore(o.response(response)))
        .collect()
}

/// z-scores for raw covariate/response pairs.
pub fn zscores_xy(model: &FittedGamlssModel, covariates: &[Covariates], y: &[f64]) -> Result<Vec<f64>> {
    if covariates.len() != y.len() {
        return Err(Error::Dimension("covariates and responses differ in length".into()));
    }
    covariates
        .iter()
        .zip(y)
        .map(|(c, &yi)| predict_params(model, c)?.zscore(yi))
        .collect()
}

/// Centile at `level` (the lower limit of normal for 0.05 or 0.025) along
/// a covariate grid.
pub fn lln_curve(model: &FittedGamlssModel, grid: &[Covariates], level: f64) -> Result<Vec<f64>> {
    grid.iter()
        .map(|c| predict_params(model, c)?.quantile(level))
        .collect()
}

pub fn information_criteria(model: &FittedGamlssModel) -> InformationCriteria {
    InformationCriteria::new(model.global_deviance, model.total_edf, model.n)
}

/// Sum of log densities of `y` under the model.
pub fn log_likelihood(model: &FittedGamlssModel, covariates: &[Covariates], y: &[f64]) -> Result<f64> {
    let mut ll = 0.0;
    for (c, &yi) in covariates.iter().zip(y) {
        ll += model.predict_checked(c)?.0.logpdf(yi)?;
    }
    Ok(ll)
}
