//! Predictor formulas for the three distribution parameters.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::Covariates;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Log,
    Identity,
}

impl Link {
    pub fn inverse(&self, eta: f64) -> f64 {
        match self {
            Link::Log => eta.exp(),
            Link::Identity => eta,
        }
    }

    pub fn apply(&self, theta: f64) -> f64 {
        match self {
            Link::Log => theta.ln(),
            Link::Identity => theta,
        }
    }

    /// d theta / d eta, expressed through theta.
    pub fn dtheta_deta(&self, theta: f64) -> f64 {
        match self {
            Link::Log => theta,
            Link::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Age,
    Height,
    Weight,
}

/// A covariate, optionally log-transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub variable: Variable,
    pub log: bool,
}

impl Factor {
    fn eval(&self, c: &Covariates) -> Result<f64> {
        let v = match self.variable {
            Variable::Age => c.age,
            Variable::Height => c.height,
            Variable::Weight => c
                .weight
                .ok_or_else(|| Error::Input("formula uses weight but it is missing".into()))?,
        };
        if self.log {
            if v <= 0.0 {
                return Err(Error::Domain(format!("log of non-positive covariate {v}")));
            }
            Ok(v.ln())
        } else {
            Ok(v)
        }
    }
}

/// Product of factors. The empty product is the intercept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Term {
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn intercept() -> Self {
        Term { factors: vec![] }
    }

    pub fn is_intercept(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn uses_weight(&self) -> bool {
        self.factors.iter().any(|f| f.variable == Variable::Weight)
    }

    pub fn eval(&self, c: &Covariates) -> Result<f64> {
        self.factors.iter().try_fold(1.0, |acc, f| Ok(acc * f.eval(c)?))
    }
}

impl FromStr for Term {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::intercept());
        }
        let factors = s
            .split(':')
            .map(|part| {
                let part = part.trim();
                let (name, log) = match part.strip_prefix("ln(").and_then(|r| r.strip_suffix(')')) {
                    Some(inner) => (inner.trim(), true),
                    None => (part, false),
                };
                let variable = match name {
                    "age" => Variable::Age,
                    "height" => Variable::Height,
                    "weight" => Variable::Weight,
                    _ => return Err(Error::Input(format!("unknown formula term {part:?}"))),
                };
                Ok(Factor { variable, log })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Term { factors })
    }
}

impl TryFrom<String> for Term {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|fa| {
                let name = match fa.variable {
                    Variable::Age => "age",
                    Variable::Height => "height",
                    Variable::Weight => "weight",
                };
                if fa.log {
                    format!("ln({name})")
                } else {
                    name.to_string()
                }
            })
            .collect();
        f.write_str(&parts.join(":"))
    }
}

/// Penalised spline in age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothTerm {
    /// Effective degrees of freedom of the smooth on its own (including
    /// its constant and linear null space).
    pub target_edf: f64,
    #[serde(default = "default_interior_knots")]
    pub n_interior_knots: usize,
}

fn default_interior_knots() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFormula {
    pub link: Link,
    pub linear_terms: Vec<Term>,
    #[serde(default)]
    pub smooth: Option<SmoothTerm>,
}

impl ParamFormula {
    pub fn intercept_only(link: Link) -> Self {
        ParamFormula {
            link,
            linear_terms: vec![Term::intercept()],
            smooth: None,
        }
    }

    pub fn with_smooth(mut self, target_edf: f64) -> Self {
        self.smooth = Some(SmoothTerm {
            target_edf,
            n_interior_knots: default_interior_knots(),
        });
        self
    }

    pub fn with_term(mut self, term: &str) -> Self {
        self.linear_terms.push(term.parse().expect("valid term"));
        self
    }

    pub fn uses_weight(&self) -> bool {
        self.linear_terms.iter().any(Term::uses_weight)
    }

    pub fn design_row(&self, c: &Covariates) -> Result<Vec<f64>> {
        self.linear_terms.iter().map(|t| t.eval(c)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub max_outer: usize,
    pub deviance_tol: f64,
    pub step_halvings_max: usize,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
}

fn default_max_inner() -> usize {
    10
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            max_outer: 50,
            deviance_tol: 1e-4,
            step_halvings_max: 10,
            max_inner: default_max_inner(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamlssSpec {
    pub mu: ParamFormula,
    pub sigma: ParamFormula,
    pub nu: ParamFormula,
    #[serde(default)]
    pub convergence: Convergence,
    /// Holds nu at this value instead of estimating it.
    #[serde(default)]
    pub nu_fixed: Option<f64>,
}

impl Default for GamlssSpec {
    /// log(mu) = b0 + b1 ln(height) + s(age), log(sigma) = c0 + s(age),
    /// nu constant.
    fn default() -> Self {
        GamlssSpec {
            mu: ParamFormula::intercept_only(Link::Log)
                .with_term("ln(height)")
                .with_smooth(16.0),
            sigma: ParamFormula::intercept_only(Link::Log).with_smooth(7.0),
            nu: ParamFormula::intercept_only(Link::Identity),
            convergence: Convergence::default(),
            nu_fixed: None,
        }
    }
}

impl GamlssSpec {
    /// Intercept-only mu, sigma and nu.
    pub fn constant() -> Self {
        GamlssSpec {
            mu: ParamFormula::intercept_only(Link::Log),
            sigma: ParamFormula::intercept_only(Link::Log),
            nu: ParamFormula::intercept_only(Link::Identity),
            convergence: Convergence::default(),
            nu_fixed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.link != Link::Log || self.sigma.link != Link::Log {
            return Err(Error::Input("mu and sigma require a log link".into()));
        }
        for (name, f) in [("mu", &self.mu), ("sigma", &self.sigma), ("nu", &self.nu)] {
            if f.linear_terms.is_empty() && f.smooth.is_none() {
                return Err(Error::Input(format!("{name} formula has no terms")));
            }
            if let Some(s) = &f.smooth {
                if !(s.target_edf > 2.0) || s.n_interior_knots < 2 {
                    return Err(Error::Input(format!(
                        "{name} smooth needs target_edf > 2 and at least 2 interior knots"
                    )));
                }
            }
        }
        let c = &self.convergence;
        if !(c.deviance_tol > 0.0) || c.max_outer == 0 || c.max_inner == 0 {
            return Err(Error::Input("convergence settings must be positive".into()));
        }
        if let Some(nu) = self.nu_fixed {
            if !nu.is_finite() {
                return Err(Error::Input("nu_fixed must be finite".into()));
            }
        }
        Ok(())
    }
}
