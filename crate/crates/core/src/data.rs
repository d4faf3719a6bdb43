//! Observations, covariates and response selection.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::F => "F",
            Sex::M => "M",
        })
    }
}

impl FromStr for Sex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Sex::F),
            "M" => Ok(Sex::M),
            other => Err(Error::Input(format!("sex must be F or M, got {other:?}"))),
        }
    }
}

/// Explanatory variables of one subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    /// Years.
    pub age: f64,
    /// Centimetres.
    pub height: f64,
    /// Kilograms; optional in the input schema.
    pub weight: Option<f64>,
}

impl Covariates {
    pub fn new(age: f64, height: f64) -> Self {
        Covariates {
            age,
            height,
            weight: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub sex: Sex,
    pub covariates: Covariates,
    /// Litres.
    pub fev1: f64,
    /// Litres.
    pub fvc: f64,
}

impl Observation {
    pub fn ratio(&self) -> f64 {
        self.fev1 / self.fvc
    }

    pub fn response(&self, r: Response) -> f64 {
        match r {
            Response::Ratio => self.ratio(),
            Response::Fev1 => self.fev1,
            Response::Fvc => self.fvc,
        }
    }
}

/// Modelled response variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Response {
    Ratio,
    Fev1,
    Fvc,
}

impl Response {
    pub const ALL: [Response; 3] = [Response::Ratio, Response::Fev1, Response::Fvc];

    pub fn name(&self) -> &'static str {
        match self {
            Response::Ratio => "ratio",
            Response::Fev1 => "fev1",
            Response::Fvc => "fvc",
        }
    }
}

impl fmt::Display for Response {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Response {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio" => Ok(Response::Ratio),
            "fev1" => Ok(Response::Fev1),
            "fvc" => Ok(Response::Fvc),
            other => Err(Error::Input(format!("unknown response {other:?}"))),
        }
    }
}

/// Splits observations into covariates and one response column.
pub fn columns(data: &[Observation], response: Response) -> (Vec<Covariates>, Vec<f64>) {
    data.iter()
        .map(|o| (o.covariates, o.response(response)))
        .unzip()
}
