//! Dataset CSV, truth sidecar and model files.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::data::{Covariates, Observation, Response, Sex};
use crate::error::{Error, Result};
use crate::gamlss::{FittedGamlssModel, InformationCriteria};
use crate::slr::FittedSlrModel;
use crate::synthetic::TruthRecord;

pub const HEADER: [&str; 7] = ["id", "sex", "age_years", "height_cm", "weight_kg", "fev1_l", "fvc_l"];

/// At most this many offending rows are listed in a schema error.
const MAX_REPORTED_ROWS: usize = 20;

fn parse_positive(field: &str, name: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} {field:?} is not a number"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(v)
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<Observation, String> {
    if rec.len() != HEADER.len() {
        return Err(format!("expected {} fields, found {}", HEADER.len(), rec.len()));
    }
    let id = rec[0].trim().to_string();
    if id.is_empty() {
        return Err("id is empty".into());
    }
    let sex: Sex = rec[1].trim().parse().map_err(|e: Error| e.to_string())?;
    let age = parse_positive(&rec[2], "age_years")?;
    let height = parse_positive(&rec[3], "height_cm")?;
    let weight = if rec[4].trim().is_empty() {
        None
    } else {
        Some(parse_positive(&rec[4], "weight_kg")?)
    };
    let fev1 = parse_positive(&rec[5], "fev1_l")?;
    let fvc = parse_positive(&rec[6], "fvc_l")?;
    Ok(Observation {
        id,
        sex,
        covariates: Covariates { age, height, weight },
        fev1,
        fvc,
    })
}

/// Parses a dataset. Every invalid row is collected and reported with its
/// line number; any problem is an input error.
pub fn read_observations<R: Read>(reader: R) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(Error::Input(format!(
            "header must be exactly {:?}, found {:?}",
            HEADER.join(","),
            names.join(",")
        )));
    }
    let mut out = Vec::new();
    let mut problems = Vec::new();
    let mut ids = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        match rec.map_err(|e| e.to_string()).and_then(|r| parse_row(&r)) {
            Ok(o) => {
                if !ids.insert(o.id.clone()) {
                    problems.push(format!("line {line}: duplicate id {:?}", o.id));
                } else {
                    out.push(o);
                }
            }
            Err(msg) => problems.push(format!("line {line}: {msg}")),
        }
    }
    if !problems.is_empty() {
        let total = problems.len();
        problems.truncate(MAX_REPORTED_ROWS);
        let more = if total > MAX_REPORTED_ROWS {
            format!("\n... and {} more", total - MAX_REPORTED_ROWS)
        } else {
            String::new()
        };
        return Err(Error::Input(format!(
            "{total} invalid row(s):\n{}{more}",
            problems.join("\n")
        )));
    }
    if out.is_empty() {
        return Err(Error::Input("dataset has no rows".into()));
    }
    Ok(out)
}

pub fn load_observations(path: &Path) -> Result<Vec<Observation>> {
    let f = fs::File::open(path)
        .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
    read_observations(f)
}

pub fn write_observations<W: Write>(writer: W, data: &[Observation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for o in data {
        let c = &o.covariates;
        w.write_record([
            o.id.clone(),
            o.sex.to_string(),
            c.age.to_string(),
            c.height.to_string(),
            c.weight.map(|v| v.to_string()).unwrap_or_default(),
            o.fev1.to_string(),
            o.fvc.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Truth sidecar: true parameters, z-scores and LLN flags per subject.
pub fn write_truth<W: Write>(writer: W, truth: &[TruthRecord], levels: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["id", "fvc_mu", "fvc_sigma", "fvc_nu", "fvc_z", "ratio_mu", "ratio_sigma", "ratio_nu", "ratio_z"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for r in ["fvc", "ratio"] {
        for l in levels {
            header.push(format!("{r}_below_lln_{l}"));
        }
    }
    w.write_record(&header)?;
    for t in truth {
        let mut row = vec![
            t.id.clone(),
            t.fvc.mu.to_string(),
            t.fvc.sigma.to_string(),
            t.fvc.nu.to_string(),
            t.fvc_z.to_string(),
            t.ratio.mu.to_string(),
            t.ratio.sigma.to_string(),
            t.ratio.nu.to_string(),
            t.ratio_z.to_string(),
        ];
        for r in [Response::Fvc, Response::Ratio] {
            for &l in levels {
                let flag = t.below_lln(r, l).ok_or_else(|| Error::Domain(format!("bad level {l}")))?;
                row.push(flag.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Stratum label used in file names and reports: `F`, `M` or `all`.
pub fn stratum_name(sex: Option<Sex>) -> String {
    sex.map(|s| s.to_string()).unwrap_or_else(|| "all".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamlssModelFile {
    pub response: Response,
    pub stratum: String,
    pub information_criteria: InformationCriteria,
    pub model: FittedGamlssModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlrModelFile {
    pub response: Response,
    pub stratum: String,
    pub information_criteria: InformationCriteria,
    pub model: FittedSlrModel,
}

pub fn gamlss_path(dir: &Path, r: Response, stratum: &str) -> PathBuf {
    dir.join(format!("gamlss_{r}_{stratum}.json"))
}

pub fn slr_path(dir: &Path, r: Response, stratum: &str) -> PathBuf {
    dir.join(format!("slr_{r}_{stratum}.json"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}
