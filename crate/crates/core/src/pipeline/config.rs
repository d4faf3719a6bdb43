//! Run configuration: a single JSON document with every default embedded.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::Response;
use crate::diagnostics::StatusTaxonomy;
use crate::error::{Error, Result};
use crate::gamlss::GamlssSpec;
use crate::slr::SlrSettings;

pub const DEFAULT_SEED: u64 = 20_250_101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllSettings {
    pub coverage: f64,
    pub mc_reps: usize,
}

impl Default for EllSettings {
    fn default() -> Self {
        EllSettings {
            coverage: 0.95,
            mc_reps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSettings {
    pub scenario: String,
    pub n: usize,
    /// Overrides the scenario's own seed.
    pub seed: Option<u64>,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            scenario: "skew-lung".into(),
            n: 10_000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default = "RunConfig::unfilled")]
pub struct RunConfig {
    /// Data CSV; paths are run-specific and kept out of the report.
    #[serde(skip_serializing)]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub responses: Vec<Response>,
    pub stratify_by_sex: bool,
    pub gamlss: BTreeMap<Response, GamlssSpec>,
    pub slr: BTreeMap<Response, SlrSettings>,
    pub lln_levels: Vec<f64>,
    pub bin_width: f64,
    pub ell: EllSettings,
    /// Seeds the Monte Carlo calibration of QQ bands.
    pub seed: u64,
    pub status_taxonomy: StatusTaxonomy,
    pub simulate: SimulateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut c = RunConfig::unfilled();
        c.fill_defaults();
        c
    }
}

impl RunConfig {
    /// Defaults without per-response model settings, so a parsed config
    /// only gains settings for the responses it names.
    fn unfilled() -> Self {
        RunConfig {
            input: None,
            out_dir: PathBuf::from("out"),
            responses: Response::ALL.to_vec(),
            stratify_by_sex: true,
            gamlss: BTreeMap::new(),
            slr: BTreeMap::new(),
            lln_levels: vec![0.05, 0.025],
            bin_width: 7.5,
            ell: EllSettings::default(),
            seed: DEFAULT_SEED,
            status_taxonomy: StatusTaxonomy::default(),
            simulate: SimulateSettings::default(),
        }
    }
}

/// SLR default per response: the ratio is modelled without a breakpoint.
pub fn default_slr(r: Response) -> SlrSettings {
    match r {
        Response::Ratio => SlrSettings::simple(),
        _ => SlrSettings::default(),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut c: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        c.fill_defaults();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Adds default model settings for configured responses that lack them.
    pub fn fill_defaults(&mut self) {
        for &r in &self.responses {
            self.gamlss.entry(r).or_default();
            self.slr.entry(r).or_insert_with(|| default_slr(r));
        }
    }

    pub fn gamlss_spec(&self, r: Response) -> GamlssSpec {
        self.gamlss.get(&r).cloned().unwrap_or_default()
    }

    pub fn slr_settings(&self, r: Response) -> SlrSettings {
        self.slr.get(&r).cloned().unwrap_or_else(|| default_slr(r))
    }

    pub fn validate(&self) -> Result<()> {
        if self.responses.is_empty() {
            return Err(Error::Input("config: at least one response is required".into()));
        }
        let mut seen = self.responses.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.responses.len() {
            return Err(Error::Input("config: responses repeated".into()));
        }
        if self.lln_levels.is_empty() {
            return Err(Error::Input("config: lln_levels is empty".into()));
        }
        for &l in &self.lln_levels {
            if !(l > 0.0 && l < 0.5) {
                return Err(Error::Input(format!("config: LLN level {l} not in (0, 0.5)")));
            }
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Input("config: bin_width must be positive".into()));
        }
        if !(self.ell.coverage > 0.0 && self.ell.coverage < 1.0) || self.ell.mc_reps == 0 {
            return Err(Error::Input("config: ell needs coverage in (0, 1) and mc_reps > 0".into()));
        }
        if self.simulate.n == 0 {
            return Err(Error::Input("config: simulate.n must be positive".into()));
        }
        for (r, spec) in &self.gamlss {
            spec.validate()
                .map_err(|e| Error::Input(format!("config: gamlss.{r}: {e}")))?;
        }
        self.status_taxonomy.validate()?;
        Ok(())
    }
}
