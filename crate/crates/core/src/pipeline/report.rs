//! Fitting per response and stratum, the diagnostic battery, and the
//! report document.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::config::RunConfig;
use super::io::{stratum_name, GamlssModelFile, SlrModelFile};
use crate::data::{columns, Observation, Response, Sex};
use crate::diagnostics::{
    classify_status, cross_tab_and_kappa, ell_qq_band, exceedance_table, exits_near_marker, qq_points,
    zscore_group_summary, AgeBins, EllBand, ExceedanceTable, GroupSummary, StatusTable,
};
use crate::distributions::normal_quantile;
use crate::error::{Error, Result};
use crate::gamlss::{self, fit_gamlss, information_criteria, InformationCriteria};
use crate::slr::{fit_slr, slr_information_criteria, slr_zscores};

pub const SCHEMA_VERSION: u32 = 1;

/// Exits of the SLR/GAMLSS QQ points within this distance (in theoretical
/// z) of the LLN marker count as exits near the LLN.
pub const NEAR_LLN_WINDOW: f64 = 0.5;

/// Observations of one stratum (`None` = both sexes pooled).
pub fn strata(config: &RunConfig, data: &[Observation]) -> Vec<(Option<Sex>, Vec<Observation>)> {
    if config.stratify_by_sex {
        [Sex::F, Sex::M]
            .into_iter()
            .map(|s| (Some(s), data.iter().filter(|o| o.sex == s).cloned().collect::<Vec<_>>()))
            .filter(|(_, d)| !d.is_empty())
            .collect()
    } else {
        vec![(None, data.to_vec())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub response: Response,
    pub stratum: String,
    pub family: String,
    pub n: usize,
    pub global_deviance: f64,
    pub edf: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPair {
    pub gamlss: GamlssModelFile,
    pub slr: SlrModelFile,
}

impl FittedPair {
    pub fn summaries(&self) -> [FitSummary; 2] {
        let g = &self.gamlss;
        let s = &self.slr;
        let row = |family: &str, ic: &InformationCriteria, converged, iterations| FitSummary {
            response: g.response,
            stratum: g.stratum.clone(),
            family: family.into(),
            n: ic.n,
            global_deviance: ic.global_deviance,
            edf: ic.edf,
            aic: ic.aic,
            bic: ic.bic,
            converged,
            iterations,
        };
        [
            row("gamlss", &g.information_criteria, g.model.converged, g.model.trace.len()),
            row("slr", &s.information_criteria, true, 1),
        ]
    }
}

/// Key of a fitted pair: response and stratum name.
pub type ModelKey = (Response, String);

/// Fits GAMLSS and SLR for every configured response and stratum.
/// Fits run in parallel; the result is ordered by key.
pub fn fit_all(config: &RunConfig, data: &[Observation]) -> Result<BTreeMap<ModelKey, FittedPair>> {
    let strata = strata(config, data);
    let jobs: Vec<(Response, &Option<Sex>, &Vec<Observation>)> = config
        .responses
        .iter()
        .flat_map(|&r| strata.iter().map(move |(s, d)| (r, s, d)))
        .collect();
    let fitted: Vec<(ModelKey, FittedPair)> = jobs
        .into_par_iter()
        .map(|(r, sex, d)| {
            let name = stratum_name(*sex);
            let context = |e: Error| match e {
                Error::Input(m) => Error::Input(format!("{r}/{name}: {m}")),
                other => other,
            };
            let g = fit_gamlss(d, r, &config.gamlss_spec(r)).map_err(context)?;
            if !g.converged {
                log::warn!("{r}/{name}: GAMLSS did not converge in {} iterations", g.trace.len());
            }
            let s = fit_slr(d, r, &config.slr_settings(r)).map_err(context)?;
            let (cov, y) = columns(d, r);
            let pair = FittedPair {
                gamlss: GamlssModelFile {
                    response: r,
                    stratum: name.clone(),
                    information_criteria: information_criteria(&g),
                    model: g,
                },
                slr: SlrModelFile {
                    response: r,
                    stratum: name.clone(),
                    information_criteria: slr_information_criteria(&s, &cov, &y)?,
                    model: s,
                },
            };
            Ok(((r, name), pair))
        })
        .collect::<Result<_>>()?;
    Ok(fitted.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelExceedance {
    pub level: f64,
    pub evaluated_bins: usize,
    pub gamlss_passed: usize,
    pub slr_passed: usize,
    pub gamlss: ExceedanceTable,
    pub slr: ExceedanceTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqGroup {
    pub age_lo: f64,
    pub age_hi: f64,
    pub n: usize,
    pub alpha: f64,
    pub gamlss_exits: usize,
    pub slr_exits: usize,
    pub gamlss_exits_near_lln: usize,
    pub slr_exits_near_lln: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqSummary {
    pub coverage: f64,
    pub mc_reps: usize,
    pub seed: u64,
    pub lln_marker: f64,
    pub near_lln_window: f64,
    /// Index into `groups` of the group holding the median age.
    pub focus_group: usize,
    pub groups: Vec<QqGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamlssSummary {
    pub information_criteria: InformationCriteria,
    pub converged: bool,
    pub iterations: usize,
    pub mu_edf: f64,
    pub sigma_edf: f64,
    pub nu_edf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlrSummary {
    pub information_criteria: InformationCriteria,
    pub simple_linear: bool,
    pub psi: f64,
    pub sd_low: f64,
    pub sd_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummaries {
    pub gamlss: Vec<GroupSummary>,
    pub slr: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub response: Response,
    pub stratum: String,
    pub n: usize,
    pub gamlss: GamlssSummary,
    pub slr: SlrSummary,
    /// SLR BIC minus GAMLSS BIC.
    pub bic_difference: f64,
    pub exceedance: Vec<LevelExceedance>,
    pub qq: QqSummary,
    pub group_summaries: GroupSummaries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStatus {
    pub level: f64,
    /// Category index per subject, in `ids` order.
    pub gamlss_categories: Vec<usize>,
    pub slr_categories: Vec<usize>,
    /// Rows GAMLSS, columns SLR.
    pub table: StatusTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub stratum: String,
    pub ids: Vec<String>,
    pub levels: Vec<LevelStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCount {
    pub stratum: String,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: RunConfig,
    pub n: usize,
    pub strata: Vec<StratumCount>,
    pub models: Vec<ModelDiagnostics>,
    /// Present when ratio, FEV1 and FVC are all modelled.
    pub status: Vec<StatusReport>,
}

/// Per-rank QQ rows of one age group.
#[derive(Debug, Clone, PartialEq)]
pub struct QqFigureGroup {
    pub age_lo: f64,
    pub age_hi: f64,
    pub theoretical: Vec<f64>,
    pub ell_lo: Vec<f64>,
    pub ell_hi: Vec<f64>,
    pub gamlss_z: Vec<f64>,
    pub slr_z: Vec<f64>,
}

/// Everything needed to write one response × stratum's figure files.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub response: Response,
    pub stratum: String,
    pub qq: Vec<QqFigureGroup>,
    pub focus_group: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    pub report: Report,
    pub figures: Vec<Figure>,
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn median(v: &[f64]) -> f64 {
    let s = sorted(v.to_vec());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Scored {
    gamlss_z: Vec<f64>,
    slr_z: Vec<f64>,
}

/// Runs the diagnostic battery on `data` with already fitted models.
pub fn diagnose(config: &RunConfig, data: &[Observation], models: &BTreeMap<ModelKey, FittedPair>) -> Result<Diagnosis> {
    let strata = strata(config, data);
    let mut scored: BTreeMap<ModelKey, Scored> = BTreeMap::new();
    let mut bins_by_stratum: BTreeMap<String, (AgeBins, Vec<Vec<usize>>)> = BTreeMap::new();
    for (sex, d) in &strata {
        let name = stratum_name(*sex);
        let ages: Vec<f64> = d.iter().map(|o| o.covariates.age).collect();
        let bins = AgeBins::anchored(&ages, config.bin_width)?;
        let groups = bins.assign(&ages);
        bins_by_stratum.insert(name.clone(), (bins, groups));
        for &r in &config.responses {
            let key = (r, name.clone());
            let pair = models
                .get(&key)
                .ok_or_else(|| Error::Input(format!("no fitted models for {r}/{name}")))?;
            scored.insert(
                key,
                Scored {
                    gamlss_z: gamlss::zscores(&pair.gamlss.model, d, r)?,
                    slr_z: slr_zscores(&pair.slr.model, d, r)?,
                },
            );
        }
    }

    // one band per distinct group size
    let mut sizes: Vec<usize> = bins_by_stratum
        .values()
        .flat_map(|(_, g)| g.iter().map(Vec::len).filter(|&n| n > 0))
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    let bands: BTreeMap<usize, EllBand> = sizes
        .par_iter()
        .map(|&n| Ok((n, ell_qq_band(n, config.ell.coverage, config.ell.mc_reps, config.seed)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let mut model_reports = Vec::new();
    let mut figures = Vec::new();
    for (sex, d) in &strata {
        let name = stratum_name(*sex);
        let ages: Vec<f64> = d.iter().map(|o| o.covariates.age).collect();
        let (bins, groups) = &bins_by_stratum[&name];
        let focus_index = bins.index(median(&ages)).unwrap_or(0);
        for &r in &config.responses {
            let key = (r, name.clone());
            let pair = &models[&key];
            let sc = &scored[&key];
            let mut exceedance = Vec::new();
            for &level in &config.lln_levels {
                let cut = normal_quantile(level)?;
                let table = |z: &[f64]| {
                    let flags: Vec<bool> = z.iter().map(|&v| v < cut).collect();
                    exceedance_table(&ages, &flags, level, config.bin_width, Some(bins.start))
                };
                let g = table(&sc.gamlss_z)?;
                let s = table(&sc.slr_z)?;
                exceedance.push(LevelExceedance {
                    level,
                    evaluated_bins: g.evaluated(),
                    gamlss_passed: g.passed(),
                    slr_passed: s.passed(),
                    gamlss: g,
                    slr: s,
                });
            }

            let mut qq_groups = Vec::new();
            let mut fig_groups = Vec::new();
            let mut focus_group = 0;
            for (k, members) in groups.iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                if k == focus_index {
                    focus_group = qq_groups.len();
                }
                let band = &bands[&members.len()];
                let gz = sorted(members.iter().map(|&i| sc.gamlss_z[i]).collect());
                let sz = sorted(members.iter().map(|&i| sc.slr_z[i]).collect());
                let gq = qq_points(&gz)?;
                let sq = qq_points(&sz)?;
                let g_exits = band.exits(&gz)?;
                let s_exits = band.exits(&sz)?;
                let (age_lo, age_hi) = bins.bounds(k);
                qq_groups.push(QqGroup {
                    age_lo,
                    age_hi,
                    n: members.len(),
                    alpha: band.alpha,
                    gamlss_exits: g_exits.len(),
                    slr_exits: s_exits.len(),
                    gamlss_exits_near_lln: exits_near_marker(&gq, &g_exits, NEAR_LLN_WINDOW),
                    slr_exits_near_lln: exits_near_marker(&sq, &s_exits, NEAR_LLN_WINDOW),
                });
                fig_groups.push(QqFigureGroup {
                    age_lo,
                    age_hi,
                    theoretical: gq.points.iter().map(|p| p.theoretical).collect(),
                    ell_lo: band.bands.iter().map(|b| b.lo_z).collect(),
                    ell_hi: band.bands.iter().map(|b| b.hi_z).collect(),
                    gamlss_z: gz,
                    slr_z: sz,
                });
            }

            let gm = &pair.gamlss.model;
            let sm = &pair.slr.model;
            let gic = pair.gamlss.information_criteria;
            let sic = pair.slr.information_criteria;
            model_reports.push(ModelDiagnostics {
                response: r,
                stratum: name.clone(),
                n: d.len(),
                gamlss: GamlssSummary {
                    information_criteria: gic,
                    converged: gm.converged,
                    iterations: gm.trace.len(),
                    mu_edf: gm.mu.edf,
                    sigma_edf: gm.sigma.edf,
                    nu_edf: gm.nu.edf,
                },
                slr: SlrSummary {
                    information_criteria: sic,
                    simple_linear: sm.simple_linear,
                    psi: sm.psi,
                    sd_low: sm.sd_low,
                    sd_high: sm.sd_high,
                },
                bic_difference: sic.bic - gic.bic,
                exceedance,
                qq: QqSummary {
                    coverage: config.ell.coverage,
                    mc_reps: config.ell.mc_reps,
                    seed: config.seed,
                    lln_marker: normal_quantile(0.05)?,
                    near_lln_window: NEAR_LLN_WINDOW,
                    focus_group,
                    groups: qq_groups,
                },
                group_summaries: GroupSummaries {
                    gamlss: zscore_group_summary(&sc.gamlss_z, &ages, config.bin_width, Some(bins.start))?,
                    slr: zscore_group_summary(&sc.slr_z, &ages, config.bin_width, Some(bins.start))?,
                },
            });
            figures.push(Figure {
                response: r,
                stratum: name.clone(),
                qq: fig_groups,
                focus_group,
            });
        }
    }

    let mut status = Vec::new();
    let all_three = Response::ALL.iter().all(|r| config.responses.contains(r));
    if all_three {
        let tax = &config.status_taxonomy;
        let labels = tax.categories();
        for (sex, d) in &strata {
            let name = stratum_name(*sex);
            let z = |r: Response| &scored[&(r, name.clone())];
            let mut levels = Vec::new();
            for &level in &config.lln_levels {
                let cut = normal_quantile(level)?;
                let categorise = |pick: fn(&Scored) -> &Vec<f64>| -> Result<Vec<usize>> {
                    let (ratio, fev1, fvc) = (pick(z(Response::Ratio)), pick(z(Response::Fev1)), pick(z(Response::Fvc)));
                    (0..d.len())
                        .map(|i| tax.category(classify_status(ratio[i] < cut, fev1[i] < cut, fvc[i] < cut)))
                        .collect()
                };
                let g = categorise(|s| &s.gamlss_z)?;
                let s = categorise(|s| &s.slr_z)?;
                let table = cross_tab_and_kappa(&g, &s, &labels)?;
                levels.push(LevelStatus {
                    level,
                    gamlss_categories: g,
                    slr_categories: s,
                    table,
                });
            }
            status.push(StatusReport {
                stratum: name,
                ids: d.iter().map(|o| o.id.clone()).collect(),
                levels,
            });
        }
    }

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: config.clone(),
        n: data.len(),
        strata: strata
            .iter()
            .map(|(s, d)| StratumCount {
                stratum: stratum_name(*s),
                n: d.len(),
            })
            .collect(),
        models: model_reports,
        status,
    };
    Ok(Diagnosis { report, figures })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRates {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: Option<f64>,
}

impl PassRates {
    fn new(a: Option<f64>, b: Option<f64>) -> Self {
        let delta = a.zip(b).map(|(a, b)| b - a);
        PassRates { a, b, delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceComparison {
    pub response: Response,
    pub stratum: String,
    pub level: f64,
    pub gamlss_pass_rate: PassRates,
    pub slr_pass_rate: PassRates,
    pub gamlss_bic_delta: f64,
    pub slr_bic_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDelta {
    pub label: String,
    pub percent_a: f64,
    pub percent_b: f64,
    pub percent_delta: f64,
    pub count_delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusComparison {
    pub stratum: String,
    pub level: f64,
    pub gamlss: Vec<CategoryDelta>,
    pub slr: Vec<CategoryDelta>,
    /// Agreement of report A's and report B's classifications of the same
    /// subjects; absent when the subjects differ or kappa is undefined.
    pub gamlss_kappa: Option<f64>,
    pub slr_kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub exceedance: Vec<ExceedanceComparison>,
    pub status: Vec<StatusComparison>,
    /// Entries present in only one report.
    pub unmatched: Vec<String>,
}

fn rate(passed: usize, evaluated: usize) -> Option<f64> {
    (evaluated > 0).then(|| passed as f64 / evaluated as f64)
}

fn category_deltas(labels: &[String], a: &StatusTable, b: &StatusTable, rows: bool) -> Vec<CategoryDelta> {
    let pick = |t: &StatusTable| if rows { (t.row_percent.clone(), t.row_counts.clone()) } else { (t.col_percent.clone(), t.col_counts.clone()) };
    let (pa, ca) = pick(a);
    let (pb, cb) = pick(b);
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| CategoryDelta {
            label: l.clone(),
            percent_a: pa[i],
            percent_b: pb[i],
            percent_delta: pb[i] - pa[i],
            count_delta: cb[i] as i64 - ca[i] as i64,
        })
        .collect()
}

/// Side-by-side summary of two reports; deltas are `b - a`.
pub fn compare_reports(a: &Report, b: &Report) -> Comparison {
    let mut exceedance = Vec::new();
    let mut unmatched = Vec::new();
    for ma in &a.models {
        let Some(mb) = b.models.iter().find(|m| m.response == ma.response && m.stratum == ma.stratum) else {
            unmatched.push(format!("{}/{} only in first report", ma.response, ma.stratum));
            continue;
        };
        for la in &ma.exceedance {
            let Some(lb) = mb.exceedance.iter().find(|l| l.level == la.level) else {
                unmatched.push(format!("{}/{} level {} only in first report", ma.response, ma.stratum, la.level));
                continue;
            };
            exceedance.push(ExceedanceComparison {
                response: ma.response,
                stratum: ma.stratum.clone(),
                level: la.level,
                gamlss_pass_rate: PassRates::new(rate(la.gamlss_passed, la.evaluated_bins), rate(lb.gamlss_passed, lb.evaluated_bins)),
                slr_pass_rate: PassRates::new(rate(la.slr_passed, la.evaluated_bins), rate(lb.slr_passed, lb.evaluated_bins)),
                gamlss_bic_delta: mb.gamlss.information_criteria.bic - ma.gamlss.information_criteria.bic,
                slr_bic_delta: mb.slr.information_criteria.bic - ma.slr.information_criteria.bic,
            });
        }
    }
    for mb in &b.models {
        if !a.models.iter().any(|m| m.response == mb.response && m.stratum == mb.stratum) {
            unmatched.push(format!("{}/{} only in second report", mb.response, mb.stratum));
        }
    }
    let mut status = Vec::new();
    for sa in &a.status {
        let Some(sb) = b.status.iter().find(|s| s.stratum == sa.stratum) else {
            unmatched.push(format!("status {} only in first report", sa.stratum));
            continue;
        };
        let same_subjects = sa.ids == sb.ids;
        for la in &sa.levels {
            let Some(lb) = sb.levels.iter().find(|l| l.level == la.level) else {
                continue;
            };
            if la.table.labels != lb.table.labels {
                unmatched.push(format!("status {} level {}: taxonomies differ", sa.stratum, la.level));
                continue;
            }
            let labels = &la.table.labels;
            let kappa = |x: &[usize], y: &[usize]| {
                if same_subjects {
                    cross_tab_and_kappa(x, y, labels).ok().and_then(|t| t.kappa)
                } else {
                    None
                }
            };
            status.push(StatusComparison {
                stratum: sa.stratum.clone(),
                level: la.level,
                gamlss: category_deltas(labels, &la.table, &lb.table, true),
                slr: category_deltas(labels, &la.table, &lb.table, false),
                gamlss_kappa: kappa(&la.gamlss_categories, &lb.gamlss_categories),
                slr_kappa: kappa(&la.slr_categories, &lb.slr_categories),
            });
        }
    }
    Comparison {
        exceedance,
        status,
        unmatched,
    }
}
