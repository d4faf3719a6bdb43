//! End-to-end workflow behind the command-line tool: simulate a dataset,
//! fit both model families per response and stratum, run the diagnostics
//! and write reports and figure files.

pub mod config;
pub mod io;
pub mod report;
pub mod svg;

use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::Observation;
use crate::distributions::normal_quantile;
use crate::error::{Error, Result};
use crate::gamlss;
use crate::slr::slr_zscores;
use crate::synthetic::{generate, scenario_by_name};

pub use config::RunConfig;
pub use report::{compare_reports, diagnose, fit_all, Comparison, Diagnosis, FittedPair, ModelKey, Report};

use io::{gamlss_path, read_json, slr_path, stratum_name, write_json, GamlssModelFile, SlrModelFile};

pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const MODELS_DIR: &str = "models";
pub const FIT_SUMMARY_FILE: &str = "fit_summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_INFO_FILE: &str = "run_info.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// Generates the configured scenario into `out/data.csv` with the truth
/// sidecar `out/truth.csv`. Returns the data path.
pub fn cmd_simulate(config: &RunConfig) -> Result<PathBuf> {
    let sim = &config.simulate;
    let mut scenario = scenario_by_name(&sim.scenario)?;
    if let Some(seed) = sim.seed {
        scenario = scenario.with_seed(seed);
    }
    let ds = generate(&scenario, sim.n)?;
    create_dir(&config.out_dir)?;
    let data_path = config.out_dir.join(DATA_FILE);
    io::write_observations(fs::File::create(&data_path)?, &ds.observations)?;
    io::write_truth(
        fs::File::create(config.out_dir.join(TRUTH_FILE))?,
        &ds.truth,
        &config.lln_levels,
    )?;
    log::info!(
        "simulated {} subjects of scenario {} (seed {}) into {}",
        sim.n,
        scenario.name,
        scenario.seed,
        data_path.display()
    );
    Ok(data_path)
}

fn input_path(config: &RunConfig) -> Result<PathBuf> {
    config
        .input
        .clone()
        .ok_or_else(|| Error::Input("no input data: pass --data or set \"input\" in the config".into()))
}

/// Fits every model and writes one file per family × response × stratum
/// plus a fit summary.
pub fn cmd_fit(config: &RunConfig) -> Result<BTreeMap<ModelKey, FittedPair>> {
    let data = io::load_observations(&input_path(config)?)?;
    let fitted = fit_all(config, &data)?;
    let dir = config.out_dir.join(MODELS_DIR);
    create_dir(&dir)?;
    let mut summary = Vec::new();
    for ((r, stratum), pair) in &fitted {
        write_json(&gamlss_path(&dir, *r, stratum), &pair.gamlss)?;
        write_json(&slr_path(&dir, *r, stratum), &pair.slr)?;
        summary.extend(pair.summaries());
    }
    write_json(&config.out_dir.join(FIT_SUMMARY_FILE), &summary)?;
    Ok(fitted)
}

/// Loads model files for every configured response and stratum present
/// in `data`.
pub fn load_models(config: &RunConfig, data: &[Observation], dir: &Path) -> Result<BTreeMap<ModelKey, FittedPair>> {
    let mut out = BTreeMap::new();
    for (sex, _) in report::strata(config, data) {
        let name = stratum_name(sex);
        for &r in &config.responses {
            let gamlss: GamlssModelFile = read_json(&gamlss_path(dir, r, &name))?;
            let slr: SlrModelFile = read_json(&slr_path(dir, r, &name))?;
            if gamlss.response != r || slr.response != r || gamlss.stratum != name || slr.stratum != name {
                return Err(Error::Input(format!("model files for {r}/{name} are mislabelled")));
            }
            out.insert((r, name.clone()), FittedPair { gamlss, slr });
        }
    }
    Ok(out)
}

fn fmt_bool(b: bool) -> String {
    b.to_string()
}

fn write_exceedance_csv(path: &Path, m: &report::ModelDiagnostics) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["age_lo".to_string(), "age_hi".into(), "n".into(), "low_count".into()];
    for l in &m.exceedance {
        let lv = l.level;
        for c in ["band_lo", "band_hi", "gamlss_k", "gamlss_percent", "gamlss_inside", "slr_k", "slr_percent", "slr_inside"] {
            header.push(format!("{c}_{lv}"));
        }
    }
    w.write_record(&header)?;
    let n_rows = m.exceedance.first().map_or(0, |l| l.gamlss.rows.len());
    for i in 0..n_rows {
        let first = &m.exceedance[0].gamlss.rows[i];
        let mut row = vec![
            first.age_lo.to_string(),
            first.age_hi.to_string(),
            first.n.to_string(),
            fmt_bool(first.low_count),
        ];
        for l in &m.exceedance {
            let (g, s) = (&l.gamlss.rows[i], &l.slr.rows[i]);
            row.extend([
                (100.0 * g.band_lo).to_string(),
                (100.0 * g.band_hi).to_string(),
                g.k.to_string(),
                (100.0 * g.proportion).to_string(),
                fmt_bool(g.inside_band),
                s.k.to_string(),
                (100.0 * s.proportion).to_string(),
                fmt_bool(s.inside_band),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_qq_csv(path: &Path, fig: &report::Figure) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["age_lo", "age_hi", "rank", "theoretical", "ell_lo", "ell_hi", "gamlss_z", "slr_z"])?;
    for g in &fig.qq {
        for i in 0..g.theoretical.len() {
            w.write_record([
                g.age_lo.to_string(),
                g.age_hi.to_string(),
                (i + 1).to_string(),
                g.theoretical[i].to_string(),
                g.ell_lo[i].to_string(),
                g.ell_hi[i].to_string(),
                g.gamlss_z[i].to_string(),
                g.slr_z[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, m: &report::ModelDiagnostics) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["model", "age_lo", "age_hi", "n", "mean", "sd", "skewness", "low_count", "degenerate"])?;
    for (model, rows) in [("gamlss", &m.group_summaries.gamlss), ("slr", &m.group_summaries.slr)] {
        for g in rows {
            w.write_record([
                model.to_string(),
                g.age_lo.to_string(),
                g.age_hi.to_string(),
                g.n.to_string(),
                g.mean.to_string(),
                g.sd.to_string(),
                g.skewness.to_string(),
                fmt_bool(g.low_count),
                fmt_bool(g.degenerate),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_status_csv(path: &Path, t: &crate::diagnostics::StatusTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["gamlss \\ slr".to_string()];
    header.extend(t.labels.iter().cloned());
    header.push("total".into());
    w.write_record(&header)?;
    for (i, label) in t.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(t.counts[i].iter().map(u64::to_string));
        row.push(t.row_counts[i].to_string());
        w.write_record(&row)?;
    }
    let mut total = vec!["total".to_string()];
    total.extend(t.col_counts.iter().map(u64::to_string));
    total.push(t.n.to_string());
    w.write_record(&total)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    input: Option<&'a Path>,
    out_dir: &'a Path,
    started_unix_seconds: u64,
    elapsed_seconds: f64,
}

/// Writes a run sidecar with the timing details kept out of the report.
pub fn write_run_info(config: &RunConfig, command: &str, started: std::time::SystemTime) -> Result<()> {
    let info = RunInfo {
        command,
        input: config.input.as_deref(),
        out_dir: &config.out_dir,
        started_unix_seconds: started
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        elapsed_seconds: started.elapsed().map(|d| d.as_secs_f64()).unwrap_or(0.0),
    };
    write_json(&config.out_dir.join(RUN_INFO_FILE), &info)
}

/// Runs the diagnostics against models in `models_dir` and writes
/// `report.json` and the figure CSVs (and SVGs when `svg` is set).
pub fn cmd_diagnose(config: &RunConfig, models_dir: &Path, svg: bool) -> Result<Diagnosis> {
    let data = io::load_observations(&input_path(config)?)?;
    let models = load_models(config, &data, models_dir)?;
    let diag = diagnose(config, &data, &models)?;
    write_diagnosis(&config.out_dir, &diag, svg)?;
    Ok(diag)
}

pub fn write_diagnosis(out: &Path, diag: &Diagnosis, svg: bool) -> Result<()> {
    create_dir(out)?;
    write_json(&out.join(REPORT_FILE), &diag.report)?;
    for (m, fig) in diag.report.models.iter().zip(&diag.figures) {
        let tag = format!("{}_{}", m.response, m.stratum);
        write_exceedance_csv(&out.join(format!("exceedance_{tag}.csv")), m)?;
        write_qq_csv(&out.join(format!("qq_{tag}.csv")), fig)?;
        write_summary_csv(&out.join(format!("summary_{tag}.csv")), m)?;
        if svg {
            for l in &m.exceedance {
                let title = format!("{} ({}): % below LLN at {}", m.response, m.stratum, l.level);
                fs::write(
                    out.join(format!("exceedance_{tag}_{}.svg", l.level)),
                    svg::exceedance_svg(&title, &l.gamlss, &l.slr),
                )?;
            }
            if let Some(g) = fig.qq.get(fig.focus_group) {
                let title = format!("{} ({}): ages {}-{}", m.response, m.stratum, g.age_lo, g.age_hi);
                fs::write(out.join(format!("qq_{tag}.svg")), svg::qq_svg(&title, g, m.qq.lln_marker))?;
            }
        }
    }
    for s in &diag.report.status {
        for l in &s.levels {
            write_status_csv(&out.join(format!("status_{}_{}.csv", s.stratum, l.level)), &l.table)?;
        }
    }
    Ok(())
}

/// Writes z-scores and below-LLN flags for every subject, response and
/// model family as CSV.
pub fn cmd_zscore<W: Write>(config: &RunConfig, models_dir: &Path, out: W) -> Result<()> {
    let data = io::load_observations(&input_path(config)?)?;
    let models = load_models(config, &data, models_dir)?;
    let cuts = config
        .lln_levels
        .iter()
        .map(|&l| normal_quantile(l))
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["id", "sex", "response", "model", "z"].iter().map(|s| s.to_string()).collect();
    header.extend(config.lln_levels.iter().map(|l| format!("below_lln_{l}")));
    w.write_record(&header)?;
    for (sex, d) in report::strata(config, &data) {
        let name = stratum_name(sex);
        for &r in &config.responses {
            let pair = &models[&(r, name.clone())];
            let gz = gamlss::zscores(&pair.gamlss.model, &d, r)?;
            let sz = slr_zscores(&pair.slr.model, &d, r)?;
            for (model, z) in [("gamlss", &gz), ("slr", &sz)] {
                for (o, &zi) in d.iter().zip(z.iter()) {
                    let mut row = vec![o.id.clone(), o.sex.to_string(), r.to_string(), model.into(), zi.to_string()];
                    row.extend(cuts.iter().map(|&c| fmt_bool(zi < c)));
                    w.write_record(&row)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Compares two report files; deltas are `b - a`.
pub fn cmd_compare(a: &Path, b: &Path) -> Result<Comparison> {
    let ra: Report = read_json(a)?;
    let rb: Report = read_json(b)?;
    Ok(compare_reports(&ra, &rb))
}
