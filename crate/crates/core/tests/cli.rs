//! End-to-end runs of the `lungref` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use lungref::data::Response;
use lungref::distributions::normal_quantile;
use lungref::gamlss::{self, information_criteria};
use lungref::pipeline::io::{load_observations, GamlssModelFile, SlrModelFile};
use lungref::pipeline::{Comparison, Report};
use lungref::slr::{slr_information_criteria, slr_zscores};
use serde_json::Value;

const N: usize = 3000;

fn lungref(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lungref")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = lungref(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// simulate, fit and diagnose into a fresh directory.
fn full_run(name: &str, seed: u64) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    let seed = seed.to_string();
    let n = N.to_string();
    ok(&["simulate", "--n", &n, "--seed", &seed, "--out", s(&dir)]);
    let data = dir.join("data.csv");
    ok(&["fit", "--data", s(&data), "--seed", &seed, "--out", s(&dir)]);
    ok(&["diagnose", "--data", s(&data), "--seed", &seed, "--svg", "--out", s(&dir)]);
    dir
}

fn run_a() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| full_run("cli_a", 11))
}

fn run_b() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| full_run("cli_b", 12))
}

fn report(dir: &Path) -> Report {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn compare(a: &Path, b: &Path) -> Comparison {
    serde_json::from_str(&ok(&["compare", s(&a.join("report.json")), s(&b.join("report.json"))])).unwrap()
}

#[test]
fn simulate_writes_the_requested_rows() {
    let dir = run_a();
    let data = fs::read_to_string(dir.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), N + 1);
    assert_eq!(data.lines().next().unwrap(), "id,sex,age_years,height_cm,weight_kg,fev1_l,fvc_l");
    assert_eq!(fs::read_to_string(dir.join("truth.csv")).unwrap().lines().count(), N + 1);
}

#[test]
fn refitting_reproduces_model_files() {
    let dir = run_a();
    let again = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli_refit");
    let _ = fs::remove_dir_all(&again);
    ok(&["fit", "--data", s(&dir.join("data.csv")), "--out", s(&again)]);
    let mut files = 0;
    for entry in fs::read_dir(dir.join("models")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(again.join("models").join(name)).unwrap());
        files += 1;
    }
    // three responses x two sexes x two families
    assert_eq!(files, 12);
}

#[test]
fn stored_information_criteria_are_recomputable() {
    let dir = run_a();
    let data = load_observations(&dir.join("data.csv")).unwrap();
    let rep = report(dir);
    for m in &rep.models {
        let sub: Vec<_> = data.iter().filter(|o| o.sex.to_string() == m.stratum).cloned().collect();
        let g: GamlssModelFile = serde_json::from_str(
            &fs::read_to_string(dir.join(format!("models/gamlss_{}_{}.json", m.response, m.stratum))).unwrap(),
        )
        .unwrap();
        let sl: SlrModelFile = serde_json::from_str(
            &fs::read_to_string(dir.join(format!("models/slr_{}_{}.json", m.response, m.stratum))).unwrap(),
        )
        .unwrap();
        let ic = information_criteria(&g.model);
        assert_eq!(ic, g.information_criteria);
        assert_eq!(ic, m.gamlss.information_criteria);
        let (cov, y) = lungref::data::columns(&sub, m.response);
        let sic = slr_information_criteria(&sl.model, &cov, &y).unwrap();
        assert!((sic.bic - sl.information_criteria.bic).abs() < 1e-9 * sic.bic.abs());
        assert!((m.bic_difference - (sic.bic - ic.bic)).abs() < 1e-6);
    }
}

#[test]
fn report_validates_against_the_schema() {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json")).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let instance: Value = serde_json::from_str(&fs::read_to_string(run_a().join("report.json")).unwrap()).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:#?}");
    let mut broken = instance.clone();
    broken["schema_version"] = Value::from("one");
    assert!(!validator.is_valid(&broken));
}

#[test]
fn figure_files_match_the_report() {
    let dir = run_a();
    let rep = report(dir);
    for m in &rep.models {
        let tag = format!("{}_{}", m.response, m.stratum);
        let csv = fs::read_to_string(dir.join(format!("exceedance_{tag}.csv"))).unwrap();
        for l in &m.exceedance {
            assert_eq!(csv.lines().count() - 1, l.gamlss.rows.len());
            assert_eq!(l.gamlss.rows.len(), l.slr.rows.len());
            assert!(dir.join(format!("exceedance_{tag}_{}.svg", l.level)).exists());
        }
        let summary = fs::read_to_string(dir.join(format!("summary_{tag}.csv"))).unwrap();
        assert!(summary.lines().count() > 1);
        assert!(dir.join(format!("qq_{tag}.svg")).exists());
    }
    assert!(dir.join("run_info.json").exists());
    assert!(dir.join("fit_summary.json").exists());
}

#[test]
fn zscore_command_matches_the_library() {
    let dir = run_a();
    let data_path = dir.join("data.csv");
    let out = ok(&["zscore", "--data", s(&data_path), "--models", s(&dir.join("models"))]);
    let data = load_observations(&data_path).unwrap();
    let mut rdr = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["id", "sex", "response", "model", "z", "below_lln_0.05", "below_lln_0.025"]);
    let mut rows: BTreeMap<(String, String, String), (f64, bool, bool)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let z: f64 = rec[4].parse().unwrap();
        let flag = |i: usize| rec[i].parse::<bool>().unwrap();
        rows.insert((rec[0].into(), rec[2].into(), rec[3].into()), (z, flag(5), flag(6)));
    }
    assert_eq!(rows.len(), data.len() * 3 * 2);
    let (q05, q025) = (normal_quantile(0.05).unwrap(), normal_quantile(0.025).unwrap());
    for (z, f05, f025) in rows.values() {
        assert_eq!(*f05, *z < q05);
        assert_eq!(*f025, *z < q025);
    }
    for stratum in ["F", "M"] {
        let sub: Vec<_> = data.iter().filter(|o| o.sex.to_string() == stratum).cloned().collect();
        for r in [Response::Fev1, Response::Fvc, Response::Ratio] {
            let g: GamlssModelFile = serde_json::from_str(
                &fs::read_to_string(dir.join(format!("models/gamlss_{r}_{stratum}.json"))).unwrap(),
            )
            .unwrap();
            let sl: SlrModelFile = serde_json::from_str(
                &fs::read_to_string(dir.join(format!("models/slr_{r}_{stratum}.json"))).unwrap(),
            )
            .unwrap();
            let gz = gamlss::zscores(&g.model, &sub, r).unwrap();
            let sz = slr_zscores(&sl.model, &sub, r).unwrap();
            for (i, o) in sub.iter().enumerate() {
                let key = |m: &str| (o.id.clone(), r.to_string(), m.to_string());
                assert_eq!(rows[&key("gamlss")].0, gz[i]);
                assert_eq!(rows[&key("slr")].0, sz[i]);
            }
            // A measurement at the predicted median scores zero.
            let p = gamlss::predict_params(&g.model, &sub[0].covariates).unwrap();
            assert!(p.zscore(p.mu).unwrap().abs() < 1e-15);
        }
    }
}

#[test]
fn comparing_a_report_with_itself_gives_zero_deltas() {
    let a = run_a();
    let c = compare(a, a);
    assert!(c.unmatched.is_empty());
    assert!(!c.exceedance.is_empty());
    for e in &c.exceedance {
        assert_eq!(e.gamlss_pass_rate.delta, Some(0.0));
        assert_eq!(e.slr_pass_rate.delta, Some(0.0));
        assert_eq!((e.gamlss_bic_delta, e.slr_bic_delta), (0.0, 0.0));
    }
    assert!(!c.status.is_empty());
    for st in &c.status {
        assert!(st.gamlss.iter().chain(&st.slr).all(|d| d.percent_delta == 0.0 && d.count_delta == 0));
        assert_eq!(st.gamlss_kappa, Some(1.0));
        assert_eq!(st.slr_kappa, Some(1.0));
    }
}

#[test]
fn comparison_deltas_are_antisymmetric() {
    let (a, b) = (run_a(), run_b());
    let ab = compare(a, b);
    let ba = compare(b, a);
    assert_eq!(ab.exceedance.len(), ba.exceedance.len());
    for (x, y) in ab.exceedance.iter().zip(&ba.exceedance) {
        assert_eq!(x.gamlss_pass_rate.delta.map(|d| -d), y.gamlss_pass_rate.delta);
        assert_eq!(x.slr_pass_rate.delta.map(|d| -d), y.slr_pass_rate.delta);
        assert_eq!(x.gamlss_bic_delta, -y.gamlss_bic_delta);
    }
    for (x, y) in ab.status.iter().zip(&ba.status) {
        for (dx, dy) in x.gamlss.iter().zip(&y.gamlss) {
            assert_eq!(dx.count_delta, -dy.count_delta);
        }
        // Different subjects: no agreement statistic.
        assert_eq!(x.gamlss_kappa, None);
    }
}

#[test]
fn skewed_data_separates_the_two_families() {
    let rep = report(run_a());
    for m in rep.models.iter().filter(|m| m.response == Response::Fvc) {
        assert!(m.bic_difference > 10.0);
        let l = &m.exceedance[0];
        assert!(l.slr_passed < l.gamlss_passed, "{}: SLR {} vs GAMLSS {}", m.stratum, l.slr_passed, l.gamlss_passed);
    }
}

#[test]
fn input_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = lungref(&["fit", "--data", s(&missing), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = lungref(&["fit", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let bad_config = tmp.path().join("config.json");
    fs::write(&bad_config, r#"{"bin_widht": 5}"#).unwrap();
    let out = lungref(&["--config", s(&bad_config), "simulate", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let bad_rows = tmp.path().join("bad.csv");
    fs::write(
        &bad_rows,
        "id,sex,age_years,height_cm,weight_kg,fev1_l,fvc_l\n1,F,30,160,,2.5,3.1\n2,X,30,160,,2.5,3.1\n",
    )
    .unwrap();
    let out = lungref(&["fit", "--data", s(&bad_rows), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = lungref(&["simulate", "--scenario", "nope", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_reports_problems_but_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lungref(&["compare", s(&tmp.path().join("a.json")), s(&tmp.path().join("b.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stderr.is_empty());
}
