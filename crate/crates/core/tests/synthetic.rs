use lungref::data::{Response, Sex};
use lungref::distributions::normal_cdf;
use lungref::synthetic::{
    builtin_scenarios, generate, ratio_like, scenario_by_name, skew_lung, symmetric_homoscedastic,
};

fn ks_normal(mut z: Vec<f64>) -> f64 {
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal_cdf(v);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn generation_is_seeded_and_sized() {
    let s = skew_lung();
    let a = generate(&s, 500).unwrap();
    let b = generate(&s, 500).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.observations.len(), 500);
    assert_eq!(a.truth.len(), 500);
    let c = generate(&s.clone().with_seed(s.seed + 1), 500).unwrap();
    assert_ne!(a.observations, c.observations);
    assert!(generate(&s, 0).is_err());
}

#[test]
fn stored_truth_is_consistent_with_the_data() {
    let s = skew_lung();
    let ds = generate(&s, 2000).unwrap();
    for (o, t) in ds.observations.iter().zip(&ds.truth) {
        assert_eq!(o.id, t.id);
        let fvc = s.true_params(Response::Fvc, o.sex, &o.covariates).unwrap().unwrap();
        assert_eq!(fvc, t.fvc);
        assert!((t.fvc.zscore(o.fvc).unwrap() - t.fvc_z).abs() < 1e-9);
        assert!((t.ratio.zscore(o.ratio()).unwrap() - t.ratio_z).abs() < 1e-9);
        assert!((o.fev1 - o.fvc * o.ratio()).abs() < 1e-12);
        assert!(o.covariates.age >= 5.0 && o.covariates.age <= 95.0);
    }
}

#[test]
fn true_zscores_are_standard_normal() {
    let ds = generate(&skew_lung(), 100_000).unwrap();
    let critical = 1.628 / (100_000f64).sqrt();
    for r in [Response::Fvc, Response::Ratio] {
        let d = ks_normal(ds.truth.iter().map(|t| t.z(r).unwrap()).collect());
        assert!(d < critical, "{r:?}: KS {d}");
    }
}

#[test]
fn true_lln_fraction_matches_level() {
    let n = 50_000;
    let ds = generate(&ratio_like(), n).unwrap();
    for level in [0.05, 0.025] {
        for r in [Response::Fvc, Response::Ratio] {
            let k = ds.truth.iter().filter(|t| t.below_lln(r, level).unwrap()).count();
            let sd = (level * (1.0 - level) / n as f64).sqrt();
            let frac = k as f64 / n as f64;
            assert!((frac - level).abs() < 4.0 * sd, "{r:?} {level}: {frac}");
        }
    }
}

#[test]
fn height_tracks_the_growth_curve() {
    let s = skew_lung().single_sex(Sex::M);
    let ds = generate(&s, 20_000).unwrap();
    let ratios: Vec<f64> = ds
        .observations
        .iter()
        .map(|o| (o.covariates.height / s.height.median(o.covariates.age, Sex::M)).ln())
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / ratios.len() as f64).sqrt();
    assert!(mean.abs() < 0.002, "{mean}");
    assert!((sd - s.height.noise_cv).abs() < 0.002, "{sd}");
    assert!(ds.observations.iter().all(|o| o.sex == Sex::M));
}

#[test]
fn sexes_are_mixed_at_the_configured_fraction() {
    let ds = generate(&symmetric_homoscedastic(), 20_000).unwrap();
    let males = ds.observations.iter().filter(|o| o.sex == Sex::M).count() as f64 / 20_000.0;
    assert!((males - 0.5).abs() < 0.015);
}

#[test]
fn scenarios_are_found_by_name() {
    for s in builtin_scenarios() {
        assert_eq!(scenario_by_name(&s.name).unwrap(), s);
        s.validate().unwrap();
    }
    assert!(scenario_by_name("nope").is_err());
}
