use lungref::data::{columns, Covariates, Response, Sex};
use lungref::distributions::{bccg_sample, normal_quantile, BccgParams};
use lungref::gamlss::{
    fit_gamlss, fit_gamlss_xy, information_criteria, lln_curve, log_likelihood, predict_params,
    zscores, zscores_xy, Convergence, GamlssSpec, Param,
};
use lungref::diagnostics::binomial_band;
use lungref::synthetic::{generate, skew_lung};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight(mut spec: GamlssSpec) -> GamlssSpec {
    spec.convergence = Convergence {
        max_outer: 200,
        deviance_tol: 1e-10,
        ..Convergence::default()
    };
    spec
}

fn constant_data(p: &BccgParams, n: usize, seed: u64) -> (Vec<Covariates>, Vec<f64>) {
    let y = bccg_sample(p, n, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov = (0..n)
        .map(|_| Covariates::new(rng.gen_range(20.0..60.0), rng.gen_range(150.0..190.0)))
        .collect();
    (cov, y)
}

#[test]
fn lognormal_fit_matches_closed_form_mle() {
    let truth = BccgParams::new(3.0, 0.15, 0.0).unwrap();
    let (cov, y) = constant_data(&truth, 4000, 11);
    let mut spec = tight(GamlssSpec::constant());
    spec.nu_fixed = Some(0.0);
    let m = fit_gamlss_xy(&cov, &y, &spec).unwrap();
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    let p = predict_params(&m, &cov[0]).unwrap();
    assert!((p.mu - mean.exp()).abs() < 1e-6 * p.mu, "{} vs {}", p.mu, mean.exp());
    assert!((p.sigma - sd).abs() < 1e-6 * sd, "{} vs {sd}", p.sigma);
    assert_eq!(p.nu, 0.0);
}

#[test]
fn constant_fit_solves_the_score_equations() {
    let truth = BccgParams::new(2.5, 0.12, -0.7).unwrap();
    let (cov, y) = constant_data(&truth, 5000, 12);
    let m = fit_gamlss_xy(&cov, &y, &tight(GamlssSpec::constant())).unwrap();
    let p = predict_params(&m, &cov[0]).unwrap();
    let mut score = [0.0; 3];
    for &yi in &y {
        let g = p.logpdf_gradient(yi).unwrap();
        // Scores on the predictor scale: log links for mu and sigma.
        score[0] += g[0] * p.mu;
        score[1] += g[1] * p.sigma;
        score[2] += g[2];
    }
    for (k, s) in score.iter().enumerate() {
        assert!(s.abs() / (y.len() as f64) < 1e-4, "score {k} = {s}");
    }
    assert!((p.nu - truth.nu).abs() < 0.2);
    assert!((p.mu / truth.mu - 1.0).abs() < 0.01);
}

#[test]
fn deviance_trace_is_non_increasing() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 3000).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    assert!(m.converged);
    for w in m.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-8 * w[0].abs().max(1.0), "{w:?}");
    }
    assert_eq!(*m.trace.last().unwrap(), m.global_deviance);
}

#[test]
fn information_criteria_are_consistent_with_the_likelihood() {
    let ds = generate(&skew_lung().single_sex(Sex::M), 2000).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let (cov, y) = columns(&ds.observations, Response::Fvc);
    let ll = log_likelihood(&m, &cov, &y).unwrap();
    let ic = information_criteria(&m);
    assert!((ic.global_deviance + 2.0 * ll).abs() < 1e-8 * ll.abs());
    assert!((ic.bic - (ic.global_deviance + (2000f64).ln() * ic.edf)).abs() < 1e-9);
    assert!((ic.aic - (ic.global_deviance + 2.0 * ic.edf)).abs() < 1e-9);
    let parts = [Param::Mu, Param::Sigma, Param::Nu]
        .iter()
        .map(|&p| m.parameter(p).edf)
        .sum::<f64>();
    assert!((parts - m.total_edf).abs() < 1e-9);
}

#[test]
fn fit_is_equivariant_under_response_rescaling() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 2000).unwrap();
    let (cov, y) = columns(&ds.observations, Response::Fvc);
    let c = 1000.0;
    let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
    let spec = tight(GamlssSpec::default());
    let a = fit_gamlss_xy(&cov, &y, &spec).unwrap();
    let b = fit_gamlss_xy(&cov, &scaled, &spec).unwrap();
    let shift = b.mu.intercept().unwrap() - a.mu.intercept().unwrap();
    assert!((shift - c.ln()).abs() < 1e-6, "intercept shift {shift}");
    let za = zscores_xy(&a, &cov, &y).unwrap();
    let zb = zscores_xy(&b, &cov, &scaled).unwrap();
    let worst = za.iter().zip(&zb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "z-scores moved by {worst}");
}

#[test]
fn training_coverage_of_the_fifth_centile() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 5000).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let z = zscores(&m, &ds.observations, Response::Fvc).unwrap();
    let cut = normal_quantile(0.05).unwrap();
    let frac = z.iter().filter(|&&v| v < cut).count() as f64 / z.len() as f64;
    let (lo, hi) = binomial_band(z.len(), 0.05).unwrap();
    assert!(lo <= frac && frac <= hi, "{frac} outside [{lo}, {hi}]");
}

#[test]
fn lln_curve_is_the_fifth_centile() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 2000).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let grid: Vec<Covariates> = (10..90).step_by(10).map(|a| Covariates::new(a as f64, 160.0)).collect();
    let lln = lln_curve(&m, &grid, 0.05).unwrap();
    for (c, l) in grid.iter().zip(&lln) {
        let p = predict_params(&m, c).unwrap();
        assert!((p.cdf(*l).unwrap() - 0.05).abs() < 1e-12);
        assert!(*l < p.mu);
    }
}

#[test]
fn estimated_skewness_beats_a_wrong_fixed_value() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 3000).unwrap();
    let free = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let spec = GamlssSpec {
        nu_fixed: Some(1.0),
        ..GamlssSpec::default()
    };
    let fixed = fit_gamlss(&ds.observations, Response::Fvc, &spec).unwrap();
    assert!(information_criteria(&free).bic < information_criteria(&fixed).bic - 10.0);
    let nu = free.nu.intercept().unwrap();
    assert!((nu + 0.5).abs() < 0.3, "nu = {nu}");
}

#[test]
fn extrapolation_is_linear_and_flagged() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 2000).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let (_, extrapolated) = m.predict_checked(&Covariates::new(50.0, 160.0)).unwrap();
    assert!(!extrapolated);
    let eta = |age: f64| m.sigma.eta(&Covariates::new(age, 160.0)).unwrap();
    let (e1, f1) = eta(100.0);
    let (e2, _) = eta(102.0);
    let (e3, _) = eta(104.0);
    assert!(f1);
    assert!(((e3 - e2) - (e2 - e1)).abs() < 1e-12);
}

#[test]
fn invalid_specs_and_data_are_rejected() {
    let cov = vec![Covariates::new(30.0, 170.0); 50];
    let y: Vec<f64> = (0..50).map(|i| 3.0 + 0.01 * i as f64).collect();
    let mut spec = GamlssSpec::default();
    spec.mu.smooth.as_mut().unwrap().target_edf = 1.0;
    assert!(fit_gamlss_xy(&cov, &y, &spec).is_err());
    let mut bad = y.clone();
    bad[4] = -1.0;
    assert!(fit_gamlss_xy(&cov, &bad, &GamlssSpec::constant()).is_err());
    assert!(fit_gamlss_xy(&cov[..10], &y, &GamlssSpec::constant()).is_err());
}

#[test]
fn model_files_round_trip_through_json() {
    let ds = generate(&skew_lung().single_sex(Sex::F), 1500).unwrap();
    let m = fit_gamlss(&ds.observations, Response::Fvc, &GamlssSpec::default()).unwrap();
    let back = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(m, back);
}
