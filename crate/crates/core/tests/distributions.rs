use lungref::distributions::{
    bccg_cdf, bccg_quantile, bccg_sample, bccg_zscore, normal_cdf, normal_pdf, normal_quantile,
    BccgParams,
};
use lungref::Error;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn params() -> impl Strategy<Value = BccgParams> {
    (0.3f64..8.0, 0.02f64..0.3, -1.5f64..1.5).prop_map(|(m, s, n)| BccgParams::new(m, s, n).unwrap())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Kolmogorov-Smirnov distance of `x` against `cdf`.
fn ks_distance(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

#[test]
fn normal_functions_agree_with_reference_implementation() {
    let reference = Normal::new(0.0, 1.0).unwrap();
    for i in -800..=800 {
        let z = i as f64 / 100.0;
        let (ours, theirs) = (normal_cdf(z), reference.cdf(z));
        assert!((ours - theirs).abs() <= 1e-9 * theirs, "z = {z}");
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((normal_pdf(z) - pdf).abs() < 1e-15);
    }
}

#[test]
fn normal_cdf_matches_tabulated_values() {
    for (z, p) in [
        (-1.0, 0.158_655_253_931_457_05),
        (-1.959_963_984_540_054, 0.025),
        (-8.0, 6.220_960_574_271_784e-16),
        (-20.0, 2.753_624_118_606_233_5e-89),
    ] {
        assert!((normal_cdf(z) - p).abs() <= 1e-13 * p, "z = {z}: {:e}", normal_cdf(z));
    }
}

#[test]
fn normal_quantile_matches_bisection() {
    for &p in &[1e-300, 1e-20, 1e-8, 0.001, 0.025, 0.05, 0.3, 0.5, 0.77, 0.975, 1.0 - 1e-9] {
        // Bisect in the lower tail, where the CDF has full relative precision.
        let (tail, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
        let (mut lo, mut hi) = (-40.0f64, 0.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = normal_quantile(p).unwrap();
        let oracle = sign * lo;
        assert!((q - oracle).abs() <= 1e-9 * lo.abs().max(1.0), "p = {p}: {q} vs {oracle}");
    }
    assert!((normal_quantile(0.05).unwrap() + 1.644_853_626_951_472).abs() < 1e-14);
    assert!(normal_quantile(0.0).is_err());
    assert!(normal_quantile(1.0).is_err());
}

#[test]
fn lognormal_special_case() {
    // nu = 0: ln y ~ N(ln mu, sigma^2).
    let p = BccgParams::new(2.0, 0.2, 0.0).unwrap();
    for y in [0.5, 1.0, 2.0, 3.7] {
        let z = (y / 2.0f64).ln() / 0.2;
        assert!((bccg_zscore(y, &p).unwrap() - z).abs() < 1e-14);
        let logpdf = -y.ln() - 0.2f64.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z;
        assert!((p.logpdf(y).unwrap() - logpdf).abs() < 1e-12);
    }
}

#[test]
fn density_is_derivative_of_cdf() {
    for (mu, sigma, nu) in [(3.0, 0.1, -0.5), (0.8, 0.25, 1.2), (5.0, 0.05, 0.0)] {
        let p = BccgParams::new(mu, sigma, nu).unwrap();
        for i in 1..20 {
            let y = p.quantile(i as f64 / 20.0).unwrap();
            let h = 1e-5 * y;
            let fd = (bccg_cdf(y + h, &p).unwrap() - bccg_cdf(y - h, &p).unwrap()) / (2.0 * h);
            let pdf = p.pdf(y).unwrap();
            assert!((fd - pdf).abs() <= 1e-6 * pdf, "{fd} vs {pdf}");
        }
    }
}

#[test]
fn untruncated_mass_equals_normal_probability_of_support() {
    // The density omits the truncation constant, so its total mass is
    // Phi(1 / (sigma |nu|)).
    for (sigma, nu) in [(0.3, -1.0), (0.3, 1.0), (0.25, 1.2)] {
        let p = BccgParams::new(2.0, sigma, nu).unwrap();
        let c = 2.0f64.ln();
        let mass = simpson(|t| p.pdf(t.exp()).map_or(0.0, |d| d * t.exp()), c - 12.0, c + 60.0, 400_000);
        let expected = normal_cdf(1.0 / (sigma * nu.abs()));
        assert!((mass - expected).abs() < 1e-7, "sigma {sigma} nu {nu}: {mass} vs {expected}");
    }
}

#[test]
fn out_of_support_quantile_is_an_error() {
    let p = BccgParams::new(2.0, 0.3, -1.0).unwrap();
    // 1 + nu sigma z <= 0 once z >= 1 / 0.3.
    let prob = normal_cdf(3.4);
    assert!(matches!(bccg_quantile(prob, &p), Err(Error::OutOfSupport { .. })));
    let q = BccgParams::new(2.0, 0.3, 1.0).unwrap();
    assert!(matches!(q.quantile(normal_cdf(-3.4)), Err(Error::OutOfSupport { .. })));
    assert!(p.quantile(0.5).is_ok());
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(BccgParams::new(0.0, 0.1, 0.0).is_err());
    assert!(BccgParams::new(1.0, -0.1, 0.0).is_err());
    assert!(BccgParams::new(1.0, 0.1, f64::NAN).is_err());
    let p = BccgParams::new(1.0, 0.1, 0.0).unwrap();
    assert!(p.zscore(0.0).is_err());
    assert!(p.zscore(-1.0).is_err());
    assert!(p.cdf(f64::INFINITY).is_err());
    assert!(p.quantile(0.0).is_err());
}

#[test]
fn samples_follow_the_cdf() {
    let n = 100_000;
    let critical = 1.628 / (n as f64).sqrt();
    for (seed, (mu, sigma, nu)) in [(3.0, 0.12, -0.5), (0.8, 0.2, 1.0), (4.0, 0.08, 0.0)].into_iter().enumerate() {
        let p = BccgParams::new(mu, sigma, nu).unwrap();
        let x = bccg_sample(&p, n, seed as u64).unwrap();
        let d = ks_distance(x, |v| p.cdf(v).unwrap());
        assert!(d < critical, "KS {d} >= {critical}");
    }
}

#[test]
fn sampling_is_seeded() {
    let p = BccgParams::new(3.0, 0.12, -0.5).unwrap();
    assert_eq!(bccg_sample(&p, 50, 9).unwrap(), bccg_sample(&p, 50, 9).unwrap());
    assert_ne!(bccg_sample(&p, 50, 9).unwrap(), bccg_sample(&p, 50, 10).unwrap());
}

proptest! {
    #[test]
    fn median_identity(p in params()) {
        prop_assert!((p.cdf(p.mu).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_strictly_increasing(p in params(), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if let (Ok(ql), Ok(qh)) = (p.quantile(lo), p.quantile(hi)) {
            prop_assert!(ql < qh);
        }
    }

    #[test]
    fn inverse_pairs(p in params(), prob in 0.005f64..0.995) {
        if let Ok(y) = p.quantile(prob) {
            prop_assert!((p.cdf(y).unwrap() - prob).abs() < 1e-10);
            let z = p.zscore(y).unwrap();
            prop_assert!((p.quantile_at_z(z).unwrap() - y).abs() < 1e-10 * y);
        }
    }

    #[test]
    fn nu_zero_limit(mu in 0.3f64..8.0, sigma in 0.02f64..0.3, prob in 0.01f64..0.99, eps in -1e-6f64..1e-6) {
        let base = BccgParams::new(mu, sigma, 0.0).unwrap();
        let y = base.quantile(prob).unwrap();
        let ze = BccgParams::new(mu, sigma, eps).unwrap().zscore(y).unwrap();
        prop_assert!((ze - base.zscore(y).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn zscore_scale_equivariance(p in params(), prob in 0.05f64..0.95, c in 0.1f64..10.0) {
        let y = p.quantile(prob).unwrap();
        let scaled = BccgParams::new(p.mu * c, p.sigma, p.nu).unwrap();
        prop_assert!((scaled.zscore(c * y).unwrap() - p.zscore(y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences(p in params(), prob in 0.02f64..0.98) {
        let y = p.quantile(prob).unwrap();
        let g = p.logpdf_gradient(y).unwrap();
        let theta = [p.mu, p.sigma, p.nu];
        for k in 0..3 {
            let h = 1e-6 * theta[k].abs().max(1e-2);
            let at = |d: f64| {
                let mut t = theta;
                t[k] += d;
                BccgParams::new(t[0], t[1], t[2]).unwrap().logpdf(y).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-4 * g[k].abs().max(1.0), "k {k}: {fd} vs {}", g[k]);
        }
    }
}
