use lungref::splines::{
    bspline_basis, difference_penalty, fit_penalized_wls, lambda_for_edf, PenalizedSystem,
    SplineBasisSpec,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Cox-de Boor recursion, right-continuous except at the last knot.
fn cox_de_boor(t: &[f64], i: usize, d: usize, x: f64) -> f64 {
    if d == 0 {
        let last = *t.last().unwrap();
        let inside = t[i] <= x && x < t[i + 1];
        let closes = x == last && t[i] < t[i + 1] && t[i + 1] == last;
        return if inside || closes { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    if t[i + d] > t[i] {
        v += (x - t[i]) / (t[i + d] - t[i]) * cox_de_boor(t, i, d - 1, x);
    }
    if t[i + d + 1] > t[i + 1] {
        v += (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * cox_de_boor(t, i + 1, d - 1, x);
    }
    v
}

fn spec(lo: f64, hi: f64, knots: usize) -> SplineBasisSpec {
    let mut s = SplineBasisSpec::new(lo, hi);
    s.n_interior_knots = knots;
    s
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn basis_matches_recursive_definition() {
    for degree in 1..=3 {
        let mut s = spec(2.0, 9.0, 7);
        s.degree = degree;
        let t = s.knots();
        let x = grid(2.0, 9.0, 301);
        let b = bspline_basis(&x, &s).unwrap();
        assert_eq!(b.ncols(), s.n_basis());
        for (r, &xi) in x.iter().enumerate() {
            for j in 0..s.n_basis() {
                let oracle = cox_de_boor(&t, j, degree, xi);
                assert!((b[(r, j)] - oracle).abs() < 1e-12, "degree {degree} x {xi} j {j}");
            }
        }
    }
}

#[test]
fn knots_are_equally_spaced_and_clamped() {
    let s = spec(0.0, 10.0, 4);
    let t = s.knots();
    let interior: Vec<f64> = t[3..t.len() - 3].to_vec();
    assert_eq!(interior.len(), 6);
    for w in interior.windows(2) {
        assert!((w[1] - w[0] - 2.0).abs() < 1e-12);
    }
}

#[test]
fn covering_pads_the_range_by_one_percent() {
    let s = SplineBasisSpec::covering(&[10.0, 30.0, 20.0], 5).unwrap();
    assert!((s.x_min - 9.8).abs() < 1e-12);
    assert!((s.x_max - 30.2).abs() < 1e-12);
    assert!(SplineBasisSpec::covering(&[1.0, 1.0], 5).is_err());
}

#[test]
fn points_outside_the_domain_are_rejected() {
    let s = spec(0.0, 1.0, 3);
    assert!(bspline_basis(&[1.5], &s).is_err());
    assert!(bspline_basis(&[f64::NAN], &s).is_err());
}

#[test]
fn penalty_annihilates_polynomials_of_lower_order() {
    let k = 12;
    let ones = DVector::from_element(k, 1.0);
    let line = DVector::from_fn(k, |i, _| 3.0 * i as f64 - 1.0);
    let quad = DVector::from_fn(k, |i, _| (i * i) as f64);
    let p1 = difference_penalty(1, k).unwrap();
    let p2 = difference_penalty(2, k).unwrap();
    assert!((&p1 * &ones).norm() < 1e-12);
    assert!((&p2 * &ones).norm() < 1e-12);
    assert!((&p2 * &line).norm() < 1e-12);
    assert!((&p2 * &quad).norm() > 1.0);
    assert!(difference_penalty(0, k).is_err());
    assert!(difference_penalty(k, k).is_err());
}

struct Problem {
    b: DMatrix<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    p: DMatrix<f64>,
}

fn problem(n: usize) -> Problem {
    let s = spec(0.0, 1.0, 10);
    let x = grid(0.0, 1.0, n);
    let y: Vec<f64> = x.iter().map(|&v| (6.0 * v).sin() + 0.1 * (37.0 * v).cos()).collect();
    let w: Vec<f64> = (0..n).map(|i| 0.5 + (i % 3) as f64).collect();
    let b = bspline_basis(&x, &s).unwrap();
    let p = difference_penalty(2, s.n_basis()).unwrap();
    Problem { b, y, w, p }
}

#[test]
fn solution_matches_brute_force_normal_equations() {
    let pr = problem(120);
    let w = DMatrix::from_diagonal(&DVector::from_vec(pr.w.clone()));
    let y = DVector::from_vec(pr.y.clone());
    for lambda in [0.0, 0.3, 50.0] {
        let lhs = pr.b.transpose() * &w * &pr.b + &pr.p * lambda;
        let rhs = pr.b.transpose() * &w * &y;
        let oracle = lhs.clone().lu().solve(&rhs).unwrap();
        let fit = fit_penalized_wls(&pr.b, &pr.y, &pr.w, lambda, &pr.p).unwrap();
        for (a, o) in fit.coefficients.iter().zip(oracle.iter()) {
            assert!((a - o).abs() < 1e-8 * o.abs().max(1.0));
        }
        // edf = tr((B'WB + lambda P)^-1 B'WB)
        let hat = lhs.try_inverse().unwrap() * (pr.b.transpose() * &w * &pr.b);
        assert!((fit.edf - hat.trace()).abs() < 1e-8);
    }
}

#[test]
fn first_order_condition_holds() {
    let pr = problem(90);
    let lambda = 2.5;
    let fit = fit_penalized_wls(&pr.b, &pr.y, &pr.w, lambda, &pr.p).unwrap();
    let a = DVector::from_vec(fit.coefficients);
    let resid = DVector::from_vec(pr.y.clone()) - &pr.b * &a;
    let wr = resid.component_mul(&DVector::from_vec(pr.w.clone()));
    let lhs = pr.b.transpose() * wr;
    let rhs = &pr.p * &a * lambda;
    assert!((lhs - rhs).amax() < 1e-8);
}

#[test]
fn edf_limits_and_monotonicity() {
    let pr = problem(200);
    let sys = PenalizedSystem::new(&pr.b, &pr.y, &pr.w, &pr.p).unwrap();
    let k = pr.b.ncols() as f64;
    assert!((sys.edf(0.0).unwrap() - k).abs() < 1e-8);
    let mut prev = f64::INFINITY;
    for e in -4..=10 {
        let edf = sys.edf(10f64.powi(e)).unwrap();
        assert!(edf < prev, "edf not decreasing at 1e{e}");
        prev = edf;
    }
    // Approaches the penalty null-space dimension.
    assert!((sys.edf(1e10).unwrap() - 2.0).abs() < 1e-4);
}

#[test]
fn lambda_attains_target_edf() {
    let pr = problem(200);
    for target in [3.0, 5.5, 9.0] {
        let lambda = lambda_for_edf(&pr.b, &pr.w, &pr.p, 2, target).unwrap();
        let edf = fit_penalized_wls(&pr.b, &pr.y, &pr.w, lambda, &pr.p).unwrap().edf;
        assert!((edf - target).abs() <= 0.01, "target {target} got {edf}");
    }
}

#[test]
fn mismatched_shapes_and_bad_weights_are_rejected() {
    let pr = problem(50);
    assert!(fit_penalized_wls(&pr.b, &pr.y[..49], &pr.w, 1.0, &pr.p).is_err());
    let mut w = pr.w.clone();
    w[3] = 0.0;
    assert!(fit_penalized_wls(&pr.b, &pr.y, &w, 1.0, &pr.p).is_err());
    let p = difference_penalty(2, 5).unwrap();
    assert!(fit_penalized_wls(&pr.b, &pr.y, &pr.w, 1.0, &p).is_err());
}

proptest! {
    #[test]
    fn rows_partition_unity(lo in -50.0f64..50.0, width in 0.1f64..100.0, knots in 2usize..30, u in 0.0f64..=1.0) {
        let s = spec(lo, lo + width, knots);
        let row = s.row(lo + u * width).unwrap();
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(row.iter().all(|&v| v >= -1e-15));
        prop_assert!(row.iter().filter(|&&v| v > 0.0).count() <= s.degree + 1);
    }

    #[test]
    fn derivative_row_matches_finite_differences(u in 0.05f64..0.95) {
        let s = spec(0.0, 10.0, 8);
        let x = 10.0 * u;
        let h = 1e-6;
        let d = s.derivative_row(x).unwrap();
        let (a, b) = (s.row(x + h).unwrap(), s.row(x - h).unwrap());
        for j in 0..d.len() {
            prop_assert!((d[j] - (a[j] - b[j]) / (2.0 * h)).abs() < 1e-5);
        }
    }
}
