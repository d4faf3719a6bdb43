use nalgebra::{Cholesky, DMatrix, DVector};

use super::formula::{GamlssSpec, Link, ParamFormula};
use super::{FittedGamlssModel, FittedParameter, FittedSmooth, Param};
use crate::data::{columns, Covariates, Observation, Response};
use crate::distributions::BccgParams;
use crate::error::{Error, Result};
use crate::splines::{bspline_basis, difference_penalty, PenalizedSystem, SmoothFit, SplineBasisSpec};

/// Relative floor applied to the working weights.
const WEIGHT_FLOOR: f64 = 1e-6;

struct SmoothDesign {
    spec: SplineBasisSpec,
    target_edf: f64,
    basis: DMatrix<f64>,
    penalty: DMatrix<f64>,
    /// Maps constrained coefficients back to the K basis coefficients.
    constraint: DMatrix<f64>,
    penalty_constrained: DMatrix<f64>,
}

struct Design {
    link: Link,
    formula: ParamFormula,
    n_linear: usize,
    /// [linear columns | constrained spline columns]
    columns: DMatrix<f64>,
    smooth: Option<SmoothDesign>,
}

struct ParamState {
    coef: DVector<f64>,
    eta: Vec<f64>,
    edf: f64,
    lambda: f64,
    smooth_edf: f64,
}

/// Orthonormal basis (K x K-1) of the complement of `c`, from a
/// Householder reflection.
fn complement_basis(c: &DVector<f64>) -> DMatrix<f64> {
    let k = c.len();
    let norm = c.norm();
    let mut v = c.clone();
    v[0] += if c[0] >= 0.0 { norm } else { -norm };
    let vv = v.dot(&v);
    let h = DMatrix::<f64>::identity(k, k) - (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, k - 1).into_owned()
}

impl Design {
    fn new(formula: &ParamFormula, cov: &[Covariates], ages: &[f64]) -> Result<Self> {
        let n = cov.len();
        let p = formula.linear_terms.len();
        let mut x = DMatrix::zeros(n, p);
        for (i, c) in cov.iter().enumerate() {
            for (j, t) in formula.linear_terms.iter().enumerate() {
                let v = t.eval(c)?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("term {t} is not finite for row {i}")));
                }
                x[(i, j)] = v;
            }
        }
        let has_intercept = formula.linear_terms.iter().any(|t| t.is_intercept());
        let smooth = match &formula.smooth {
            None => None,
            Some(s) => {
                let spec = SplineBasisSpec::covering(ages, s.n_interior_knots)?;
                let basis = bspline_basis(ages, &spec)?;
                let k = spec.n_basis();
                if s.target_edf > k as f64 {
                    return Err(Error::Input(format!(
                        "smooth target edf {} exceeds basis size {k}",
                        s.target_edf
                    )));
                }
                let penalty = difference_penalty(spec.penalty_order, k)?;
                // with an intercept in the linear part the smooth is
                // constrained to sum to zero over the data
                let constraint = if has_intercept {
                    let sums = DVector::from_iterator(k, basis.column_iter().map(|c| c.sum()));
                    complement_basis(&sums)
                } else {
                    DMatrix::identity(k, k)
                };
                let penalty_constrained = constraint.transpose() * &penalty * &constraint;
                Some(SmoothDesign {
                    spec,
                    target_edf: s.target_edf,
                    basis,
                    penalty,
                    constraint,
                    penalty_constrained,
                })
            }
        };
        let columns = match &smooth {
            None => x,
            Some(s) => {
                let bz = &s.basis * &s.constraint;
                let q = p + bz.ncols();
                let mut c = DMatrix::zeros(n, q);
                c.columns_mut(0, p).copy_from(&x);
                c.columns_mut(p, bz.ncols()).copy_from(&bz);
                c
            }
        };
        Ok(Design {
            link: formula.link,
            formula: formula.clone(),
            n_linear: p,
            columns,
            smooth,
        })
    }

    fn n_coef(&self) -> usize {
        self.columns.ncols()
    }

    fn eta(&self, coef: &DVector<f64>) -> Vec<f64> {
        (&self.columns * coef).iter().cloned().collect()
    }

    /// Coefficients representing the constant predictor `eta0`.
    fn constant_coef(&self, eta0: f64) -> DVector<f64> {
        let mut coef = DVector::zeros(self.n_coef());
        if let Some(i) = self.formula.linear_terms.iter().position(|t| t.is_intercept()) {
            coef[i] = eta0;
        } else if self.smooth.is_some() {
            // unconstrained B-spline basis: partition of unity
            for j in self.n_linear..self.n_coef() {
                coef[j] = eta0;
            }
        }
        coef
    }

    /// Penalised weighted least squares of the working response on the
    /// joint design. Returns coefficients, hat-matrix trace, lambda and
    /// the smooth's own edf.
    fn solve(&self, z: &[f64], w: &[f64]) -> Result<(DVector<f64>, f64, f64, f64)> {
        let q = self.n_coef();
        let (lambda, smooth_edf) = match &self.smooth {
            None => (0.0, 0.0),
            Some(s) => {
                let sys = PenalizedSystem::new(&s.basis, z, w, &s.penalty)?;
                let lambda = sys.lambda_for_edf(s.target_edf, s.spec.penalty_order)?;
                (lambda, sys.edf(lambda)?)
            }
        };
        let mut cw = self.columns.clone();
        for (i, mut row) in cw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let ctwc = self.columns.tr_mul(&cw);
        let ctwz = cw.tr_mul(&DVector::from_column_slice(z));
        let mut a = ctwc.clone();
        if let Some(s) = &self.smooth {
            let k = s.penalty_constrained.nrows();
            let mut block = a.view_mut((self.n_linear, self.n_linear), (k, k));
            block += &s.penalty_constrained * lambda;
        }
        let chol = match Cholesky::new(a.clone()) {
            Some(c) => c,
            None => {
                let ridge = 1e-10 * a.trace().max(f64::MIN_POSITIVE);
                Cholesky::new(a + DMatrix::<f64>::identity(q, q) * ridge).ok_or_else(|| {
                    Error::Singular("working-response system is singular".into())
                })?
            }
        };
        let coef = chol.solve(&ctwz);
        let edf = chol.solve(&ctwc).trace();
        Ok((coef, edf, lambda, smooth_edf))
    }

    fn to_fitted(&self, state: &ParamState) -> FittedParameter {
        let p = self.n_linear;
        let coefficients: Vec<f64> = state.coef.rows(0, p).iter().cloned().collect();
        let smooth = self.smooth.as_ref().map(|s| {
            let k = s.constraint.ncols();
            let a = &s.constraint * state.coef.rows(p, k);
            FittedSmooth {
                basis: s.spec.clone(),
                fit: SmoothFit {
                    coefficients: a.iter().cloned().collect(),
                    lambda: state.lambda,
                    edf: state.smooth_edf,
                },
            }
        });
        FittedParameter {
            link: self.link,
            terms: self.formula.linear_terms.clone(),
            coefficients,
            smooth,
            edf: state.edf,
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Problem<'a> {
    y: &'a [f64],
    designs: [Option<Design>; 3],
    links: [Link; 3],
    fixed_nu: Option<f64>,
}

impl Problem<'_> {
    fn theta(&self, etas: &[Vec<f64>; 3], i: usize) -> BccgParams {
        let nu = match self.fixed_nu {
            Some(v) => v,
            None => self.links[2].inverse(etas[2][i]),
        };
        BccgParams {
            mu: self.links[0].inverse(etas[0][i]),
            sigma: self.links[1].inverse(etas[1][i]),
            nu,
        }
    }

    fn deviance(&self, etas: &[Vec<f64>; 3]) -> f64 {
        let mut dev = 0.0;
        for (i, &y) in self.y.iter().enumerate() {
            let p = self.theta(etas, i);
            if !(p.mu > 0.0 && p.sigma > 0.0 && p.mu.is_finite() && p.sigma.is_finite()) {
                return f64::INFINITY;
            }
            dev -= 2.0 * p.logpdf_unchecked(y);
        }
        if dev.is_finite() {
            dev
        } else {
            f64::INFINITY
        }
    }
}

/// Fits the BCCG GAMLSS to one response of `data`.
pub fn fit_gamlss(data: &[Observation], response: Response, spec: &GamlssSpec) -> Result<FittedGamlssModel> {
    let (cov, y) = columns(data, response);
    fit_gamlss_xy(&cov, &y, spec)
}

pub fn fit_gamlss_xy(cov: &[Covariates], y: &[f64], spec: &GamlssSpec) -> Result<FittedGamlssModel> {
    spec.validate()?;
    let n = y.len();
    if cov.len() != n {
        return Err(Error::Dimension("covariates and responses differ in length".into()));
    }
    if n < 50 {
        return Err(Error::Degenerate(format!("need at least 50 observations, got {n}")));
    }
    if let Some(i) = y.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Input(format!("response in row {i} is not positive: {}", y[i])));
    }
    if let Some(i) = cov
        .iter()
        .position(|c| !(c.age.is_finite() && c.height.is_finite() && c.weight.is_none_or(f64::is_finite)))
    {
        return Err(Error::Input(format!("covariates in row {i} are not finite")));
    }
    let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_max - y_min <= 1e-12 * y_max {
        return Err(Error::Degenerate("response is constant".into()));
    }

    let ages: Vec<f64> = cov.iter().map(|c| c.age).collect();
    let age_range = [
        ages.iter().cloned().fold(f64::INFINITY, f64::min),
        ages.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    ];
    let fixed_nu = spec.nu_fixed;
    let designs = [
        Some(Design::new(&spec.mu, cov, &ages)?),
        Some(Design::new(&spec.sigma, cov, &ages)?),
        if fixed_nu.is_some() {
            None
        } else {
            Some(Design::new(&spec.nu, cov, &ages)?)
        },
    ];
    let problem = Problem {
        y,
        designs,
        links: [spec.mu.link, spec.sigma.link, spec.nu.link],
        fixed_nu,
    };

    // starting values: median, robust CV of ln y, nu = 0.5
    let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let med_ln = median(&ln_y);
    let abs_dev: Vec<f64> = ln_y.iter().map(|v| (v - med_ln).abs()).collect();
    let sigma0 = (1.4826 * median(&abs_dev)).max(1e-3);
    let start = [median(y), sigma0, fixed_nu.unwrap_or(0.5)];
    let mut states: Vec<Option<ParamState>> = Vec::with_capacity(3);
    for (k, d) in problem.designs.iter().enumerate() {
        states.push(d.as_ref().map(|d| {
            let coef = d.constant_coef(problem.links[k].apply(start[k]));
            let eta = d.eta(&coef);
            ParamState {
                coef,
                eta,
                edf: 0.0,
                lambda: 0.0,
                smooth_edf: 0.0,
            }
        }));
    }
    let mut etas: [Vec<f64>; 3] = [0, 1, 2].map(|k| match &states[k] {
        Some(s) => s.eta.clone(),
        None => vec![problem.links[k].apply(start[k]); n],
    });
    // nu held fixed does not use the eta array
    if fixed_nu.is_some() {
        etas[2] = vec![0.0; n];
    }

    let conv = &spec.convergence;
    let mut deviance = problem.deviance(&etas);
    if !deviance.is_finite() {
        return Err(Error::Degenerate("starting values give a non-finite deviance".into()));
    }
    let mut trace = Vec::new();
    let mut converged = false;
    for _outer in 0..conv.max_outer {
        let previous = deviance;
        for param in Param::ALL {
            let k = param.index();
            let Some(design) = &problem.designs[k] else {
                continue;
            };
            let state = states[k].as_mut().expect("state exists for every design");
            deviance = update_parameter(&problem, design, param, state, &mut etas, deviance, conv)?;
        }
        trace.push(deviance);
        if (previous - deviance).abs() < conv.deviance_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "gamlss fit did not converge in {} outer iterations (deviance {deviance})",
            conv.max_outer
        );
    }

    let fitted: Vec<FittedParameter> = (0..3)
        .map(|k| match (&problem.designs[k], &states[k]) {
            (Some(d), Some(s)) => d.to_fitted(s),
            _ => FittedParameter::constant(Link::Identity, fixed_nu.unwrap_or(0.0)),
        })
        .collect();
    let total_edf = fitted.iter().map(|p| p.edf).sum();
    let [mu, sigma, nu]: [FittedParameter; 3] = fitted.try_into().expect("three parameters");
    Ok(FittedGamlssModel {
        mu,
        sigma,
        nu,
        global_deviance: deviance,
        total_edf,
        n,
        converged,
        trace,
        nu_fixed: fixed_nu,
        age_range,
    })
}

/// Inner penalised IRLS loop for one parameter with the others held
/// fixed. Returns the new global deviance.
fn update_parameter(
    problem: &Problem,
    design: &Design,
    param: Param,
    state: &mut ParamState,
    etas: &mut [Vec<f64>; 3],
    mut deviance: f64,
    conv: &super::Convergence,
) -> Result<f64> {
    let k = param.index();
    let link = problem.links[k];
    let n = problem.y.len();
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _inner in 0..conv.max_inner {
        for i in 0..n {
            let p = problem.theta(etas, i);
            let theta = [p.mu, p.sigma, p.nu][k];
            let dtheta = link.dtheta_deta(theta);
            let grad = p.gradient_unchecked(problem.y[i])[k];
            let info = p.expected_information()[k];
            u[i] = grad * dtheta;
            w[i] = info * dtheta * dtheta;
        }
        let floor = WEIGHT_FLOOR * median(&w).max(f64::MIN_POSITIVE);
        for i in 0..n {
            w[i] = w[i].max(floor);
            z[i] = etas[k][i] + u[i] / w[i];
        }
        let (coef_new, edf, lambda, smooth_edf) = design.solve(&z, &w)?;

        let old_eta = std::mem::take(&mut etas[k]);
        let mut coef = coef_new;
        let mut accepted = None;
        for halving in 0..=conv.step_halvings_max {
            if halving > 0 {
                coef = (&coef + &state.coef) * 0.5;
            }
            etas[k] = design.eta(&coef);
            let dev = problem.deviance(etas);
            if dev <= deviance + 1e-12 * deviance.abs() {
                accepted = Some(dev);
                break;
            }
        }
        match accepted {
            Some(dev) => {
                let change = deviance - dev;
                deviance = dev;
                state.coef = coef;
                state.eta = etas[k].clone();
                state.edf = edf;
                state.lambda = lambda;
                state.smooth_edf = smooth_edf;
                if change.abs() < conv.deviance_tol {
                    break;
                }
            }
            None => {
                etas[k] = old_eta;
                // edf still reflects the current weights
                if state.edf == 0.0 {
                    state.edf = edf;
                    state.lambda = lambda;
                    state.smooth_edf = smooth_edf;
                }
                break;
            }
        }
    }
    Ok(deviance)
}
