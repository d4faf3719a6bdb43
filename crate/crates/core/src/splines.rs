//! B-spline bases and P-spline (difference-penalised) weighted least squares.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasisSpec {
    pub degree: usize,
    pub n_interior_knots: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub penalty_order: usize,
}

impl SplineBasisSpec {
    /// Cubic basis with 20 interior knots and a second-order penalty.
    pub fn new(x_min: f64, x_max: f64) -> Self {
        SplineBasisSpec {
            degree: 3,
            n_interior_knots: 20,
            x_min,
            x_max,
            penalty_order: 2,
        }
    }

    /// Basis over the range of `x`, padded by 1% on each side.
    pub fn covering(x: &[f64], n_interior_knots: usize) -> Result<Self> {
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::Degenerate(
                "covariate range is empty or not finite".into(),
            ));
        }
        let pad = 0.01 * (hi - lo);
        let mut spec = SplineBasisSpec::new(lo - pad, hi + pad);
        spec.n_interior_knots = n_interior_knots;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 && self.n_interior_knots == 0 {
            return Err(Error::Domain("degree-0 basis needs interior knots".into()));
        }
        if self.n_interior_knots < self.penalty_order {
            return Err(Error::Domain(format!(
                "need at least {} interior knots for a penalty of order {}",
                self.penalty_order, self.penalty_order
            )));
        }
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::Domain(format!(
                "invalid basis domain [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    /// Number of basis functions.
    pub fn n_basis(&self) -> usize {
        self.n_interior_knots + self.degree + 1
    }

    /// Clamped knot vector: equally spaced breakpoints with the two
    /// boundary knots repeated `degree + 1` times.
    pub fn knots(&self) -> Vec<f64> {
        let m = self.n_interior_knots + 1;
        let h = (self.x_max - self.x_min) / m as f64;
        let mut t = Vec::with_capacity(m + 1 + 2 * self.degree);
        t.extend(std::iter::repeat_n(self.x_min, self.degree));
        for j in 0..=m {
            t.push(if j == m { self.x_max } else { self.x_min + j as f64 * h });
        }
        t.extend(std::iter::repeat_n(self.x_max, self.degree));
        t
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x >= self.x_min && x <= self.x_max) {
            return Err(Error::Domain(format!(
                "x = {x} outside basis domain [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    /// Basis values at one point.
    pub fn row(&self, x: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let knots = self.knots();
        Ok(basis_values(&knots, self.degree, x))
    }

    /// First derivatives of the basis functions at one point.
    pub fn derivative_row(&self, x: f64) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let knots = self.knots();
        let p = self.degree;
        let k = self.n_basis();
        if p == 0 {
            return Ok(vec![0.0; k]);
        }
        let lower = basis_values(&knots, p - 1, x);
        let mut out = vec![0.0; k];
        for (i, o) in out.iter_mut().enumerate() {
            let left = knots[i + p] - knots[i];
            let right = knots[i + p + 1] - knots[i + 1];
            let mut d = 0.0;
            if left > 0.0 {
                d += p as f64 / left * lower[i];
            }
            if right > 0.0 {
                d -= p as f64 / right * lower[i + 1];
            }
            *o = d;
        }
        Ok(out)
    }
}

/// All `len(knots) - degree - 1` basis functions of the given degree at
/// `x`, by raising degree from the piecewise-constant level. The last
/// non-empty knot interval is closed on the right.
fn basis_values(knots: &[f64], degree: usize, x: f64) -> Vec<f64> {
    let m = knots.len();
    let last = knots[m - 1];
    let mut n: Vec<f64> = (0..m - 1)
        .map(|i| {
            let (a, b) = (knots[i], knots[i + 1]);
            if a < b && ((x >= a && x < b) || (x == last && b == last)) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for p in 1..=degree {
        let next: Vec<f64> = (0..m - 1 - p)
            .map(|i| {
                let mut v = 0.0;
                let d1 = knots[i + p] - knots[i];
                if d1 > 0.0 {
                    v += (x - knots[i]) / d1 * n[i];
                }
                let d2 = knots[i + p + 1] - knots[i + 1];
                if d2 > 0.0 {
                    v += (knots[i + p + 1] - x) / d2 * n[i + 1];
                }
                v
            })
            .collect();
        n = next;
    }
    n
}

/// Design matrix (n x K) of the basis at every `x`. Points outside the
/// domain are rejected.
pub fn bspline_basis(x: &[f64], spec: &SplineBasisSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let knots = spec.knots();
    let k = spec.n_basis();
    let mut b = DMatrix::zeros(x.len(), k);
    for (i, &xi) in x.iter().enumerate() {
        spec.check_x(xi)?;
        for (j, v) in basis_values(&knots, spec.degree, xi).into_iter().enumerate() {
            b[(i, j)] = v;
        }
    }
    Ok(b)
}

/// `D^T D` for the `order`-th difference operator on `k` coefficients.
pub fn difference_penalty(order: usize, k: usize) -> Result<DMatrix<f64>> {
    if order < 1 || order >= k {
        return Err(Error::Dimension(format!(
            "difference order {order} needs 1 <= order < K = {k}"
        )));
    }
    let mut d = DMatrix::<f64>::identity(k, k);
    for _ in 0..order {
        let rows = d.nrows() - 1;
        d = DMatrix::from_fn(rows, k, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    Ok(d.transpose() * d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
}

/// Weighted cross products `B^T W B` and `B^T W y`, reusable across
/// smoothing parameters.
#[derive(Debug, Clone)]
pub struct PenalizedSystem {
    pub btwb: DMatrix<f64>,
    pub btwy: DVector<f64>,
    pub penalty: DMatrix<f64>,
}

impl PenalizedSystem {
    pub fn new(b: &DMatrix<f64>, y: &[f64], w: &[f64], penalty: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = b.shape();
        if y.len() != n || w.len() != n {
            return Err(Error::Dimension(format!(
                "basis has {n} rows but y has {} and w has {}",
                y.len(),
                w.len()
            )));
        }
        if penalty.shape() != (k, k) {
            return Err(Error::Dimension(format!(
                "penalty is {:?}, expected {k}x{k}",
                penalty.shape()
            )));
        }
        if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        let mut btwb = DMatrix::zeros(k, k);
        let mut btwy = DVector::zeros(k);
        for i in 0..n {
            let row = b.row(i);
            let wi = w[i];
            for a in 0..k {
                let ba = row[a];
                if ba == 0.0 {
                    continue;
                }
                btwy[a] += wi * ba * y[i];
                for c in a..k {
                    btwb[(a, c)] += wi * ba * row[c];
                }
            }
        }
        for a in 0..k {
            for c in 0..a {
                btwb[(a, c)] = btwb[(c, a)];
            }
        }
        Ok(PenalizedSystem {
            btwb,
            btwy,
            penalty: penalty.clone(),
        })
    }

    fn factor(&self, lambda: f64) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        let a = &self.btwb + &self.penalty * lambda;
        if let Some(c) = Cholesky::new(a.clone()) {
            return Ok(c);
        }
        let k = a.nrows();
        let ridge = 1e-10 * a.trace().max(f64::MIN_POSITIVE);
        let perturbed = a + DMatrix::<f64>::identity(k, k) * ridge;
        Cholesky::new(perturbed)
            .ok_or_else(|| Error::Singular(format!("penalized system singular at lambda={lambda}")))
    }

    pub fn edf(&self, lambda: f64) -> Result<f64> {
        let chol = self.factor(lambda)?;
        Ok(chol.solve(&self.btwb).trace())
    }

    pub fn solve(&self, lambda: f64) -> Result<SmoothFit> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
        }
        let chol = self.factor(lambda)?;
        let a = chol.solve(&self.btwy);
        let edf = chol.solve(&self.btwb).trace();
        Ok(SmoothFit {
            coefficients: a.iter().cloned().collect(),
            lambda,
            edf,
        })
    }

    /// Smoothing parameter whose edf is within 0.01 of `target_edf`,
    /// by bisection on log(lambda).
    pub fn lambda_for_edf(&self, target_edf: f64, null_dim: usize) -> Result<f64> {
        let k = self.btwb.nrows() as f64;
        if !(target_edf > null_dim as f64 && target_edf <= k) {
            return Err(Error::Unattainable(format!(
                "target edf {target_edf} outside ({null_dim}, {k}]"
            )));
        }
        if (target_edf - k).abs() < 1e-12 {
            return Ok(0.0);
        }
        let scale = self.btwb.trace() / self.penalty.trace().max(f64::MIN_POSITIVE);
        let (mut lo, mut hi) = ((scale * 1e-10).ln(), (scale * 1e12).ln());
        let edf_lo = self.edf(lo.exp())?;
        let edf_hi = self.edf(hi.exp())?;
        if target_edf > edf_lo + 0.01 || target_edf < edf_hi - 0.01 {
            return Err(Error::Unattainable(format!(
                "target edf {target_edf} outside attainable [{edf_hi:.3}, {edf_lo:.3}]"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let e = self.edf(mid.exp())?;
            if (e - target_edf).abs() < 0.01 * 0.5 {
                return Ok(mid.exp());
            }
            if e > target_edf {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        Ok(mid.exp())
    }
}

/// Solves `(B^T W B + lambda P) a = B^T W y`.
pub fn fit_penalized_wls(
    b: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    lambda: f64,
    penalty: &DMatrix<f64>,
) -> Result<SmoothFit> {
    PenalizedSystem::new(b, y, w, penalty)?.solve(lambda)
}

/// Smoothing parameter attaining `target_edf` (within 0.01).
pub fn lambda_for_edf(
    b: &DMatrix<f64>,
    w: &[f64],
    penalty: &DMatrix<f64>,
    penalty_order: usize,
    target_edf: f64,
) -> Result<f64> {
    let y = vec![0.0; b.nrows()];
    PenalizedSystem::new(b, &y, w, penalty)?.lambda_for_edf(target_edf, penalty_order)
}
