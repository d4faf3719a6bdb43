//! Seeded populations drawn from known BCCG truths.
//!
//! Each subject gets a sex, an age, a height from a growth curve, a
//! weight, an FVC and an FEV1/FVC ratio; FEV1 is their product. FVC and
//! the ratio are each drawn from a BCCG whose (mu, sigma, nu) vary with
//! age (and, for mu, with height and sex). The true parameters, z-scores
//! and lower-limit flags are kept beside the data for oracle checks.
//!
//! Random stream: one ChaCha8 generator seeded with `seed_from_u64(seed)`.
//! Per subject, in order: sex, age, height noise, weight noise, FVC,
//! ratio. Each FVC/ratio value consumes one uniform plus any re-draws.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Covariates, Observation, Response, Sex};
use crate::distributions::{normal_quantile, BccgParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    /// Monotone piecewise-cubic Hermite (Fritsch-Carlson slopes).
    Cubic,
}

/// A function of age given by control points; constant beyond the first
/// and last point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub interp: Interp,
}

impl Curve {
    pub fn constant(v: f64) -> Self {
        Curve {
            points: vec![(0.0, v)],
            interp: Interp::Linear,
        }
    }

    pub fn cubic(points: &[(f64, f64)]) -> Self {
        Curve {
            points: points.to_vec(),
            interp: Interp::Cubic,
        }
    }

    pub fn linear(points: &[(f64, f64)]) -> Self {
        Curve {
            points: points.to_vec(),
            interp: Interp::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Input("curve has no control points".into()));
        }
        if self.points.iter().any(|(a, v)| !a.is_finite() || !v.is_finite()) {
            return Err(Error::Input("curve control points must be finite".into()));
        }
        if self.points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Input("curve ages must be strictly increasing".into()));
        }
        Ok(())
    }

    fn slopes(&self) -> Vec<f64> {
        let p = &self.points;
        let n = p.len();
        let d: Vec<f64> = p.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        let mut m = vec![0.0; n];
        if n < 2 {
            return m;
        }
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] > 0.0 {
                let (h0, h1) = (p[i].0 - p[i - 1].0, p[i + 1].0 - p[i].0);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        m
    }

    pub fn eval(&self, age: f64) -> f64 {
        let p = &self.points;
        if age <= p[0].0 {
            return p[0].1;
        }
        if age >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let j = p.partition_point(|q| q.0 <= age) - 1;
        let (x0, y0) = p[j];
        let (x1, y1) = p[j + 1];
        let h = x1 - x0;
        let t = (age - x0) / h;
        match self.interp {
            Interp::Linear => y0 + t * (y1 - y0),
            Interp::Cubic => {
                let m = self.slopes();
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * m[j]
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * m[j + 1]
            }
        }
    }
}

/// Scale of a response truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// sigma as a function of age.
    Cv(Curve),
    /// Constant standard deviation (with nu = 1): sigma = sd / mu.
    Sd(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTruth {
    /// Median for a female of median height at each age.
    pub mu: Curve,
    pub scale: Scale,
    pub nu: Curve,
    /// mu scales with (height / median height at age) ^ exponent.
    pub height_exponent: f64,
    /// Multiplier on mu for males.
    pub male_factor: f64,
}

impl ResponseTruth {
    pub fn params(&self, age: f64, height_ratio: f64, sex: Sex) -> Result<BccgParams> {
        let sex_factor = match sex {
            Sex::F => 1.0,
            Sex::M => self.male_factor,
        };
        let mu = self.mu.eval(age) * height_ratio.powf(self.height_exponent) * sex_factor;
        let sigma = match &self.scale {
            Scale::Cv(c) => c.eval(age),
            Scale::Sd(sd) => sd / mu,
        };
        BccgParams::new(mu, sigma, self.nu.eval(age))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeDistribution {
    Uniform { lo: f64, hi: f64 },
    /// (weight, lo, hi) uniform components.
    Mixture(Vec<(f64, f64, f64)>),
}

impl AgeDistribution {
    fn range(&self) -> (f64, f64) {
        match self {
            AgeDistribution::Uniform { lo, hi } => (*lo, *hi),
            AgeDistribution::Mixture(c) => (
                c.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
                c.iter().map(|x| x.2).fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            AgeDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            AgeDistribution::Mixture(c) => {
                let total: f64 = c.iter().map(|x| x.0).sum();
                let mut u = rng.gen::<f64>() * total;
                let v: f64 = rng.gen();
                for &(w, lo, hi) in c {
                    if u < w {
                        return lo + (hi - lo) * v;
                    }
                    u -= w;
                }
                let &(_, lo, hi) = c.last().expect("non-empty mixture");
                lo + (hi - lo) * v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightModel {
    /// Median female height (cm) by age.
    pub curve: Curve,
    pub male_factor: f64,
    /// Log-scale noise sd.
    pub noise_cv: f64,
}

impl HeightModel {
    pub fn median(&self, age: f64, sex: Sex) -> f64 {
        self.curve.eval(age)
            * match sex {
                Sex::F => 1.0,
                Sex::M => self.male_factor,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthScenario {
    pub name: String,
    pub ages: AgeDistribution,
    pub height: HeightModel,
    /// Probability that a subject is male.
    pub male_fraction: f64,
    pub fvc: ResponseTruth,
    pub ratio: ResponseTruth,
    pub seed: u64,
}

impl TruthScenario {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.ages.range();
        if !(lo < hi && lo > 0.0) {
            return Err(Error::Input(format!("scenario {}: invalid age range", self.name)));
        }
        if !(0.0..=1.0).contains(&self.male_fraction) {
            return Err(Error::Input("male_fraction must be in [0, 1]".into()));
        }
        for c in [&self.height.curve, &self.fvc.mu, &self.fvc.nu, &self.ratio.mu, &self.ratio.nu] {
            c.validate()?;
        }
        for truth in [&self.fvc, &self.ratio] {
            if let Scale::Cv(c) = &truth.scale {
                c.validate()?;
            }
        }
        // invariants on a dense grid
        let steps = 400;
        for i in 0..=steps {
            let age = lo + (hi - lo) * i as f64 / steps as f64;
            if !(self.height.curve.eval(age) > 0.0) {
                return Err(Error::Input(format!("height not positive at age {age}")));
            }
            for sex in [Sex::F, Sex::M] {
                self.fvc.params(age, 1.0, sex)?;
                self.ratio.params(age, 1.0, sex)?;
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same scenario restricted to one sex.
    pub fn single_sex(mut self, sex: Sex) -> Self {
        self.male_fraction = match sex {
            Sex::F => 0.0,
            Sex::M => 1.0,
        };
        self
    }

    pub fn truth(&self, r: Response) -> Option<&ResponseTruth> {
        match r {
            Response::Fvc => Some(&self.fvc),
            Response::Ratio => Some(&self.ratio),
            Response::Fev1 => None,
        }
    }

    /// True parameters of a response for one subject (FVC and ratio only).
    pub fn true_params(&self, r: Response, sex: Sex, c: &Covariates) -> Option<Result<BccgParams>> {
        let truth = self.truth(r)?;
        let ratio = c.height / self.height.median(c.age, sex);
        Some(truth.params(c.age, ratio, sex))
    }
}

/// Ground truth kept alongside each generated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub id: String,
    pub fvc: BccgParams,
    pub ratio: BccgParams,
    pub fvc_z: f64,
    pub ratio_z: f64,
}

impl TruthRecord {
    pub fn z(&self, r: Response) -> Option<f64> {
        match r {
            Response::Fvc => Some(self.fvc_z),
            Response::Ratio => Some(self.ratio_z),
            Response::Fev1 => None,
        }
    }

    pub fn below_lln(&self, r: Response, level: f64) -> Option<bool> {
        let z = self.z(r)?;
        Some(z < normal_quantile(level).ok()?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub observations: Vec<Observation>,
    pub truth: Vec<TruthRecord>,
}

pub fn generate(scenario: &TruthScenario, n: usize) -> Result<SyntheticDataset> {
    if n == 0 {
        return Err(Error::Input("n must be at least 1".into()));
    }
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut observations = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let width = (n as f64).log10().floor() as usize + 1;
    for i in 0..n {
        let sex = if rng.gen::<f64>() < scenario.male_fraction {
            Sex::M
        } else {
            Sex::F
        };
        let age = scenario.ages.draw(&mut rng);
        let h_med = scenario.height.median(age, sex);
        let height = h_med * (scenario.height.noise_cv * std_normal(&mut rng)?).exp();
        let weight = 22.0 * (height / 100.0).powi(2) * (0.12 * std_normal(&mut rng)?).exp();
        let ratio_h = height / h_med;
        let fvc_p = scenario.fvc.params(age, ratio_h, sex)?;
        let ratio_p = scenario.ratio.params(age, ratio_h, sex)?;
        let fvc = fvc_p.sample_with(1, &mut rng)?.0[0];
        let ratio = ratio_p.sample_with(1, &mut rng)?.0[0];
        let id = format!("S{:0width$}", i + 1);
        observations.push(Observation {
            id: id.clone(),
            sex,
            covariates: Covariates {
                age,
                height,
                weight: Some(weight),
            },
            fev1: fvc * ratio,
            fvc,
        });
        truth.push(TruthRecord {
            id,
            fvc: fvc_p,
            ratio: ratio_p,
            fvc_z: fvc_p.zscore(fvc)?,
            ratio_z: ratio_p.zscore(ratio)?,
        });
    }
    Ok(SyntheticDataset { observations, truth })
}

fn std_normal<R: Rng>(rng: &mut R) -> Result<f64> {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return normal_quantile(u);
        }
    }
}

fn height_curve() -> Curve {
    Curve::cubic(&[
        (3.0, 96.0),
        (5.0, 109.0),
        (8.0, 127.0),
        (11.0, 143.0),
        (14.0, 155.0),
        (17.0, 161.0),
        (20.0, 163.5),
        (25.0, 164.0),
        (40.0, 164.0),
        (60.0, 162.0),
        (80.0, 158.0),
        (100.0, 155.0),
    ])
}

fn skewed_ratio_truth(nu: f64) -> ResponseTruth {
    ResponseTruth {
        mu: Curve::cubic(&[(3.0, 0.90), (20.0, 0.86), (40.0, 0.81), (60.0, 0.77), (80.0, 0.72), (100.0, 0.69)]),
        scale: Scale::Cv(Curve::cubic(&[(3.0, 0.06), (30.0, 0.065), (60.0, 0.08), (100.0, 0.10)])),
        nu: Curve::constant(nu),
        height_exponent: 0.0,
        male_factor: 0.98,
    }
}

/// Right-skewed FVC (nu = -0.5) with a scale that varies smoothly in
/// age; growth to a plateau near 20 then decline.
pub fn skew_lung() -> TruthScenario {
    TruthScenario {
        name: "skew-lung".into(),
        ages: AgeDistribution::Uniform { lo: 5.0, hi: 95.0 },
        height: HeightModel {
            curve: height_curve(),
            male_factor: 1.08,
            noise_cv: 0.04,
        },
        male_fraction: 0.5,
        fvc: ResponseTruth {
            mu: Curve::cubic(&[
                (3.0, 0.9),
                (5.0, 1.2),
                (8.0, 1.75),
                (12.0, 2.55),
                (16.0, 3.25),
                (20.0, 3.55),
                (25.0, 3.6),
                (35.0, 3.5),
                (50.0, 3.2),
                (65.0, 2.8),
                (80.0, 2.35),
                (100.0, 1.9),
            ]),
            scale: Scale::Cv(Curve::cubic(&[
                (3.0, 0.165),
                (5.0, 0.16),
                (12.0, 0.135),
                (20.0, 0.115),
                (40.0, 0.105),
                (60.0, 0.12),
                (80.0, 0.145),
                (100.0, 0.16),
            ])),
            nu: Curve::constant(-0.5),
            height_exponent: 2.0,
            male_factor: 1.25,
        },
        ratio: skewed_ratio_truth(3.0),
        seed: 20_250_101,
    }
}

/// Normal responses with constant standard deviation and a piecewise
/// linear median with one break: the world segmented regression assumes.
pub fn symmetric_homoscedastic() -> TruthScenario {
    TruthScenario {
        name: "symmetric-homoscedastic".into(),
        ages: AgeDistribution::Uniform { lo: 5.0, hi: 95.0 },
        height: HeightModel {
            curve: height_curve(),
            male_factor: 1.08,
            noise_cv: 0.04,
        },
        male_fraction: 0.5,
        fvc: ResponseTruth {
            mu: Curve::linear(&[(5.0, 1.6), (20.0, 3.7), (95.0, 2.5)]),
            scale: Scale::Sd(0.3),
            nu: Curve::constant(1.0),
            height_exponent: 0.0,
            male_factor: 1.0,
        },
        ratio: ResponseTruth {
            mu: Curve::linear(&[(5.0, 0.88), (95.0, 0.72)]),
            scale: Scale::Sd(0.05),
            nu: Curve::constant(1.0),
            height_exponent: 0.0,
            male_factor: 1.0,
        },
        seed: 20_250_102,
    }
}

/// Strongly left-skewed ratio with age-varying scale; FVC mildly skewed.
pub fn ratio_like() -> TruthScenario {
    let mut s = skew_lung();
    s.name = "ratio-like".into();
    s.ratio = skewed_ratio_truth(4.0);
    s.ratio.scale = Scale::Cv(Curve::cubic(&[(3.0, 0.055), (40.0, 0.065), (70.0, 0.09), (100.0, 0.11)]));
    s.fvc.nu = Curve::constant(0.5);
    s.fvc.scale = Scale::Cv(Curve::constant(0.12));
    s.seed = 20_250_103;
    s
}

pub fn builtin_scenarios() -> Vec<TruthScenario> {
    vec![skew_lung(), symmetric_homoscedastic(), ratio_like()]
}

pub fn scenario_by_name(name: &str) -> Result<TruthScenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Input(format!("unknown scenario {name:?}")))
}
