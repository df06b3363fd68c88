//! Deterministic property suites (no sampling) with one verdict per check.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_slope, ProcessSpec, SlopeTarget};
use crate::numeric::QuadratureTolerance;
use crate::oracle::{decomposition_check, moment_recursion_step, spectral_polynomial_bound_check, MomentState};
use crate::sgd::Schedule;
use crate::spectral::{effective_dimension, trace_power, EigenDecay, SpectralModel};
use crate::theory::{
    check_stepsize_sum_bound, critical_integral, lemma_a1_bound, lemma_a1_integral, log_poly, log_poly_max,
    stepsize_sum_lower_bound, trace_identity_check,
};

/// Which suites to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Selector {
    Lemma6,
    LemmaA1,
    Theorem5,
    Oracle,
    All,
}

impl FromStr for Selector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma6" => Ok(Selector::Lemma6),
            "lemmaA1" | "lemmaa1" => Ok(Selector::LemmaA1),
            "theorem5" => Ok(Selector::Theorem5),
            "oracle" => Ok(Selector::Oracle),
            "all" => Ok(Selector::All),
            other => Err(Error::Validation(format!(
                "unknown selector {other:?}; expected lemma6, lemmaA1, theorem5, oracle or all"
            ))),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selector::Lemma6 => "lemma6",
            Selector::LemmaA1 => "lemmaA1",
            Selector::Theorem5 => "theorem5",
            Selector::Oracle => "oracle",
            Selector::All => "all",
        })
    }
}

/// One verdict. A check passes when `measured <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub selector: Selector,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Suite {
    name: &'static str,
    checks: Vec<Check>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self { name, checks: Vec::new() }
    }

    fn le(&mut self, name: String, measured: f64, threshold: f64) {
        self.checks.push(Check {
            suite: self.name.into(),
            name,
            passed: measured <= threshold,
            measured,
            threshold,
            detail: None,
        });
    }

    /// Record `result`, turning an error into a failed check.
    fn try_le(&mut self, name: String, result: Result<(f64, f64)>) {
        match result {
            Ok((m, t)) => self.le(name, m, t),
            Err(e) => self.checks.push(Check {
                suite: self.name.into(),
                name,
                passed: false,
                measured: f64::NAN,
                threshold: f64::NAN,
                detail: Some(e.to_string()),
            }),
        }
    }
}

pub const LEMMA6_NU: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const LEMMA6_THETA: [f64; 4] = [0.25, 0.5, 0.6, 0.75];
pub const LEMMA6_ETA0: [f64; 2] = [0.1, 1.0];
pub const LEMMA6_T_MAX: u64 = 10_000;

/// Step-size sum bound and the partial-sum lower bound over the grid.
pub fn lemma6_checks() -> Vec<Check> {
    let mut suite = Suite::new("lemma6");
    for nu in LEMMA6_NU {
        for theta in LEMMA6_THETA {
            for eta0 in LEMMA6_ETA0 {
                let label = format!("nu={nu} theta={theta} eta0={eta0}");
                let res = check_stepsize_sum_bound(LEMMA6_T_MAX, eta0, theta, nu);
                suite.try_le(
                    format!("sum bound, {label}, t<={LEMMA6_T_MAX}: violations"),
                    res.map(|c| (c.violations as f64, 0.0)),
                );
                let worst = (0..=13)
                    .map(|k| (1u64 << k).min(LEMMA6_T_MAX))
                    .chain([LEMMA6_T_MAX])
                    .map(|t| stepsize_sum_lower_bound(t, eta0, theta, nu).map(|p| p.exact / p.bound))
                    .try_fold(0f64, |acc, r| r.map(|v| acc.max(v)));
                suite.try_le(format!("partial sum power, {label}: worst ratio"), worst.map(|w| (w, 1.0)));
            }
        }
    }
    suite.checks
}

/// One representative `(nu, theta)` per appendix case plus the seam point
/// `theta = 1/2, nu = 1`.
pub const LEMMA_A1_POINTS: [(f64, f64); 6] = [(1.0, 0.75), (2.0, 0.25), (0.5, 0.25), (0.5, 0.5), (1.0, 0.5), (1.0, 0.25)];

/// Integral against its bound for `b = 2, 4, ..., 2^12`.
pub fn lemma_a1_checks() -> Vec<Check> {
    let mut suite = Suite::new("lemmaA1");
    let tol = QuadratureTolerance::default();
    for (nu, theta) in LEMMA_A1_POINTS {
        let worst = (1..=12)
            .map(|k| {
                let b = 2f64.powi(k);
                Ok(lemma_a1_integral(b, nu, theta, tol)? / lemma_a1_bound(b, nu, theta)?)
            })
            .try_fold(0f64, |acc, r: Result<f64>| r.map(|v| acc.max(v)));
        suite.try_le(format!("nu={nu} theta={theta}, b<=2^12: worst integral/bound"), worst.map(|w| (w, 1.0)));
    }
    suite.checks
}

pub const THEOREM5_S: [f64; 3] = [0.25, 0.5, 0.75];

pub fn theorem5_eigen_sets() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("[1]", vec![1.0]),
        ("[2]", vec![2.0]),
        ("i^-4, i<=100", (1..=100).map(|i| (i as f64).powi(-4)).collect()),
    ]
}

/// Trace identity, its two consequences and the log-polynomial maximum.
pub fn theorem5_checks() -> Vec<Check> {
    let mut suite = Suite::new("theorem5");
    let tol = QuadratureTolerance::default();
    for (label, eigs) in theorem5_eigen_sets() {
        for s in THEOREM5_S {
            suite.try_le(
                format!("trace identity, eigs={label}, s={s}: relative error"),
                trace_identity_check(&eigs, s, tol).map(|id| (id.rel_err, 1e-6)),
            );
        }
    }
    let lambdas: Vec<f64> = (-12..=4).map(|k| 2f64.powi(k)).collect();
    for s in THEOREM5_S {
        let eigs: Vec<f64> = (1..=2000).map(|i| (i as f64).powf(-1.0 / s)).collect();
        let ceiling = |limit: f64| -> Result<(f64, f64)> {
            let worst = lambdas.iter().try_fold(0f64, |acc, &l| {
                effective_dimension(&eigs, l).map(|n| acc.max(l.powf(s) * n))
            })?;
            Ok((worst, limit))
        };
        suite.try_le(
            format!("lambda^s N(lambda) <= pi Tr(L^s)/sin(pi s), s={s}"),
            trace_power(&eigs, s).and_then(|tr| ceiling(PI * tr / (PI * s).sin())),
        );
        suite.try_le(
            format!("lambda^s N(lambda) <= int du/(1+u^(1/s)), eigs=i^(-1/s), s={s}"),
            critical_integral(s, tol).and_then(ceiling),
        );
        suite.try_le(
            format!("critical integral = pi s/sin(pi s), s={s}: relative error"),
            critical_integral(s, tol).map(|v| {
                let exact = PI * s / (PI * s).sin();
                ((v - exact).abs() / exact, 1e-10)
            }),
        );
    }
    for a in [0.1, 0.5, 1.0, 2.0] {
        suite.try_le(
            format!("max u^-a log u = 1/(ea) at u=e^(1/a), a={a}: relative error"),
            log_poly_max(a).map(|(u, v)| ((log_poly(u, a) - v).abs() / v, 1e-12)),
        );
    }
    suite.checks
}

fn power_model(m: usize, exponent: f64) -> Result<SpectralModel> {
    let d = EigenDecay::power(exponent, 1.0, m);
    SpectralModel::new(&d, &d)
}

/// Schedules used by the decomposition check.
pub fn decomposition_schedules(horizon: u64) -> Result<Vec<(&'static str, Schedule)>> {
    Ok(vec![
        ("online eta0=0.5 theta=0.5", Schedule::online(0.5, 0.5)?),
        ("online eta0=1 theta=0.25", Schedule::online(1.0, 0.25)?),
        ("finite horizon eta0=0.9 exponent=0.5", Schedule::finite_horizon(0.9, horizon, 0.5)?),
    ])
}

/// Exact identities of the moment recursion and the spectral polynomial bound.
pub fn oracle_checks() -> Vec<Check> {
    let mut suite = Suite::new("oracle");
    let spec = ProcessSpec::gaussian(0.5, 0);

    let decomp = || -> Result<Vec<(String, f64)>> {
        let model = power_model(5, 2.0)?;
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None)?;
        decomposition_schedules(50)?
            .into_iter()
            .map(|(name, sched)| {
                decomposition_check(&model, &slope, &spec, &sched, 50).map(|d| (name.to_string(), d.relative_gap()))
            })
            .collect()
    };
    match decomp() {
        Ok(gaps) => {
            for (name, gap) in gaps {
                suite.le(format!("bias + variance = total, m=5 T=50, {name}: relative gap"), gap, 1e-10);
            }
        }
        Err(e) => suite.try_le("decomposition".into(), Err(e)),
    }

    // PSD preservation and the mean recursion along one trajectory.
    let walk = || -> Result<(f64, f64, f64)> {
        let model = power_model(10, 2.0)?;
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None)?;
        let sched = Schedule::online(0.5, 0.5)?;
        let mu = model.composite_coords();
        let cov = model.covariance_eigs();
        let mut state = MomentState::initial(&slope);
        let mut prod = vec![1.0; model.dim()];
        let (mut psd, mut mean_err, mut pred_err) = (0f64, 0f64, 0f64);
        for t in 1..=200 {
            let eta = sched.step(t);
            state = moment_recursion_step(&state, eta, &model, spec.sigma)?;
            let trace: f64 = state.diagonal().sum();
            psd = psd.max(-state.min_eigenvalue() / trace);
            for i in 0..model.dim() {
                prod[i] *= 1.0 - eta * mu[i];
                let expect = -prod[i] * slope.coeffs[i];
                let scale = slope.coeffs[i].abs().max(f64::MIN_POSITIVE);
                mean_err = mean_err.max((state.mean_dev[i] - expect).abs() / scale);
            }
            let direct: f64 = state.diagonal().zip(cov).map(|(d, c)| d * c).sum();
            let p = state.prediction_error(&model);
            pred_err = pred_err.max((p - direct).abs() / p);
        }
        Ok((psd, mean_err, pred_err))
    };
    match walk() {
        Ok((psd, mean_err, pred_err)) => {
            suite.le("second moment PSD, m=10 T=200: max(-min eig / trace)".into(), psd, 1e-10);
            suite.le("mean equals -prod(I - eta L) beta*, m=10 T=200: relative error".into(), mean_err, 1e-12);
            suite.le("prediction error equals tr(L_C M), m=10 T=200: relative error".into(), pred_err, 1e-12);
        }
        Err(e) => suite.try_le("moment trajectory".into(), Err(e)),
    }

    // Scalar case: v <- v (1 - 2 eta + 3 eta^2).
    let scalar = || -> Result<(f64, f64)> {
        let model = SpectralModel::from_coordinates(vec![1.0], vec![1.0])?;
        let slope = crate::model::SlopeCoefficients::explicit(&model, vec![1.0])?;
        let spec = ProcessSpec::gaussian(0.0, 0);
        let mut state = MomentState::initial(&slope);
        let mut v = 1.0;
        let mut worst = 0f64;
        for eta in [0.5, 0.25, 0.125] {
            state = moment_recursion_step(&state, eta, &model, spec.sigma)?;
            v *= 1.0 - 2.0 * eta + 3.0 * eta * eta;
            worst = worst.max((state.entry(0, 0) - v).abs());
        }
        Ok((worst, 1e-15))
    };
    suite.try_le("scalar recursion v(1 - 2 eta + 3 eta^2), 3 steps: abs error".into(), scalar());

    // Spectral polynomial bound over a grid; measured is lhs / rhs.
    let a_sq: Vec<f64> = (1..=50).map(|i| (i as f64).powi(-2)).collect();
    let a_lin: Vec<f64> = (1..=50).map(|i| 1.0 / i as f64).collect();
    let decaying: Vec<f64> = (1..=100).map(|j| (j as f64).powf(-0.5)).collect();
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        for (label, eigs) in [("i^-2", &a_sq), ("i^-1", &a_lin)] {
            for len in [0usize, 1, 10, 100] {
                for (steps_label, etas) in [("eta=1", vec![1.0; len]), ("eta=j^-1/2", decaying[..len].to_vec())] {
                    suite.try_le(
                        format!("polynomial bound, A={label}, {steps_label}, {len} steps, alpha={alpha}: lhs/rhs"),
                        spectral_polynomial_bound_check(eigs, &etas, alpha).map(|b| (b.lhs / b.rhs, 1.0)),
                    );
                }
            }
        }
    }
    suite.checks
}

pub fn verify_suite(selector: Selector) -> VerifyReport {
    let mut checks = Vec::new();
    let all = selector == Selector::All;
    if all || selector == Selector::Lemma6 {
        checks.extend(lemma6_checks());
    }
    if all || selector == Selector::LemmaA1 {
        checks.extend(lemma_a1_checks());
    }
    if all || selector == Selector::Theorem5 {
        checks.extend(theorem5_checks());
    }
    if all || selector == Selector::Oracle {
        checks.extend(oracle_checks());
    }
    VerifyReport { selector, checks }
}
