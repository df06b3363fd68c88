//! Rate exponents: the step-size sum exponent `omega(nu, theta)`, the online
//! decay exponents `theta` and the four convergence rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which closed-form branch produced a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `omega = 1 - 2 theta - nu + nu theta` (`nu <= 1`, `theta <= 1/2`).
    OmegaMixed,
    /// `omega = -theta` (`nu >= 1`, `theta <= nu / (nu + 1)`).
    OmegaStep,
    /// `omega = -nu (1 - theta)` (`theta >= 1/2`, `theta >= nu / (nu + 1)`).
    OmegaSum,
    /// Regularity-limited rate, `2r` is the active term.
    Regularity,
    /// Saturated rate, the capacity term is active.
    Saturated,
    /// Finite-horizon rate, which does not saturate.
    FiniteHorizon,
}

/// A convergence rate `C (t+1)^exponent [log(t+1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub exponent: f64,
    pub log_factor: bool,
    pub constant: Option<f64>,
    pub regime: Regime,
}

impl RateSpec {
    fn new(exponent: f64, log_factor: bool, regime: Regime) -> Self {
        Self {
            exponent,
            log_factor,
            constant: None,
            regime,
        }
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant = Some(c);
        self
    }

    /// `n^exponent`, times `log n` when the rate carries a log factor,
    /// times the constant when one is attached.
    pub fn evaluate(&self, n: f64) -> f64 {
        let base = n.powf(self.exponent) * if self.log_factor { n.ln() } else { 1.0 };
        base * self.constant.unwrap_or(1.0)
    }
}

/// First branch of `omega`.
pub fn omega_mixed(nu: f64, theta: f64) -> f64 {
    1.0 - 2.0 * theta - nu + nu * theta
}

/// Second branch of `omega`.
pub fn omega_step(_nu: f64, theta: f64) -> f64 {
    -theta
}

/// Third branch of `omega`.
pub fn omega_sum(nu: f64, theta: f64) -> f64 {
    -nu * (1.0 - theta)
}

/// Whether `(nu, theta)` lies on the logarithmic set: `theta = 1/2` with
/// `nu <= 1`, or `nu = 1` with `theta <= 1/2`.
pub fn in_log_set(nu: f64, theta: f64) -> bool {
    (theta == 0.5 && nu <= 1.0) || (nu == 1.0 && theta <= 0.5)
}

/// Exponent of `sum_k eta_k^2 / (1 + (sum_{j>k} eta_j)^nu)` for
/// `eta_k = eta_0 k^{-theta}`.
///
/// The three branches overlap on their boundaries, where they agree; ties
/// resolve to the first listed branch.
///
/// ```
/// use sgdlab::theory::omega;
/// let w = omega(1.0, 0.5).unwrap();
/// assert_eq!(w.exponent, -0.5);
/// assert!(w.log_factor);
/// ```
pub fn omega(nu: f64, theta: f64) -> Result<RateSpec> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain("nu", nu, "> 0"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "in (0, 1)"));
    }
    let log = in_log_set(nu, theta);
    let spec = if nu <= 1.0 && theta <= 0.5 {
        RateSpec::new(omega_mixed(nu, theta), log, Regime::OmegaMixed)
    } else if nu >= 1.0 && theta <= nu / (nu + 1.0) {
        RateSpec::new(omega_step(nu, theta), log, Regime::OmegaStep)
    } else {
        RateSpec::new(omega_sum(nu, theta), log, Regime::OmegaSum)
    };
    Ok(spec)
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("r", r, "> 0"));
    }
    Ok(())
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("s", s, "in (0, 1]"));
    }
    Ok(())
}

/// Online decay exponent for the prediction problem:
/// `theta = min(2r, 2-s) / (1 + min(2r, 2-s))`.
pub fn theta_for_prediction(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    check_s(s)?;
    let active = (2.0 * r).min(2.0 - s);
    Ok(active / (1.0 + active))
}

/// Online decay exponent for the estimation problem:
/// `(2r+s)/(2r+s+1)` when `2r <= 1-s`, `1/2` otherwise. Not defined for `s = 1`.
pub fn theta_for_estimation(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    check_s(s)?;
    if s == 1.0 {
        return Err(Error::Unsupported(
            "online estimation rates need a capacity exponent s < 1".into(),
        ));
    }
    if 2.0 * r <= 1.0 - s {
        Ok((2.0 * r + s) / (2.0 * r + s + 1.0))
    } else {
        Ok(0.5)
    }
}

/// Step-size exponent `e` of the finite-horizon prediction schedule
/// `eta = eta_0 T^{-e}`, `e = 2r/(2r+1)`.
pub fn horizon_exponent_prediction(r: f64) -> Result<f64> {
    check_r(r)?;
    Ok(2.0 * r / (2.0 * r + 1.0))
}

/// Step-size exponent of the finite-horizon estimation schedule,
/// `(s+2r)/(1+s+2r)`.
pub fn horizon_exponent_estimation(r: f64, s: f64) -> Result<f64> {
    check_r(r)?;
    check_s(s)?;
    Ok((s + 2.0 * r) / (1.0 + s + 2.0 * r))
}

/// Online prediction rate `(t+1)^{-theta}`, with a log factor when `s = 1`.
pub fn online_prediction_rate(r: f64, s: f64) -> Result<RateSpec> {
    let theta = theta_for_prediction(r, s)?;
    let regime = if 2.0 * r <= 2.0 - s {
        Regime::Regularity
    } else {
        Regime::Saturated
    };
    Ok(RateSpec::new(-theta, s == 1.0, regime))
}

/// Finite-horizon prediction rate `T^{-2r/(2r+1)}`, with `log(T+1)` when `s = 1`.
pub fn horizon_prediction_rate(r: f64, s: f64) -> Result<RateSpec> {
    check_s(s)?;
    let e = horizon_exponent_prediction(r)?;
    Ok(RateSpec::new(-e, s == 1.0, Regime::FiniteHorizon))
}

/// Online estimation rate: `(t+1)^{-2r/(1+s+2r)}` when `2r < 1-s`, else
/// `(t+1)^{-(1-s)/2} log(t+1)`.
pub fn online_estimation_rate(r: f64, s: f64) -> Result<RateSpec> {
    theta_for_estimation(r, s)?;
    if 2.0 * r < 1.0 - s {
        Ok(RateSpec::new(-2.0 * r / (1.0 + s + 2.0 * r), false, Regime::Regularity))
    } else {
        Ok(RateSpec::new(-(1.0 - s) / 2.0, true, Regime::Saturated))
    }
}

/// Finite-horizon estimation rate `T^{-2r/(1+s+2r)}`.
pub fn horizon_estimation_rate(r: f64, s: f64) -> Result<RateSpec> {
    check_r(r)?;
    check_s(s)?;
    Ok(RateSpec::new(-2.0 * r / (1.0 + s + 2.0 * r), false, Regime::FiniteHorizon))
}
