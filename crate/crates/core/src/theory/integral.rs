//! The auxiliary integral
//! `I(b) = int_1^b u^{-2 theta} / (1 + (b^{1-theta} - u^{1-theta})^nu) du`
//! and the case-wise constant `C_0` in `I(b) <= C_0 b^omega [log b]`.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, QuadratureTolerance};
use crate::theory::rates::{in_log_set, omega};

/// The five parameter cases, in the order they partition `(0, inf) x (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegralCase {
    /// `theta >= nu/(nu+1)` and `theta > 1/2`.
    SumDominated,
    /// `nu > 1` and `theta < nu/(nu+1)`.
    StepDominated,
    /// `theta < 1/2` and `nu < 1`.
    Mixed,
    /// `theta = 1/2` and `nu <= 1`.
    HalfStep,
    /// `nu = 1` and `theta < 1/2`.
    UnitPower,
}

fn check(nu: f64, theta: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain("nu", nu, "> 0"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain("theta", theta, "in (0, 1)"));
    }
    Ok(())
}

/// Which case `(nu, theta)` falls into.
pub fn integral_case(nu: f64, theta: f64) -> Result<IntegralCase> {
    check(nu, theta)?;
    let seam = nu / (nu + 1.0);
    let case = if theta >= seam && theta > 0.5 {
        IntegralCase::SumDominated
    } else if nu > 1.0 && theta < seam {
        IntegralCase::StepDominated
    } else if theta < 0.5 && nu < 1.0 {
        IntegralCase::Mixed
    } else if theta == 0.5 && nu <= 1.0 {
        IntegralCase::HalfStep
    } else {
        debug_assert!(nu == 1.0 && theta < 0.5);
        IntegralCase::UnitPower
    };
    Ok(case)
}

/// The constant `C_0(nu, theta)` of the matching case.
///
/// ```
/// let c = sgdlab::theory::c0_ol(0.5, 0.25).unwrap();
/// assert!((c - 5.392354359660228).abs() < 1e-12);
/// ```
pub fn c0_ol(nu: f64, theta: f64) -> Result<f64> {
    let case = integral_case(nu, theta)?;
    let one_minus = 1.0 - theta;
    // Lower bound of u^{1-theta} growth on [1, b/2], raised to -nu.
    let head = (1.0 - 2f64.powf(theta - 1.0)).powf(-nu);
    let two_theta = 2f64.powf(theta);
    let unit_tail = two_theta / one_minus * (1.0 / LN_2 + one_minus);
    let value = match case {
        IntegralCase::SumDominated => {
            let tail = if nu == 1.0 {
                two_theta / (one_minus * E * (2.0 * theta - 1.0)) * (1.0 / LN_2 + one_minus)
            } else {
                two_theta * (nu + 1.0) / (one_minus * (1.0 - nu).abs())
            };
            head / (2.0 * theta - 1.0) + tail
        }
        IntegralCase::StepDominated => {
            let first = two_theta * nu / (one_minus * (nu - 1.0));
            let second = if theta < 0.5 {
                2f64.powf(2.0 * theta - 1.0) / (1.0 - 2.0 * theta)
            } else if theta == 0.5 {
                2.0 / (E * (nu - 1.0))
            } else {
                1.0 / (2.0 * theta - 1.0)
            };
            first + head * second
        }
        IntegralCase::Mixed => {
            2f64.powf(2.0 * theta - 1.0) * head / (1.0 - 2.0 * theta)
                + two_theta / (one_minus * (1.0 - nu))
        }
        IntegralCase::HalfStep => {
            let tail = if nu == 1.0 {
                unit_tail
            } else {
                two_theta / (one_minus * (1.0 - nu) * LN_2)
            };
            head + tail
        }
        IntegralCase::UnitPower => {
            unit_tail + 2f64.powf(2.0 * theta - 1.0) * head / ((1.0 - 2.0 * theta) * LN_2)
        }
    };
    Ok(value)
}

/// Right-hand side `C_0 b^omega [log b]`.
pub fn lemma_a1_bound(b: f64, nu: f64, theta: f64) -> Result<f64> {
    let w = omega(nu, theta)?;
    let c0 = c0_ol(nu, theta)?;
    let log = if in_log_set(nu, theta) { b.ln() } else { 1.0 };
    Ok(c0 * b.powf(w.exponent) * log)
}

/// The integrand itself, for reference quadratures.
pub fn lemma_a1_integrand(u: f64, b: f64, nu: f64, theta: f64) -> f64 {
    let gap = (b.powf(1.0 - theta) - u.powf(1.0 - theta)).max(0.0);
    u.powf(-2.0 * theta) / (1.0 + gap.powf(nu))
}

/// `I(b)` by adaptive quadrature.
///
/// `[1, b/2]` is integrated directly. On `[b/2, b]` the substitution
/// `xi = b^{1-theta} - u^{1-theta}` moves the `xi^nu` kink to a fixed endpoint.
pub fn lemma_a1_integral(b: f64, nu: f64, theta: f64, tol: QuadratureTolerance) -> Result<f64> {
    check(nu, theta)?;
    if !(b >= 2.0 && b.is_finite()) {
        return Err(Error::domain("b", b, ">= 2"));
    }
    let p = 1.0 - theta;
    let bp = b.powf(p);
    let near = integrate(|u| lemma_a1_integrand(u, b, nu, theta), 1.0, 0.5 * b, tol)?;
    let xi_max = bp - (0.5 * b).powf(p);
    let far = integrate(
        |xi: f64| {
            let u = (bp - xi).powf(1.0 / p);
            u.powf(-theta) / (p * (1.0 + xi.powf(nu)))
        },
        0.0,
        xi_max,
        tol,
    )?;
    Ok(near.value + far.value)
}
