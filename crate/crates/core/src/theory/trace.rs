//! The integral representation of `Tr(L^s)` through the effective dimension,
//! and the scalar integrals used alongside it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, integrate, QuadratureTolerance};
use crate::spectral::trace_power;

/// Both sides of `Tr(L^s) = sin(pi s)/pi int_0^inf lambda^{s-1} N(lambda) dlambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

fn check_open_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain("s", s, "in (0, 1)"));
    }
    Ok(())
}

/// Evaluate the identity by quadrature.
///
/// The half-line is split at the largest eigenvalue `l1`. On `[0, l1]` the
/// map `lambda = l1 w^{1/s}` removes the `lambda^{s-1}` singularity; on
/// `[l1, inf)` the map `lambda = l1 w^{-1/(1-s)}` turns the `lambda^{s-2}`
/// tail into a bounded integrand on `(0, 1]`.
///
/// ```
/// use sgdlab::numeric::QuadratureTolerance;
/// let id = sgdlab::theory::trace_identity_check(&[2.0], 0.5, QuadratureTolerance::default()).unwrap();
/// assert!((id.rhs - 2f64.sqrt()).abs() < 1e-8);
/// ```
pub fn trace_identity_check(eigs: &[f64], s: f64, tol: QuadratureTolerance) -> Result<TraceIdentity> {
    check_open_s(s)?;
    let lhs = trace_power(eigs, s)?;
    let l1 = eigs.iter().copied().fold(0.0, f64::max);
    let eff = |lambda: f64| compensated_sum(eigs.iter().map(|&a| a / (a + lambda)));
    let head = integrate(|w: f64| eff(l1 * w.powf(1.0 / s)), 0.0, 1.0, tol)?;
    let p = 1.0 / (1.0 - s);
    let tail = integrate(
        |w: f64| {
            let wp = w.powf(p);
            compensated_sum(eigs.iter().map(|&a| a / (a * wp + l1)))
        },
        0.0,
        1.0,
        tol,
    )?;
    let l1s = l1.powf(s);
    let rhs = (PI * s).sin() / PI * (l1s / s * head.value + l1s * p * tail.value);
    Ok(TraceIdentity {
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / lhs,
    })
}

/// `int_0^inf du / (1 + u^{1/s})`, which equals `pi s / sin(pi s)`.
///
/// The tail `[1, inf)` is mapped onto `(0, 1]` with `u = w^{-s/(1-s)}`.
pub fn critical_integral(s: f64, tol: QuadratureTolerance) -> Result<f64> {
    check_open_s(s)?;
    let inv = 1.0 / s;
    let head = integrate(|u: f64| 1.0 / (1.0 + u.powf(inv)), 0.0, 1.0, tol)?;
    let k = s / (1.0 - s);
    let q = 1.0 / (1.0 - s);
    let tail = integrate(|w: f64| 1.0 / (w.powf(q) + 1.0), 0.0, 1.0, tol)?;
    Ok(head.value + k * tail.value)
}

/// `u^{-a} log u`.
pub fn log_poly(u: f64, a: f64) -> f64 {
    u.powf(-a) * u.ln()
}

/// `max_{u >= 1} u^{-a} log u = 1/(e a)`, attained at `u = e^{1/a}`.
pub fn log_poly_max(a: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("a", a, "> 0"));
    }
    Ok(((1.0 / a).exp(), 1.0 / (std::f64::consts::E * a)))
}
