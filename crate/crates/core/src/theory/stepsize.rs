//! Sums over the online schedule `eta_k = eta_0 k^{-theta}`:
//! `S(t) = sum_{k<=t} eta_k^2 / (1 + (sum_{k<j<=t} eta_j)^nu)` and the
//! power of the partial step-size sum.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::integral::c0_ol;
use crate::theory::rates::{in_log_set, omega};

fn check_sum_args(t: u64, eta0: f64, theta: f64, nu: f64) -> Result<()> {
    if t == 0 {
        return Err(Error::Validation("step count t must be at least 1".into()));
    }
    if t > i64::MAX as u64 {
        return Err(Error::Validation(format!("step count {t} exceeds 2^63")));
    }
    if !(eta0 >= 0.0 && eta0.is_finite()) {
        return Err(Error::domain("eta0", eta0, ">= 0"));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::domain("theta", theta, "in [0, 1)"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::domain("nu", nu, "> 0"));
    }
    Ok(())
}

/// `eta_0 k^{-theta}` for `k = 1..=t`.
pub fn online_steps(t: usize, eta0: f64, theta: f64) -> Vec<f64> {
    (1..=t).map(|k| eta0 * (k as f64).powf(-theta)).collect()
}

// Monomorphised over the power so the inner loop has no branch on nu.
fn backward_sum<P: Fn(f64) -> f64>(steps: &[f64], pow: P) -> f64 {
    let mut suffix = 0.0;
    let mut acc = 0.0;
    for &eta in steps.iter().rev() {
        acc += eta * eta / (1.0 + pow(suffix));
        suffix += eta;
    }
    acc
}

fn dispatch(steps: &[f64], nu: f64) -> f64 {
    if nu == 1.0 {
        backward_sum(steps, |x| x)
    } else if nu == 2.0 {
        backward_sum(steps, |x| x * x)
    } else if nu == 0.5 {
        backward_sum(steps, f64::sqrt)
    } else if nu == 1.5 {
        backward_sum(steps, |x| x * x.sqrt())
    } else {
        backward_sum(steps, |x| x.powf(nu))
    }
}

/// `S(t)` in `O(t)` by accumulating the suffix sums from `k = t` down.
///
/// ```
/// use sgdlab::theory::stepsize_sum;
/// assert_eq!(stepsize_sum(1, 0.5, 0.5, 1.0).unwrap(), 0.25);
/// assert_eq!(stepsize_sum(2, 1.0, 0.0, 1.0).unwrap(), 1.5);
/// ```
pub fn stepsize_sum(t: u64, eta0: f64, theta: f64, nu: f64) -> Result<f64> {
    check_sum_args(t, eta0, theta, nu)?;
    let steps = online_steps(t as usize, eta0, theta);
    Ok(dispatch(&steps, nu))
}

/// `S(t)` for every `t = 1..=t_max`; entry `t - 1` holds `S(t)`.
///
/// Each entry is evaluated with its own backward pass so no suffix sum is
/// formed by cancellation.
pub fn stepsize_sums_upto(t_max: u64, eta0: f64, theta: f64, nu: f64) -> Result<Vec<f64>> {
    check_sum_args(t_max, eta0, theta, nu)?;
    let steps = online_steps(t_max as usize, eta0, theta);
    Ok((1..=steps.len()).map(|t| dispatch(&steps[..t], nu)).collect())
}

/// `C^OL = eta_0^2 4^theta / ln 2 + 9^theta eta_0^2 C_0 / min(1, (eta_0/(1-theta))^nu)`.
pub fn c_ol(eta0: f64, theta: f64, nu: f64) -> Result<f64> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::domain("eta0", eta0, "> 0"));
    }
    let c0 = c0_ol(nu, theta)?;
    let denom = f64::min(1.0, (eta0 / (1.0 - theta)).powf(nu));
    Ok(eta0 * eta0 * 4f64.powf(theta) / LN_2 + 9f64.powf(theta) * eta0 * eta0 * c0 / denom)
}

/// `C^OL (t+1)^omega`, times `log(t+1)` on the logarithmic set.
pub fn stepsize_sum_bound(t: u64, eta0: f64, theta: f64, nu: f64) -> Result<f64> {
    let c = c_ol(eta0, theta, nu)?;
    let w = omega(nu, theta)?;
    let n = t as f64 + 1.0;
    let log = if in_log_set(nu, theta) { n.ln() } else { 1.0 };
    Ok(c * n.powf(w.exponent) * log)
}

/// `(sum_{k<=t} eta_k)^{-nu}` next to its closed-form upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSumPower {
    pub exact: f64,
    pub bound: f64,
}

impl PartialSumPower {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound
    }
}

/// `(sum eta_k)^{-nu} <= (eta_0 (1 - 2^{theta-1}) / (1-theta))^{-nu} (t+1)^{-nu(1-theta)}`.
pub fn stepsize_sum_lower_bound(t: u64, eta0: f64, theta: f64, nu: f64) -> Result<PartialSumPower> {
    check_sum_args(t, eta0, theta, nu)?;
    if eta0 == 0.0 {
        return Err(Error::domain("eta0", eta0, "> 0"));
    }
    let total: f64 = online_steps(t as usize, eta0, theta).iter().sum();
    let scale = eta0 * (1.0 - 2f64.powf(theta - 1.0)) / (1.0 - theta);
    Ok(PartialSumPower {
        exact: total.powf(-nu),
        bound: scale.powf(-nu) * (t as f64 + 1.0).powf(-nu * (1.0 - theta)),
    })
}

/// Outcome of checking `S(t) <= C^OL (t+1)^omega [log(t+1)]` for all `t <= t_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSumCheck {
    pub nu: f64,
    pub theta: f64,
    pub eta0: f64,
    pub t_max: u64,
    pub violations: u64,
    /// Largest `S(t) / bound` seen.
    pub worst_ratio: f64,
}

pub fn check_stepsize_sum_bound(t_max: u64, eta0: f64, theta: f64, nu: f64) -> Result<StepSumCheck> {
    let sums = stepsize_sums_upto(t_max, eta0, theta, nu)?;
    let c = c_ol(eta0, theta, nu)?;
    let w = omega(nu, theta)?;
    let log = in_log_set(nu, theta);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (i, &s) in sums.iter().enumerate() {
        let n = i as f64 + 2.0;
        let bound = c * n.powf(w.exponent) * if log { n.ln() } else { 1.0 };
        if s > bound {
            violations += 1;
        }
        worst = worst.max(s / bound);
    }
    Ok(StepSumCheck {
        nu,
        theta,
        eta0,
        t_max,
        violations,
        worst_ratio: worst,
    })
}
