//! Exact first and second moments of the SGD error under Gaussian
//! coordinates, the bias/variance split of the prediction error, and the
//! spectral polynomial inequality behind it.
//!
//! With `delta_t = beta_t - beta*` the update reads
//! `delta_{t+1} = (I - eta D_K x x^T) delta_t + eta eps D_K x`, and Gaussian
//! fourth moments give the closed recursion
//! `M'_{ij} = M_{ij} (1 - eta mu_i - eta mu_j + 2 eta^2 mu_i mu_j)
//!          + [i = j] eta^2 lambda_{K,i}^2 lambda_{C,i} (tr(L_C M) + sigma^2)`.

use std::f64::consts::E;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProcessSpec, SlopeCoefficients};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::sgd::{Schedule, TrajectoryPoint};
use crate::spectral::SpectralModel;

/// Largest dimension the dense recursion accepts.
pub const MAX_ORACLE_DIM: usize = 100;
/// Largest horizon the dense recursion accepts.
pub const MAX_ORACLE_HORIZON: u64 = 10_000;

/// `E[beta_t - beta*]` and `E[(beta_t - beta*)(beta_t - beta*)^T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub mean_dev: Vec<f64>,
    /// Row-major `m x m`.
    pub second_moment: Vec<f64>,
}

impl MomentState {
    /// Moments of the initial iterate `beta_1 = 0`.
    pub fn initial(slope: &SlopeCoefficients) -> Self {
        let b = &slope.coeffs;
        let m = b.len();
        let mut second = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                second[i * m + j] = b[i] * b[j];
            }
        }
        Self {
            mean_dev: b.iter().map(|v| -v).collect(),
            second_moment: second,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_dev.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.second_moment[i * self.dim() + j]
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(|i| self.entry(i, i))
    }

    /// `E||L_C^{1/2}(beta - beta*)||^2 = tr(L_C M)`.
    pub fn prediction_error(&self, model: &SpectralModel) -> f64 {
        compensated_sum(self.diagonal().zip(model.covariance_eigs()).map(|(d, c)| c * d))
    }

    /// `E||beta - beta*||_K^2 = sum M_ii / lambda_{K,i}`.
    pub fn estimation_error(&self, model: &SpectralModel) -> f64 {
        compensated_sum(self.diagonal().zip(model.kernel_eigs()).map(|(d, k)| d / k))
    }

    /// Smallest eigenvalue of the second moment.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.dim();
        let mat = DMatrix::from_row_slice(m, m, &self.second_moment);
        SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Smallest eigenvalue is at least `-tol * trace`.
    pub fn is_psd(&self, tol: f64) -> bool {
        let trace: f64 = self.diagonal().sum();
        self.min_eigenvalue() >= -tol * trace
    }

    /// `M_ii >= mean_i^2` for every coordinate, up to `tol` relative.
    pub fn variances_nonnegative(&self, tol: f64) -> bool {
        self.diagonal()
            .zip(&self.mean_dev)
            .all(|(d, m)| d - m * m >= -tol * d.abs().max(m * m))
    }
}

fn check_supported(model: &SpectralModel, spec: &ProcessSpec) -> Result<()> {
    if !spec.is_unnormalized_gaussian() {
        return Err(Error::Unsupported(
            "the moment oracle needs unnormalized Gaussian coordinates".into(),
        ));
    }
    if model.dim() > MAX_ORACLE_DIM {
        return Err(Error::Validation(format!(
            "oracle dimension {} exceeds the limit {MAX_ORACLE_DIM}",
            model.dim()
        )));
    }
    Ok(())
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon > MAX_ORACLE_HORIZON {
        return Err(Error::Validation(format!(
            "oracle horizon {horizon} exceeds the limit {MAX_ORACLE_HORIZON}"
        )));
    }
    Ok(())
}

/// One exact step of the moment recursion with step size `eta`.
///
/// ```
/// use sgdlab::oracle::{moment_recursion_step, MomentState};
/// use sgdlab::spectral::SpectralModel;
/// let model = SpectralModel::from_coordinates(vec![1.0], vec![1.0]).unwrap();
/// let st = MomentState { mean_dev: vec![-1.0], second_moment: vec![1.0] };
/// let next = moment_recursion_step(&st, 0.5, &model, 0.0).unwrap();
/// assert_eq!(next.second_moment[0], 1.0 - 2.0 * 0.5 + 3.0 * 0.25);
/// ```
pub fn moment_recursion_step(state: &MomentState, eta: f64, model: &SpectralModel, sigma: f64) -> Result<MomentState> {
    let m = model.dim();
    if state.dim() != m || state.second_moment.len() != m * m {
        return Err(Error::Validation(format!(
            "moment state has dimension {}, model has {m}",
            state.dim()
        )));
    }
    let kernel = model.kernel_eigs();
    let cov = model.covariance_eigs();
    let a: Vec<f64> = kernel.iter().zip(cov).map(|(k, c)| eta * k * c).collect();
    let forcing = state.prediction_error(model) + sigma * sigma;
    let mut second = vec![0.0; m * m];
    for i in 0..m {
        let row = &state.second_moment[i * m..(i + 1) * m];
        let out = &mut second[i * m..(i + 1) * m];
        for j in 0..m {
            out[j] = row[j] * ((1.0 - a[i]) * (1.0 - a[j]) + a[i] * a[j]);
        }
        out[i] += eta * eta * kernel[i] * kernel[i] * cov[i] * forcing;
    }
    let mean_dev = state.mean_dev.iter().zip(&a).map(|(d, ai)| (1.0 - ai) * d).collect();
    let next = MomentState {
        mean_dev,
        second_moment: second,
    };
    if !next.prediction_error(model).is_finite() {
        return Err(Error::Numeric {
            step: 0,
            message: "oracle second moment overflowed".into(),
        });
    }
    Ok(next)
}

/// Expected errors at the recorded steps, computed without sampling.
pub fn oracle_trajectory(
    model: &SpectralModel,
    slope: &SlopeCoefficients,
    spec: &ProcessSpec,
    schedule: &Schedule,
    horizon: u64,
    record_at: &[u64],
) -> Result<Vec<TrajectoryPoint>> {
    check_supported(model, spec)?;
    check_horizon(horizon)?;
    schedule.validate_for(model.kappa_sq())?;
    let mut state = MomentState::initial(slope);
    let mut out = Vec::with_capacity(record_at.len());
    let mut push = |state: &MomentState, t: u64| {
        out.push(TrajectoryPoint {
            t,
            prediction: state.prediction_error(model),
            estimation: state.estimation_error(model),
        })
    };
    let mut next = record_at.iter().copied().peekable();
    if next.peek() == Some(&0) {
        push(&state, 0);
        next.next();
    }
    for t in 1..=horizon {
        let Some(&target) = next.peek() else { break };
        state = moment_recursion_step(&state, schedule.step(t), model, spec.sigma).map_err(|e| match e {
            Error::Numeric { message, .. } => Error::Numeric { step: t, message },
            other => other,
        })?;
        if t == target {
            push(&state, t);
            next.next();
        }
    }
    Ok(out)
}

/// The exact split `total = bias + variance` of the expected prediction
/// error after `t` steps, with the variance also accumulated step by step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub total: f64,
    pub bias: f64,
    /// `total - bias`.
    pub variance: f64,
    /// `sum_k E||L_C^{1/2} prod_{j>k}(I - eta_j L) B_k||^2`.
    pub variance_sum: f64,
    /// `|variance - variance_sum|`.
    pub gap: f64,
}

impl Decomposition {
    /// `gap / total`, zero when the total error vanishes.
    pub fn relative_gap(&self) -> f64 {
        if self.total > 0.0 {
            self.gap / self.total
        } else {
            self.gap
        }
    }
}

/// Compute the decomposition after `t` steps of `schedule`.
pub fn decomposition_check(
    model: &SpectralModel,
    slope: &SlopeCoefficients,
    spec: &ProcessSpec,
    schedule: &Schedule,
    t: u64,
) -> Result<Decomposition> {
    check_supported(model, spec)?;
    check_horizon(t)?;
    let m = model.dim();
    let kernel = model.kernel_eigs();
    let cov = model.covariance_eigs();
    let mu = model.composite_coords();
    let sigma2 = spec.sigma * spec.sigma;
    let steps: Vec<f64> = (1..=t).map(|k| schedule.step(k)).collect();

    // Diagonal of the covariance of the martingale increment B_k, per step.
    let mut increments = Vec::with_capacity(steps.len());
    let mut state = MomentState::initial(slope);
    for &eta in &steps {
        let forcing = state.prediction_error(model) + sigma2;
        let q: Vec<f64> = (0..m)
            .map(|i| eta * eta * kernel[i] * kernel[i] * (cov[i] * cov[i] * state.entry(i, i) + forcing * cov[i]))
            .collect();
        increments.push(q);
        state = moment_recursion_step(&state, eta, model, spec.sigma)?;
    }
    let total = state.prediction_error(model);

    let mut bias = CompensatedSum::new();
    for i in 0..m {
        let prod: f64 = steps.iter().map(|eta| 1.0 - eta * mu[i]).product();
        bias.add(cov[i] * slope.coeffs[i] * slope.coeffs[i] * prod * prod);
    }
    let bias = bias.value();

    // Walk k backward so the propagator prod_{j>k} (1 - eta_j mu_i)^2 builds up.
    let mut propagator = vec![1.0; m];
    let mut var = CompensatedSum::new();
    for (k, q) in increments.iter().enumerate().rev() {
        for i in 0..m {
            var.add(cov[i] * propagator[i] * q[i]);
        }
        for i in 0..m {
            let f = 1.0 - steps[k] * mu[i];
            propagator[i] *= f * f;
        }
    }
    let variance_sum = var.value();
    let variance = total - bias;
    Ok(Decomposition {
        total,
        bias,
        variance,
        variance_sum,
        gap: (variance - variance_sum).abs(),
    })
}

/// Both sides of
/// `max_i [l_i^alpha prod_j (1 - eta_j l_i)]^2 <= ((alpha/e)^{2 alpha} + ||A||^{2 alpha}) / (1 + (sum eta_j)^{2 alpha})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl PolynomialBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluate the spectral polynomial bound for the steps `etas` (possibly
/// empty, which is the identity product).
pub fn spectral_polynomial_bound_check(a_eigs: &[f64], etas: &[f64], alpha: f64) -> Result<PolynomialBound> {
    if a_eigs.is_empty() || a_eigs.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::Validation("operator eigenvalues must be positive and finite".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::domain("alpha", alpha, ">= 0"));
    }
    let norm = a_eigs.iter().copied().fold(0.0, f64::max);
    if let Some(&bad) = etas.iter().find(|&&e| !(e >= 0.0 && e <= 1.0 / norm)) {
        return Err(Error::Validation(format!(
            "step size {bad} outside [0, 1/||A||] = [0, {}]",
            1.0 / norm
        )));
    }
    let lhs = a_eigs
        .iter()
        .map(|&l| {
            let prod: f64 = etas.iter().map(|e| 1.0 - e * l).product();
            let v = l.powf(alpha) * prod;
            v * v
        })
        .fold(0.0, f64::max);
    let total: f64 = etas.iter().sum();
    let rhs = ((alpha / E).powf(2.0 * alpha) + norm.powf(2.0 * alpha)) / (1.0 + total.powf(2.0 * alpha));
    Ok(PolynomialBound { lhs, rhs })
}
