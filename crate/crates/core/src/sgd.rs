//! The SGD recursion `beta_{t+1} = beta_t - eta_t (<beta_t, x_t> - y_t) L_K x_t`
//! in coordinate form, its step-size schedules and error functionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, ProcessSpec, Sampler, SlopeCoefficients};
use crate::numeric::compensated_sum;
use crate::spectral::SpectralModel;

/// Step-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `eta_t = eta_0 t^{-theta}`.
    Online { eta0: f64, theta: f64 },
    /// `eta_t = eta_0 T^{-exponent}` for every `t <= T`.
    FiniteHorizon { eta0: f64, horizon: u64, exponent: f64 },
}

impl Schedule {
    /// `eta_0 = 0` is accepted and gives the no-op schedule.
    pub fn online(eta0: f64, theta: f64) -> Result<Self> {
        let s = Schedule::Online { eta0, theta };
        s.check()?;
        Ok(s)
    }

    pub fn finite_horizon(eta0: f64, horizon: u64, exponent: f64) -> Result<Self> {
        let s = Schedule::FiniteHorizon {
            eta0,
            horizon,
            exponent,
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        let eta0 = self.eta0();
        if !(eta0 >= 0.0 && eta0.is_finite()) {
            return Err(Error::domain("eta0", eta0, ">= 0"));
        }
        match *self {
            Schedule::Online { theta, .. } => {
                if !(0.0..1.0).contains(&theta) {
                    return Err(Error::domain("theta", theta, "in [0, 1)"));
                }
            }
            Schedule::FiniteHorizon {
                horizon, exponent, ..
            } => {
                if horizon == 0 {
                    return Err(Error::Validation("finite-horizon schedule needs T >= 1".into()));
                }
                if !(exponent >= 0.0 && exponent.is_finite()) {
                    return Err(Error::domain("exponent", exponent, ">= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn eta0(&self) -> f64 {
        match *self {
            Schedule::Online { eta0, .. } | Schedule::FiniteHorizon { eta0, .. } => eta0,
        }
    }

    pub fn horizon(&self) -> Option<u64> {
        match *self {
            Schedule::Online { .. } => None,
            Schedule::FiniteHorizon { horizon, .. } => Some(horizon),
        }
    }

    /// `eta_t` for `t >= 1`.
    #[inline]
    pub fn step(&self, t: u64) -> f64 {
        match *self {
            Schedule::Online { eta0, theta } => {
                if theta == 0.0 {
                    eta0
                } else {
                    eta0 * (t as f64).powf(-theta)
                }
            }
            Schedule::FiniteHorizon {
                eta0,
                horizon,
                exponent,
            } => eta0 * (horizon as f64).powf(-exponent),
        }
    }

    /// Largest step the schedule ever takes.
    pub fn max_step(&self) -> f64 {
        self.step(1)
    }

    /// Reject schedules whose steps exceed `min(1, 1/kappa^2)`.
    pub fn validate_for(&self, kappa_sq: f64) -> Result<()> {
        let limit = f64::min(1.0, 1.0 / kappa_sq);
        let eta = self.max_step();
        if eta > limit {
            return Err(Error::Validation(format!(
                "step size {eta} exceeds min(1, 1/kappa^2) = {limit}"
            )));
        }
        Ok(())
    }
}

/// Current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub coeffs: Vec<f64>,
    /// Index of the next step; the initial iterate is step 1.
    pub t: u64,
    /// `sum_{k < t} eta_k`.
    pub step_sum: f64,
}

impl SgdState {
    pub fn new(m: usize) -> Self {
        Self {
            coeffs: vec![0.0; m],
            t: 1,
            step_sum: 0.0,
        }
    }
}

/// One update `beta -= eta (<beta, x> - y) L_K x`.
///
/// ```
/// use sgdlab::sgd::{sgd_step, SgdState};
/// let mut st = SgdState::new(2);
/// sgd_step(&mut st, &[1.0, 2.0], 3.0, 0.1, &[1.0, 0.5]).unwrap();
/// assert!((st.coeffs[0] - 0.3).abs() < 1e-15 && (st.coeffs[1] - 0.3).abs() < 1e-15);
/// ```
pub fn sgd_step(state: &mut SgdState, x: &[f64], y: f64, eta: f64, kernel_eigs: &[f64]) -> Result<()> {
    let m = state.coeffs.len();
    if x.len() != m || kernel_eigs.len() != m {
        return Err(Error::Validation(format!(
            "dimension mismatch: iterate {m}, x {}, kernel {}",
            x.len(),
            kernel_eigs.len()
        )));
    }
    let residual = dot(&state.coeffs, x) - y;
    if !residual.is_finite() {
        return Err(Error::Numeric {
            step: state.t,
            message: format!("residual is {residual}"),
        });
    }
    let g = eta * residual;
    for ((b, xi), k) in state.coeffs.iter_mut().zip(x).zip(kernel_eigs) {
        *b -= g * k * xi;
    }
    state.t += 1;
    state.step_sum += eta;
    Ok(())
}

/// `sum_i lambda_{C,i} (beta_i - beta*_i)^2`.
pub fn prediction_error(model: &SpectralModel, coeffs: &[f64], beta: &[f64]) -> f64 {
    compensated_sum(
        coeffs
            .iter()
            .zip(beta)
            .zip(model.covariance_eigs())
            .map(|((b, s), c)| c * (b - s) * (b - s)),
    )
}

/// `sum_i (beta_i - beta*_i)^2 / lambda_{K,i}`, the squared RKHS distance.
pub fn estimation_error(model: &SpectralModel, coeffs: &[f64], beta: &[f64]) -> f64 {
    compensated_sum(
        coeffs
            .iter()
            .zip(beta)
            .zip(model.kernel_eigs())
            .map(|((b, s), k)| (b - s) * (b - s) / k),
    )
}

/// Recording steps `{0, 1, 2, 4, ...}` up to `horizon`, with `horizon` itself
/// appended when it is not a power of two.
pub fn dyadic_grid(horizon: u64) -> Vec<u64> {
    let mut grid = vec![0];
    let mut t = 1u64;
    while t <= horizon {
        grid.push(t);
        match t.checked_mul(2) {
            Some(n) => t = n,
            None => break,
        }
    }
    if *grid.last().unwrap() != horizon {
        grid.push(horizon);
    }
    grid
}

/// Errors after `t` updates, i.e. of the iterate `beta_{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub prediction: f64,
    pub estimation: f64,
}

fn check_grid(record_at: &[u64], horizon: u64) -> Result<()> {
    if record_at.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("record steps must be strictly increasing".into()));
    }
    if let Some(&last) = record_at.last() {
        if last > horizon {
            return Err(Error::Validation(format!(
                "record step {last} is beyond the horizon {horizon}"
            )));
        }
    }
    Ok(())
}

/// Run one replication for `horizon` steps from `beta_1 = 0`.
pub fn run(
    model: &SpectralModel,
    slope: &SlopeCoefficients,
    spec: ProcessSpec,
    schedule: &Schedule,
    horizon: u64,
    record_at: &[u64],
    replication: u64,
) -> Result<Vec<TrajectoryPoint>> {
    if let Some(t) = schedule.horizon() {
        if t != horizon {
            return Err(Error::Validation(format!(
                "finite-horizon schedule tuned for T = {t} run for {horizon} steps"
            )));
        }
    }
    check_grid(record_at, horizon)?;
    schedule.validate_for(model.kappa_sq())?;
    let mut sampler = Sampler::new(model, slope, spec, replication)?;
    let beta = &slope.coeffs;
    let kernel = model.kernel_eigs();
    let mut state = SgdState::new(model.dim());
    let mut x = vec![0.0; model.dim()];
    let mut out = Vec::with_capacity(record_at.len());
    let mut next = record_at.iter().peekable();
    let record = |state: &SgdState, t: u64, out: &mut Vec<TrajectoryPoint>| {
        out.push(TrajectoryPoint {
            t,
            prediction: prediction_error(model, &state.coeffs, beta),
            estimation: estimation_error(model, &state.coeffs, beta),
        });
    };
    if next.peek() == Some(&&0) {
        record(&state, 0, &mut out);
        next.next();
    }
    for t in 1..=horizon {
        let Some(&&target) = next.peek() else { break };
        let y = sampler.next_into(&mut x);
        sgd_step(&mut state, &x, y, schedule.step(t), kernel)?;
        if t == target {
            record(&state, t, &mut out);
            next.next();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_slope, sample_pair, CoefficientLaw, SlopeTarget};
    use crate::spectral::EigenDecay;

    fn small_model(m: usize) -> SpectralModel {
        let k = EigenDecay::power(2.0, 1.0, m);
        SpectralModel::new(&k, &k).unwrap()
    }

    #[test]
    fn first_step_from_zero() {
        let mut st = SgdState::new(3);
        let x = [0.5, -1.0, 2.0];
        let k = [1.0, 0.25, 0.1];
        sgd_step(&mut st, &x, 1.5, 0.2, &k).unwrap();
        for i in 0..3 {
            assert_eq!(st.coeffs[i], 0.2 * 1.5 * k[i] * x[i]);
        }
        assert_eq!(st.t, 2);
        assert_eq!(st.step_sum, 0.2);
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let mut st = SgdState::new(1);
        st.coeffs[0] = 1.0;
        sgd_step(&mut st, &[1.0], 1.0, 0.5, &[1.0]).unwrap();
        assert_eq!(st.coeffs, vec![1.0]);
    }

    #[test]
    fn dimension_and_finiteness_checks() {
        let mut st = SgdState::new(2);
        assert!(matches!(
            sgd_step(&mut st, &[1.0], 0.0, 0.1, &[1.0, 1.0]),
            Err(Error::Validation(_))
        ));
        let err = sgd_step(&mut st, &[1.0, 1.0], f64::NAN, 0.1, &[1.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::Numeric { step: 1, message: "residual is NaN".into() });
    }

    #[test]
    fn schedules() {
        let s = Schedule::online(0.5, 0.5).unwrap();
        assert_eq!(s.step(1), 0.5);
        assert_eq!(s.step(4), 0.25);
        let f = Schedule::finite_horizon(1.0, 16, 0.5).unwrap();
        assert_eq!(f.step(1), 0.25);
        assert_eq!(f.step(16), 0.25);
        assert!(Schedule::online(0.5, 1.0).is_err());
        assert!(Schedule::finite_horizon(0.5, 0, 0.5).is_err());
        assert!(Schedule::online(2.0, 0.5).unwrap().validate_for(1.0).is_err());
        assert!(Schedule::online(0.6, 0.5).unwrap().validate_for(2.0).is_err());
        assert!(Schedule::online(0.5, 0.5).unwrap().validate_for(2.0).is_ok());
    }

    #[test]
    fn grid() {
        assert_eq!(dyadic_grid(1), vec![0, 1]);
        assert_eq!(dyadic_grid(8), vec![0, 1, 2, 4, 8]);
        assert_eq!(dyadic_grid(10), vec![0, 1, 2, 4, 8, 10]);
    }

    #[test]
    fn initial_record_is_signal_energy() {
        let model = small_model(5);
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None).unwrap();
        let sched = Schedule::online(0.5, 0.5).unwrap();
        let tr = run(&model, &slope, ProcessSpec::gaussian(0.1, 3), &sched, 4, &[0], 0).unwrap();
        let energy: f64 = slope
            .coeffs
            .iter()
            .zip(model.covariance_eigs())
            .map(|(b, c)| c * b * b)
            .sum();
        assert!((tr[0].prediction - energy).abs() < 1e-15);
    }

    #[test]
    fn scalar_normalized_contraction() {
        let model = SpectralModel::from_coordinates(vec![1.0], vec![1.0]).unwrap();
        let slope = SlopeCoefficients::explicit(&model, vec![1.0]).unwrap();
        let spec = ProcessSpec {
            normalize: true,
            ..ProcessSpec::gaussian(0.0, 11)
        };
        let sched = Schedule::online(0.5, 0.0).unwrap();
        let grid: Vec<u64> = (0..=20).collect();
        let tr = run(&model, &slope, spec, &sched, 20, &grid, 0).unwrap();
        for p in tr {
            assert_eq!(p.prediction, 2f64.powi(-2 * p.t as i32));
        }
    }

    #[test]
    fn zero_schedule_is_a_no_op() {
        let model = small_model(4);
        let slope = build_slope(&model, 1.0, SlopeTarget::Prediction, None).unwrap();
        let sched = Schedule::online(0.0, 0.5).unwrap();
        let tr = run(&model, &slope, ProcessSpec::gaussian(1.0, 5), &sched, 64, &dyadic_grid(64), 2).unwrap();
        assert!(tr.iter().all(|p| p.prediction == tr[0].prediction && p.estimation == tr[0].estimation));
    }

    #[test]
    fn zero_noise_residual_vanishes_at_truth() {
        let model = small_model(6);
        let slope = build_slope(&model, 0.7, SlopeTarget::Prediction, None).unwrap();
        let spec = ProcessSpec::gaussian(0.0, 9);
        let mut st = SgdState::new(6);
        st.coeffs = slope.coeffs.clone();
        for i in 0..50 {
            let (x, y) = sample_pair(&model, &slope, spec, 0, i).unwrap();
            sgd_step(&mut st, &x, y, 0.5, model.kernel_eigs()).unwrap();
        }
        assert_eq!(st.coeffs, slope.coeffs);
    }

    #[test]
    fn update_is_linear_in_the_response() {
        let model = small_model(8);
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None).unwrap();
        let spec = ProcessSpec::gaussian(0.5, 21);
        let mut a = SgdState::new(8);
        let mut b = SgdState::new(8);
        for i in 0..200 {
            let (x, y) = sample_pair(&model, &slope, spec, 0, i).unwrap();
            let eta = 0.5 / ((i + 1) as f64).sqrt();
            sgd_step(&mut a, &x, y, eta, model.kernel_eigs()).unwrap();
            sgd_step(&mut b, &x, 2.0 * y, eta, model.kernel_eigs()).unwrap();
        }
        for (u, v) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((2.0 * u - v).abs() <= 1e-14 * v.abs().max(1e-300), "{u} {v}");
        }
    }

    #[test]
    fn prediction_error_is_permutation_invariant() {
        let m = 7;
        let model = small_model(m);
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None).unwrap();
        let spec = ProcessSpec::gaussian(0.3, 4);
        let perm = [3usize, 0, 6, 1, 5, 2, 4];
        let pk: Vec<f64> = perm.iter().map(|&i| model.kernel_eigs()[i]).collect();
        let pc: Vec<f64> = perm.iter().map(|&i| model.covariance_eigs()[i]).collect();
        let pmodel = SpectralModel::from_coordinates(pk, pc).unwrap();
        let pbeta: Vec<f64> = perm.iter().map(|&i| slope.coeffs[i]).collect();
        let mut a = SgdState::new(m);
        let mut b = SgdState::new(m);
        for i in 0..100 {
            let (x, y) = sample_pair(&model, &slope, spec, 0, i).unwrap();
            let px: Vec<f64> = perm.iter().map(|&j| x[j]).collect();
            sgd_step(&mut a, &x, y, 0.3, model.kernel_eigs()).unwrap();
            sgd_step(&mut b, &px, y, 0.3, pmodel.kernel_eigs()).unwrap();
            let ea = prediction_error(&model, &a.coeffs, &slope.coeffs);
            let eb = prediction_error(&pmodel, &b.coeffs, &pbeta);
            assert!((ea - eb).abs() <= 1e-13 * ea);
        }
    }

    #[test]
    fn mean_iterate_follows_the_deterministic_recursion() {
        let m = 3;
        let model = small_model(m);
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None).unwrap();
        let spec = ProcessSpec::gaussian(0.5, 77);
        let sched = Schedule::online(0.8, 0.5).unwrap();
        let horizon = 20;
        let n = 20_000;
        let mut sum = vec![0.0; m];
        let mut sumsq = vec![0.0; m];
        for rep in 0..n {
            let mut sampler = Sampler::new(&model, &slope, spec, rep).unwrap();
            let mut st = SgdState::new(m);
            let mut x = vec![0.0; m];
            for t in 1..=horizon {
                let y = sampler.next_into(&mut x);
                sgd_step(&mut st, &x, y, sched.step(t), model.kernel_eigs()).unwrap();
            }
            for i in 0..m {
                let d = st.coeffs[i] - slope.coeffs[i];
                sum[i] += d;
                sumsq[i] += d * d;
            }
        }
        let mu = model.composite_coords();
        for i in 0..m {
            let expected = -slope.coeffs[i] * (1..=horizon).map(|t| 1.0 - sched.step(t) * mu[i]).product::<f64>();
            let mean = sum[i] / n as f64;
            let var = sumsq[i] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - expected).abs() <= 4.0 * se, "coord {i}: {mean} vs {expected} (se {se})");
        }
    }

    #[test]
    fn finite_horizon_mismatch_is_rejected() {
        let model = small_model(2);
        let slope = build_slope(&model, 0.5, SlopeTarget::Prediction, None).unwrap();
        let sched = Schedule::finite_horizon(0.5, 10, 0.5).unwrap();
        let err = run(&model, &slope, ProcessSpec::gaussian(0.0, 1), &sched, 12, &[12], 0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let spec = ProcessSpec {
            law: CoefficientLaw::Rademacher,
            ..ProcessSpec::gaussian(0.0, 1)
        };
        assert!(run(&model, &slope, spec, &sched, 10, &[11], 0).is_err());
    }
}
