//! Closed-form rates, step-size sums, auxiliary integrals and theorem
//! constants, plus the log-log fit used to compare them with simulations.

pub mod constants;
pub mod fit;
pub mod integral;
pub mod rates;
pub mod stepsize;
pub mod trace;

pub use constants::{c_k, theorem_constant, ConstantKind, ConstantParams, ModelQuantities, QuantitySet};
pub use fit::{slope_fit, SlopeFit};
pub use integral::{c0_ol, integral_case, lemma_a1_bound, lemma_a1_integral, IntegralCase};
pub use rates::{
    horizon_estimation_rate, horizon_exponent_estimation, horizon_exponent_prediction,
    horizon_prediction_rate, in_log_set, omega, omega_mixed, omega_step, omega_sum, online_estimation_rate, online_prediction_rate,
    theta_for_estimation, theta_for_prediction, RateSpec, Regime,
};
pub use stepsize::{
    c_ol, check_stepsize_sum_bound, stepsize_sum, stepsize_sum_bound, stepsize_sum_lower_bound,
    stepsize_sums_upto, PartialSumPower, StepSumCheck,
};
pub use trace::{critical_integral, log_poly, log_poly_max, trace_identity_check, TraceIdentity};
