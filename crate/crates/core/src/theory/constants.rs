//! Step-size thresholds `C^S_1..C^S_4` and bound constants `C_1..C_4` of the
//! four convergence theorems.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SlopeCoefficients;
use crate::spectral::SpectralModel;
use crate::theory::integral::c0_ol;
use crate::theory::rates::{horizon_exponent_estimation, theta_for_estimation, theta_for_prediction};
use crate::theory::stepsize::c_ol;

/// Model-dependent inputs of the constants.
///
/// In the commuting model both composite operators share their spectrum, so
/// one trace and one operator norm serve for both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelQuantities {
    pub kappa_sq: f64,
    /// `Tr(L^s)` of the composite operator.
    pub trace_s: f64,
    /// Operator norm of the composite operator.
    pub composite_norm: f64,
    pub c_m: f64,
    pub sigma: f64,
    /// `||g||_2` of the source element of the slope.
    pub source_norm: f64,
    /// `||beta*||_2`.
    pub beta_norm: f64,
}

/// Quantities evaluated on the truncated spectrum and, for power-law
/// spectra, with the trace tail added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantitySet {
    pub truncated: ModelQuantities,
    pub tail_corrected: Option<ModelQuantities>,
}

impl QuantitySet {
    /// The set with the larger trace, which gives the larger constants.
    pub fn conservative(&self) -> ModelQuantities {
        self.tail_corrected.unwrap_or(self.truncated)
    }
}

impl ModelQuantities {
    pub fn from_model(
        model: &SpectralModel,
        slope: &SlopeCoefficients,
        sigma: f64,
        c_m: f64,
        s: f64,
    ) -> Result<QuantitySet> {
        let source_norm = slope.norms.source_l2.ok_or_else(|| {
            Error::Validation("theorem constants need ||g||, but the slope has no source element".into())
        })?;
        let trace = model.composite_trace(s)?;
        let truncated = ModelQuantities {
            kappa_sq: model.kappa_sq(),
            trace_s: trace.truncated,
            composite_norm: model.composite_norm(),
            c_m,
            sigma,
            source_norm,
            beta_norm: slope.norms.beta_l2,
        };
        let tail_corrected = trace.tail.map(|tail| ModelQuantities {
            trace_s: trace.truncated + tail,
            ..truncated
        });
        Ok(QuantitySet {
            truncated,
            tail_corrected,
        })
    }

    fn validate(&self) -> Result<()> {
        let named = [
            ("kappa_sq", self.kappa_sq),
            ("trace_s", self.trace_s),
            ("composite_norm", self.composite_norm),
            ("c_m", self.c_m),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("model quantity {name} = {v} must be positive")));
            }
        }
        for (name, v) in [("sigma", self.sigma), ("source_norm", self.source_norm), ("beta_norm", self.beta_norm)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("model quantity {name} = {v} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstantKind {
    C1,
    C2,
    C3,
    C4,
    CS1,
    CS2,
    CS3,
    CS4,
}

impl ConstantKind {
    pub const ALL: [ConstantKind; 8] = [
        ConstantKind::C1,
        ConstantKind::C2,
        ConstantKind::C3,
        ConstantKind::C4,
        ConstantKind::CS1,
        ConstantKind::CS2,
        ConstantKind::CS3,
        ConstantKind::CS4,
    ];
}

/// Regularity, capacity and schedule parameters.
///
/// `theta` defaults to the exponent each online theorem prescribes; `eta0`
/// is required by the bound constants `C_1..C_4` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantParams {
    pub r: f64,
    pub s: f64,
    pub theta: Option<f64>,
    pub eta0: Option<f64>,
}

impl ConstantParams {
    pub fn new(r: f64, s: f64) -> Self {
        Self {
            r,
            s,
            theta: None,
            eta0: None,
        }
    }

    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = Some(eta0);
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    fn eta0(&self) -> Result<f64> {
        match self.eta0 {
            Some(e) if e > 0.0 && e.is_finite() => Ok(e),
            Some(e) => Err(Error::domain("eta0", e, "> 0")),
            None => Err(Error::Validation("bound constant needs eta0".into())),
        }
    }
}

// ((2-s)/(2e))^{2-s} + kappa^{4-2s}
fn a_s(q: &ModelQuantities, s: f64) -> f64 {
    ((2.0 - s) / (2.0 * E)).powf(2.0 - s) + q.kappa_sq.powf(2.0 - s)
}

fn regularity_factor(r: f64, norm_pow: f64) -> f64 {
    (r / E).powf(2.0 * r) + norm_pow
}

fn sum_scale(eta0: f64, theta: f64) -> f64 {
    eta0 * (1.0 - 2f64.powf(theta - 1.0)) / (1.0 - theta)
}

/// The constant `C^K` of the estimation bounds.
pub fn c_k(q: &ModelQuantities, r: f64, s: f64) -> f64 {
    let first = q.kappa_sq * q.source_norm.powi(2) * regularity_factor(r, q.composite_norm.powf(2.0 * r));
    let noise = q.c_m.sqrt() * q.beta_norm.powi(2) + q.sigma.powi(2);
    let second = if s < 1.0 {
        2.0 * noise
            * q.c_m.sqrt()
            * q.trace_s
            * (((1.0 - s) / (2.0 * E)).powf(1.0 - s) + q.composite_norm.powf(1.0 - s))
    } else {
        4.0 * noise * q.c_m.sqrt() * q.trace_s
    };
    first.max(second)
}

/// Evaluate one constant.
pub fn theorem_constant(q: &ModelQuantities, p: &ConstantParams, which: ConstantKind) -> Result<f64> {
    q.validate()?;
    let (r, s) = (p.r, p.s);
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("r", r, "> 0"));
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("s", s, "in (0, 1]"));
    }
    let a = a_s(q, s);
    let sqrt_cm = q.c_m.sqrt();
    let noise = q.sigma.powi(2) + sqrt_cm * q.beta_norm.powi(2);
    let g_term = q.source_norm.powi(2) * regularity_factor(r, q.kappa_sq.powf(2.0 * r));
    let value = match which {
        ConstantKind::CS1 => {
            let theta = p.theta.map_or_else(|| theta_for_prediction(r, s), Ok)?;
            let inner = 4f64.powf(theta) / LN_2 + 9f64.powf(theta) * c0_ol(2.0 - s, theta)?;
            (2.0 * q.c_m * q.trace_s * a * inner * (1.0 + 1.0 / (E * theta))).powf(-1.0 / s)
        }
        ConstantKind::C1 => {
            let theta = p.theta.map_or_else(|| theta_for_prediction(r, s), Ok)?;
            let eta0 = p.eta0()?;
            g_term * sum_scale(eta0, theta).powf(-2.0 * r)
                + 2.0 * noise * sqrt_cm * q.trace_s * a * c_ol(eta0, theta, 2.0 - s)?
        }
        ConstantKind::CS2 => {
            let star = 2.0 + if s < 1.0 { 1.0 / (1.0 - s) } else { 1.0 / (2.0 * E * r) };
            (2.0 * q.c_m * q.trace_s * a * star).powf(-1.0 / s)
        }
        ConstantKind::C2 => {
            let eta0 = p.eta0()?;
            let tail = if s < 1.0 {
                (2.0 - s) / (1.0 - s)
            } else {
                (2.0 * r + 2.0) / (2.0 * r + 1.0)
            };
            eta0.powf(-2.0 * r) * g_term + 2.0 * sqrt_cm * q.trace_s * a * noise * (eta0 * eta0 + eta0 * tail)
        }
        ConstantKind::CS3 => {
            let theta = p.theta.map_or_else(|| theta_for_estimation(r, s), Ok)?;
            let inner = 4f64.powf(theta) / LN_2 + 9f64.powf(theta) * c0_ol(2.0 - s, theta)?;
            (2.0 * q.c_m * q.trace_s * a * inner).powf(-1.0 / s)
        }
        ConstantKind::C3 => {
            let theta = p.theta.map_or_else(|| theta_for_estimation(r, s), Ok)?;
            if s >= 1.0 {
                return Err(Error::Unsupported("C3 needs s < 1".into()));
            }
            let eta0 = p.eta0()?;
            let ck = c_k(q, r, s);
            ck / LN_2 * sum_scale(eta0, theta).powf(-2.0 * r) + ck * c_ol(eta0, theta, 1.0 - s)?
        }
        ConstantKind::CS4 => {
            let theta = p.theta.map_or_else(|| horizon_exponent_estimation(r, s), Ok)?;
            1.0 / (2.0 * q.c_m * q.trace_s * a * (1.0 + (1.0 - theta) / (E * theta)))
        }
        ConstantKind::C4 => {
            let eta0 = p.eta0()?;
            c_k(q, r, s) * (eta0.powf(-2.0 * r) + eta0 + eta0 / s)
        }
    };
    // A zero bound constant is legitimate (no noise and a zero slope).
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::Numeric {
            step: 0,
            message: format!("{which:?} evaluated to {value}"),
        });
    }
    Ok(value)
}
