//! Truncated spectral representation of the kernel operator `L_K` and the
//! covariance operator `L_C`, and the capacity functionals built on it.
//!
//! Both operators are diagonal in one shared orthonormal basis. Coordinate
//! `i` of every sequence in this crate refers to the same basis function, so
//! the composite operators `L_C^{1/2} L_K L_C^{1/2}` and
//! `L_K^{1/2} L_C L_K^{1/2}` are diagonal too, with eigenvalues
//! `mu_i = lambda_{K,i} * lambda_{C,i}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};

/// How an eigenvalue sequence is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecayKind {
    /// `lambda_i = scale * i^{-exponent}`.
    Power {
        exponent: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// A user supplied non-increasing positive sequence.
    Explicit { values: Vec<f64> },
    /// Piecewise constant sequence oscillating between `i^{-gamma_fast}` and
    /// `i^{-gamma_slow}`: with `b_1 = 2`, `b_{k+1} = b_k^{gamma_fast / gamma_slow}`
    /// and `f(x) = b_k^{-gamma_fast}` on `[b_k, b_{k+1})`, the sequence is
    /// `a_i = f(i + 1)`.
    Oscillating { gamma_fast: f64, gamma_slow: f64 },
}

fn unit_scale() -> f64 {
    1.0
}

/// An eigenvalue law together with the number of retained eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecay {
    pub kind: DecayKind,
    pub truncation: usize,
}

impl EigenDecay {
    pub fn power(exponent: f64, scale: f64, truncation: usize) -> Self {
        Self {
            kind: DecayKind::Power { exponent, scale },
            truncation,
        }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        let truncation = values.len();
        Self {
            kind: DecayKind::Explicit { values },
            truncation,
        }
    }

    pub fn oscillating(gamma_fast: f64, gamma_slow: f64, truncation: usize) -> Self {
        Self {
            kind: DecayKind::Oscillating {
                gamma_fast,
                gamma_slow,
            },
            truncation,
        }
    }

    /// `(scale, exponent)` when the law is a pure power.
    pub fn power_law(&self) -> Option<(f64, f64)> {
        match self.kind {
            DecayKind::Power { exponent, scale } => Some((scale, exponent)),
            _ => None,
        }
    }
}

/// Materialize the first `truncation` eigenvalues of `decay`.
///
/// ```
/// use sgdlab::spectral::{materialize, EigenDecay};
/// let eigs = materialize(&EigenDecay::oscillating(2.0, 1.0, 4)).unwrap();
/// assert_eq!(eigs, vec![0.25, 0.25, 0.0625, 0.0625]);
/// ```
pub fn materialize(decay: &EigenDecay) -> Result<Vec<f64>> {
    let m = decay.truncation;
    if m == 0 {
        return Err(Error::Validation("truncation must be at least 1".into()));
    }
    match &decay.kind {
        DecayKind::Power { exponent, scale } => {
            if !(*exponent > 0.0 && exponent.is_finite()) {
                return Err(Error::domain("exponent", *exponent, "> 0"));
            }
            if !(*scale > 0.0 && scale.is_finite()) {
                return Err(Error::domain("scale", *scale, "> 0"));
            }
            Ok((1..=m).map(|i| scale * (i as f64).powf(-exponent)).collect())
        }
        DecayKind::Explicit { values } => {
            if values.len() < m {
                return Err(Error::Validation(format!(
                    "explicit sequence has {} values, truncation {m} requested",
                    values.len()
                )));
            }
            let values = &values[..m];
            if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Validation(format!(
                    "eigenvalues must be positive and finite, found {v}"
                )));
            }
            if let Some(w) = values.windows(2).find(|w| w[1] > w[0]) {
                return Err(Error::Validation(format!(
                    "eigenvalues must be non-increasing, found {} followed by {}",
                    w[0], w[1]
                )));
            }
            Ok(values.to_vec())
        }
        DecayKind::Oscillating {
            gamma_fast,
            gamma_slow,
        } => {
            if !(*gamma_slow > 0.0 && gamma_fast > gamma_slow && gamma_fast.is_finite()) {
                return Err(Error::Validation(format!(
                    "oscillating decay needs gamma_fast > gamma_slow > 0, got {gamma_fast}, {gamma_slow}"
                )));
            }
            let ratio = gamma_fast / gamma_slow;
            let mut lo = 2.0_f64;
            let mut hi = lo.powf(ratio);
            let mut out = Vec::with_capacity(m);
            for i in 1..=m {
                let x = (i + 1) as f64;
                while x >= hi {
                    lo = hi;
                    hi = lo.powf(ratio);
                }
                out.push(lo.powf(-gamma_fast));
            }
            Ok(out)
        }
    }
}

fn check_eigs(eigs: &[f64]) -> Result<()> {
    if eigs.is_empty() {
        return Err(Error::Validation("empty eigenvalue sequence".into()));
    }
    if let Some(v) = eigs.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Validation(format!(
            "eigenvalues must be positive and finite, found {v}"
        )));
    }
    Ok(())
}

/// `Tr(L^s) = sum_i lambda_i^s` over the retained eigenvalues.
pub fn trace_power(eigs: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("s", s, "in (0, 1]"));
    }
    check_eigs(eigs)?;
    Ok(compensated_sum(eigs.iter().map(|l| l.powf(s))))
}

/// A truncated trace together with an upper bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePower {
    pub truncated: f64,
    /// `scale^s (s a - 1)^{-1} m^{1 - s a}` for power laws with `s a > 1`.
    pub tail: Option<f64>,
}

impl TracePower {
    /// Truncated value plus the tail bound when one exists.
    pub fn corrected(&self) -> f64 {
        self.truncated + self.tail.unwrap_or(0.0)
    }
}

/// Tail bound `sum_{i > m} scale^s i^{-s a} <= scale^s m^{1 - s a} / (s a - 1)`.
pub fn power_tail_bound(scale: f64, exponent: f64, m: usize, s: f64) -> Option<f64> {
    let p = s * exponent;
    (p > 1.0).then(|| scale.powf(s) * (m as f64).powf(1.0 - p) / (p - 1.0))
}

/// [`trace_power`] on a materialized decay, with the integral tail bound for
/// power laws.
pub fn trace_power_with_tail(decay: &EigenDecay, s: f64) -> Result<TracePower> {
    let eigs = materialize(decay)?;
    let truncated = trace_power(&eigs, s)?;
    let tail = decay
        .power_law()
        .and_then(|(scale, a)| power_tail_bound(scale, a, decay.truncation, s));
    Ok(TracePower { truncated, tail })
}

/// Effective dimension `N_L(lambda) = Tr((L + lambda I)^{-1} L)`.
pub fn effective_dimension(eigs: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("lambda", lambda, "> 0"));
    }
    check_eigs(eigs)?;
    let mut acc = CompensatedSum::new();
    for &l in eigs {
        acc.add(l / (l + lambda));
    }
    Ok(acc.value())
}

/// Commuting diagonal model of `L_K` and `L_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    kernel: Vec<f64>,
    covariance: Vec<f64>,
    /// Power law of the composite eigenvalues when both factors are powers.
    composite_power: Option<(f64, f64)>,
}

impl SpectralModel {
    /// Build from two eigenvalue laws sharing one truncation.
    pub fn new(kernel: &EigenDecay, covariance: &EigenDecay) -> Result<Self> {
        if kernel.truncation != covariance.truncation {
            return Err(Error::Validation(format!(
                "kernel and covariance truncations differ: {} vs {}",
                kernel.truncation, covariance.truncation
            )));
        }
        let mut model = Self::from_coordinates(materialize(kernel)?, materialize(covariance)?)?;
        model.composite_power = match (kernel.power_law(), covariance.power_law()) {
            (Some((ck, ak)), Some((cc, ac))) => Some((ck * cc, ak + ac)),
            _ => None,
        };
        Ok(model)
    }

    /// Build from per-coordinate eigenvalues in the shared basis. The
    /// sequences need not be sorted; coordinate `i` of each refers to the same
    /// basis function.
    pub fn from_coordinates(kernel: Vec<f64>, covariance: Vec<f64>) -> Result<Self> {
        check_eigs(&kernel)?;
        check_eigs(&covariance)?;
        if kernel.len() != covariance.len() {
            return Err(Error::Validation(format!(
                "kernel has {} eigenvalues, covariance has {}",
                kernel.len(),
                covariance.len()
            )));
        }
        let cov_max = covariance.iter().copied().fold(0.0, f64::max);
        if cov_max > 1.0 {
            return Err(Error::Validation(format!(
                "covariance operator norm {cov_max} exceeds 1; unit-norm covariates require lambda_C <= 1"
            )));
        }
        Ok(Self {
            kernel,
            covariance,
            composite_power: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.kernel.len()
    }

    pub fn kernel_eigs(&self) -> &[f64] {
        &self.kernel
    }

    pub fn covariance_eigs(&self) -> &[f64] {
        &self.covariance
    }

    /// `kappa^2`, the largest kernel eigenvalue.
    pub fn kappa_sq(&self) -> f64 {
        self.kernel.iter().copied().fold(0.0, f64::max)
    }

    /// Composite eigenvalues in coordinate order (unsorted).
    pub fn composite_coords(&self) -> Vec<f64> {
        self.kernel
            .iter()
            .zip(&self.covariance)
            .map(|(k, c)| k * c)
            .collect()
    }

    /// Operator norm of the composite operators.
    pub fn composite_norm(&self) -> f64 {
        self.composite_coords().into_iter().fold(0.0, f64::max)
    }

    /// `(scale, exponent)` of the composite eigenvalues when both factors
    /// follow power laws.
    pub fn composite_power_law(&self) -> Option<(f64, f64)> {
        self.composite_power
    }

    /// `Tr(L_K_composite^s)` with the tail bound for power laws.
    pub fn composite_trace(&self, s: f64) -> Result<TracePower> {
        let truncated = trace_power(&self.composite_coords(), s)?;
        let tail = self
            .composite_power
            .and_then(|(c, a)| power_tail_bound(c, a, self.dim(), s));
        Ok(TracePower { truncated, tail })
    }
}

/// Eigenvalues shared by both composite operators, sorted non-increasing.
pub fn composite_eigs(model: &SpectralModel) -> Vec<f64> {
    let mut mu = model.composite_coords();
    mu.sort_by(|a, b| b.total_cmp(a));
    mu
}
