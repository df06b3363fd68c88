//! Replicated Monte Carlo runs and exact-oracle runs of one configuration,
//! with the matching theorem's rate and bound attached.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::model::{ProcessSpec, SlopeCoefficients, SlopeTarget};
use crate::numeric::compensated_sum;
use crate::oracle::oracle_trajectory;
use crate::sgd::{self, Schedule, TrajectoryPoint};
use crate::spectral::SpectralModel;
use crate::theory::{
    horizon_estimation_rate, horizon_exponent_estimation, horizon_exponent_prediction,
    horizon_prediction_rate, online_estimation_rate, online_prediction_rate, slope_fit,
    theorem_constant, theta_for_estimation, theta_for_prediction, ConstantKind, ConstantParams,
    ModelQuantities, RateSpec, SlopeFit,
};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Error functional reported in a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Prediction,
    Estimation,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Prediction => "prediction",
            Metric::Estimation => "estimation",
        })
    }
}

/// Which of the four convergence theorems covers a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Prediction error, decaying steps.
    OnlinePrediction,
    /// Prediction error, constant steps tuned to `T`.
    HorizonPrediction,
    /// RKHS error, decaying steps.
    OnlineEstimation,
    /// RKHS error, constant steps tuned to `T`.
    HorizonEstimation,
}

impl Theorem {
    pub fn select(target: SlopeTarget, online: bool) -> Self {
        match (target, online) {
            (SlopeTarget::Prediction, true) => Theorem::OnlinePrediction,
            (SlopeTarget::Prediction, false) => Theorem::HorizonPrediction,
            (SlopeTarget::Estimation, true) => Theorem::OnlineEstimation,
            (SlopeTarget::Estimation, false) => Theorem::HorizonEstimation,
        }
    }

    pub fn metric(&self) -> Metric {
        match self {
            Theorem::OnlinePrediction | Theorem::HorizonPrediction => Metric::Prediction,
            Theorem::OnlineEstimation | Theorem::HorizonEstimation => Metric::Estimation,
        }
    }

    fn kinds(&self) -> (ConstantKind, ConstantKind) {
        match self {
            Theorem::OnlinePrediction => (ConstantKind::CS1, ConstantKind::C1),
            Theorem::HorizonPrediction => (ConstantKind::CS2, ConstantKind::C2),
            Theorem::OnlineEstimation => (ConstantKind::CS3, ConstantKind::C3),
            Theorem::HorizonEstimation => (ConstantKind::CS4, ConstantKind::C4),
        }
    }

    fn is_online(&self) -> bool {
        matches!(self, Theorem::OnlinePrediction | Theorem::OnlineEstimation)
    }
}

/// A constant evaluated on the truncated and on the tail-corrected spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPair {
    pub truncated: f64,
    pub tail_corrected: Option<f64>,
}

impl ConstantPair {
    pub fn largest(&self) -> f64 {
        self.tail_corrected.map_or(self.truncated, |t| t.max(self.truncated))
    }

    pub fn smallest(&self) -> f64 {
        self.tail_corrected.map_or(self.truncated, |t| t.min(self.truncated))
    }
}

/// Theory attached to a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryAttachment {
    pub theorem: Theorem,
    pub metric: Metric,
    pub rate: RateSpec,
    /// `theta` (online) or the step-size exponent (finite horizon) actually used.
    pub schedule_exponent: f64,
    /// Whether `schedule_exponent` is the one the theorem prescribes.
    pub prescribed_exponent: bool,
    pub eta0: f64,
    pub eta0_auto: bool,
    pub step_threshold: ConstantPair,
    /// `min(1, kappa^-2, C^S)` with the smaller threshold.
    pub eta0_limit: f64,
    /// `0 < eta0 <= eta0_limit`.
    pub precondition_holds: bool,
    pub bound_constant: Option<ConstantPair>,
    pub model_quantities: ModelQuantities,
}

impl TheoryAttachment {
    /// Bound on the expected error of the theorem's metric after `t` steps.
    pub fn bound_at(&self, t: u64, horizon: u64) -> Option<f64> {
        if !self.prescribed_exponent {
            return None;
        }
        let c = self.bound_constant?.largest();
        if self.theorem.is_online() {
            if t == 0 {
                return None;
            }
            let n = t as f64 + 1.0;
            Some(c * n.powf(self.rate.exponent) * if self.rate.log_factor { n.ln() } else { 1.0 })
        } else if t == horizon {
            let big_t = horizon as f64;
            let log = if self.rate.log_factor { (big_t + 1.0).ln() } else { 1.0 };
            Some(c * big_t.powf(self.rate.exponent) * log)
        } else {
            None
        }
    }
}

/// Everything needed to run a configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub model: SpectralModel,
    pub slope: SlopeCoefficients,
    pub spec: ProcessSpec,
    pub schedule: Schedule,
    pub theory: TheoryAttachment,
    pub notes: Vec<String>,
}

/// Build the model, the schedule and the theory for `config`.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let model = config.build_model()?;
    let slope = config.build_slope(&model)?;
    let spec = config.process_spec();
    spec.validate()?;
    let (r, s) = (config.slope.r, config.theory.s);
    let theorem = Theorem::select(config.slope.target, config.schedule.is_online());
    let mut notes = Vec::new();

    let (prescribed, rate) = match theorem {
        Theorem::OnlinePrediction => (theta_for_prediction(r, s)?, online_prediction_rate(r, s)?),
        Theorem::HorizonPrediction => (horizon_exponent_prediction(r)?, horizon_prediction_rate(r, s)?),
        Theorem::OnlineEstimation => (theta_for_estimation(r, s)?, online_estimation_rate(r, s)?),
        Theorem::HorizonEstimation => (horizon_exponent_estimation(r, s)?, horizon_estimation_rate(r, s)?),
    };
    let (exp_setting, eta0_setting) = match config.schedule {
        crate::harness::config::ScheduleConfig::Online { eta0, theta } => (theta, eta0),
        crate::harness::config::ScheduleConfig::FiniteHorizon { eta0, exponent } => (exponent, eta0),
    };
    let exponent = exp_setting.value().unwrap_or(prescribed);
    let prescribed_exponent = exponent == prescribed;
    if !prescribed_exponent {
        notes.push(format!(
            "schedule exponent {exponent} differs from the prescribed {prescribed}; no bound is reported"
        ));
    }

    let quantities = ModelQuantities::from_model(&model, &slope, spec.sigma, config.theory.c_m, s)?;
    let (cs_kind, c_kind) = theorem.kinds();
    let mut params = ConstantParams::new(r, s);
    if theorem != Theorem::HorizonPrediction {
        params = params.with_theta(exponent);
    }
    let threshold = ConstantPair {
        truncated: theorem_constant(&quantities.truncated, &params, cs_kind)?,
        tail_corrected: quantities
            .tail_corrected
            .map(|q| theorem_constant(&q, &params, cs_kind))
            .transpose()?,
    };
    let kappa_sq = model.kappa_sq();
    let eta0_limit = 1f64.min(1.0 / kappa_sq).min(threshold.smallest());
    let (eta0, eta0_auto) = match eta0_setting.value() {
        Some(v) => (v, false),
        None => (0.99 * eta0_limit, true),
    };
    let precondition_holds = eta0 > 0.0 && eta0 <= eta0_limit;
    if !precondition_holds {
        notes.push(format!(
            "eta0 = {eta0} exceeds the theorem threshold {eta0_limit:e}; the bound is reported but not guaranteed"
        ));
    }
    let schedule = if config.schedule.is_online() {
        Schedule::online(eta0, exponent)?
    } else {
        Schedule::finite_horizon(eta0, config.horizon, exponent)?
    };
    schedule.validate_for(kappa_sq)?;

    let bound_constant = if eta0 > 0.0 {
        let p = params.with_eta0(eta0);
        Some(ConstantPair {
            truncated: theorem_constant(&quantities.truncated, &p, c_kind)?,
            tail_corrected: quantities
                .tail_corrected
                .map(|q| theorem_constant(&q, &p, c_kind))
                .transpose()?,
        })
    } else {
        None
    };

    if let Some((_, a)) = model.composite_power_law() {
        if s < 1.0 && s * a <= 1.0 {
            notes.push(format!(
                "Tr(L^s) diverges for the untruncated spectrum (s * decay = {}); constants use the truncated trace",
                s * a
            ));
        }
    }
    if spec.normalize {
        notes.push("normalized covariates: c_m is assumed, not verified".into());
    }

    let theory = TheoryAttachment {
        theorem,
        metric: theorem.metric(),
        rate,
        schedule_exponent: exponent,
        prescribed_exponent,
        eta0,
        eta0_auto,
        step_threshold: threshold,
        eta0_limit,
        precondition_holds,
        bound_constant,
        model_quantities: quantities.conservative(),
    };
    Ok(Prepared {
        config: config.clone(),
        model,
        slope,
        spec,
        schedule,
        theory,
        notes,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub experiment_id: String,
    pub t: u64,
    pub metric: Metric,
    pub mean: f64,
    pub stderr: f64,
    /// Replications aggregated; 0 marks an exact oracle value.
    pub n: u64,
    pub min: f64,
    pub max: f64,
    pub theory_exponent: Option<f64>,
    pub theory_log_factor: Option<bool>,
    pub bound_value: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFit {
    pub metric: Metric,
    pub window: [u64; 2],
    pub fit: Option<SlopeFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    MonteCarlo,
    Oracle,
}

/// Aggregated result of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub config_hash: String,
    pub library_version: String,
    pub mode: RecordMode,
    pub replications: u64,
    pub theory: TheoryAttachment,
    pub rows: Vec<RecordRow>,
    pub fits: Vec<MetricFit>,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
}

impl ExperimentRecord {
    pub fn rows_for(&self, metric: Metric) -> impl Iterator<Item = &RecordRow> {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn fit_for(&self, metric: Metric) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.metric == metric).and_then(|f| f.fit.as_ref())
    }

    /// Every reported bound holds.
    pub fn bounds_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.bound_satisfied != Some(false))
    }
}

struct Stats {
    mean: f64,
    stderr: f64,
    min: f64,
    max: f64,
}

fn stats(values: &[f64]) -> Stats {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = if values.len() > 1 {
        compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0)
    } else {
        0.0
    };
    Stats {
        mean,
        stderr: (var / n).sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn row(p: &Prepared, t: u64, metric: Metric, s: Stats, n: u64) -> RecordRow {
    let theory = &p.theory;
    let covered = metric == theory.metric;
    let bound = if covered { theory.bound_at(t, p.config.horizon) } else { None };
    RecordRow {
        experiment_id: p.config.id.clone(),
        t,
        metric,
        mean: s.mean,
        stderr: s.stderr,
        n,
        min: s.min,
        max: s.max,
        theory_exponent: covered.then_some(theory.rate.exponent),
        theory_log_factor: covered.then_some(theory.rate.log_factor),
        bound_value: bound,
        bound_satisfied: bound.map(|b| s.mean <= b),
    }
}

fn fits(config: &ExperimentConfig, rows: &[RecordRow]) -> Vec<MetricFit> {
    let (lo, hi) = config.fit_window();
    [Metric::Prediction, Metric::Estimation]
        .into_iter()
        .map(|metric| {
            let data: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.metric == metric)
                .map(|r| (r.t as f64, r.mean))
                .collect();
            let (fit, error) = match slope_fit(&data, (lo as f64, hi as f64)) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            MetricFit {
                metric,
                window: [lo, hi],
                fit,
                error,
            }
        })
        .collect()
}

fn check_budget(config: &ExperimentConfig) -> Result<()> {
    let work = config.work();
    if work > config.budget() {
        return Err(Error::Budget {
            estimated: work,
            budget: config.budget(),
        });
    }
    Ok(())
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

/// Run the prepared configuration's replications and aggregate them.
///
/// Replications run on a pool of `threads` workers (all cores when `None`)
/// and are merged in replication order, so the result does not depend on
/// the thread count.
pub fn run_prepared(p: &Prepared, threads: Option<usize>) -> Result<ExperimentRecord> {
    check_budget(&p.config)?;
    let grid = p.config.record_steps();
    let pool = thread_pool(threads)?;
    let n = p.config.replications;
    let runs: Vec<Vec<TrajectoryPoint>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|rep| {
                sgd::run(&p.model, &p.slope, p.spec, &p.schedule, p.config.horizon, &grid, rep).map_err(|e| match e {
                    Error::Numeric { step, message } => Error::Numeric {
                        step,
                        message: format!("replication {rep} (seed {}): {message}", p.spec.seed),
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::with_capacity(2 * grid.len());
    let mut buf = vec![0.0; runs.len()];
    for (k, &t) in grid.iter().enumerate() {
        for metric in [Metric::Prediction, Metric::Estimation] {
            for (b, run) in buf.iter_mut().zip(&runs) {
                *b = match metric {
                    Metric::Prediction => run[k].prediction,
                    Metric::Estimation => run[k].estimation,
                };
            }
            rows.push(row(p, t, metric, stats(&buf), n));
        }
    }
    Ok(ExperimentRecord {
        experiment_id: p.config.id.clone(),
        config_hash: p.config.hash(),
        library_version: LIBRARY_VERSION.to_string(),
        mode: RecordMode::MonteCarlo,
        replications: n,
        theory: p.theory.clone(),
        fits: fits(&p.config, &rows),
        rows,
        notes: p.notes.clone(),
        config: p.config.clone(),
    })
}

/// Prepare and run `config`.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentRecord> {
    run_prepared(&prepare(config)?, threads)
}

/// Expected errors from the exact moment recursion instead of sampling.
pub fn run_oracle(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let p = prepare(config)?;
    let grid = p.config.record_steps();
    let traj = oracle_trajectory(&p.model, &p.slope, &p.spec, &p.schedule, p.config.horizon, &grid)?;
    let mut rows = Vec::with_capacity(2 * grid.len());
    for point in &traj {
        for (metric, v) in [(Metric::Prediction, point.prediction), (Metric::Estimation, point.estimation)] {
            let s = Stats {
                mean: v,
                stderr: 0.0,
                min: v,
                max: v,
            };
            rows.push(row(&p, point.t, metric, s, 0));
        }
    }
    Ok(ExperimentRecord {
        experiment_id: p.config.id.clone(),
        config_hash: p.config.hash(),
        library_version: LIBRARY_VERSION.to_string(),
        mode: RecordMode::Oracle,
        replications: 0,
        theory: p.theory.clone(),
        fits: fits(&p.config, &rows),
        rows,
        notes: p.notes,
        config: p.config,
    })
}
