//! Cartesian parameter sweeps over a template configuration.
//!
//! A sweep file is an experiment config plus a `[sweep]` table:
//!
//! ```toml
//! [sweep]
//! budget = 1e9
//! axes = { "slope.r" = [0.25, 1.0], "theory.s" = [0.5, 1.0] }
//! ```
//!
//! Axes are dotted paths into the template. Points are enumerated with the
//! first axis (in key order) varying slowest and named `<id>-<index>`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{set_dotted, ExperimentConfig, DEFAULT_BUDGET};
use crate::harness::experiment::{prepare, run_prepared, ExperimentRecord};
use crate::theory::{slope_fit, SlopeFit};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axes: toml::Table,
    #[serde(default)]
    budget: Option<f64>,
}

/// Expanded sweep: one validated config per grid point.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub id: String,
    pub axes: Vec<String>,
    /// Axis values of each point, rendered as TOML.
    pub values: Vec<Vec<String>>,
    pub points: Vec<ExperimentConfig>,
    pub budget: f64,
}

impl SweepPlan {
    pub fn work(&self) -> f64 {
        self.points.iter().map(|p| p.work()).sum()
    }
}

/// Parse a sweep file, apply `adjust` to every point (command line
/// overrides), and refuse if the total work exceeds the budget.
pub fn plan_sweep(text: &str, adjust: impl Fn(&mut ExperimentConfig)) -> Result<SweepPlan> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Validation(format!("sweep: {}", e.message())))?;
    let section = table
        .remove("sweep")
        .ok_or_else(|| Error::Validation("sweep file needs a [sweep] table".into()))?;
    let section: SweepSection = section
        .try_into()
        .map_err(|e: toml::de::Error| Error::Validation(format!("sweep: {}", e.message())))?;
    if let Some(b) = section.budget {
        if !(b > 0.0) {
            return Err(Error::Validation("sweep.budget must be positive".into()));
        }
    }
    let mut axes = Vec::new();
    let mut grids = Vec::new();
    for (name, values) in section.axes {
        let values = match values {
            toml::Value::Array(v) if !v.is_empty() => v,
            _ => return Err(Error::Validation(format!("sweep axis {name:?} must be a non-empty array"))),
        };
        if name == "id" {
            return Err(Error::Validation("the id cannot be swept".into()));
        }
        axes.push(name);
        grids.push(values);
    }
    if axes.is_empty() {
        return Err(Error::Validation("sweep needs at least one axis".into()));
    }
    let id = table
        .get("id")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Validation("sweep template needs a string id".into()))?
        .to_string();

    let count: usize = grids.iter().map(Vec::len).product();
    let mut points = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for index in 0..count {
        let mut t = table.clone();
        let mut rem = index;
        let mut picked = vec![String::new(); axes.len()];
        for k in (0..axes.len()).rev() {
            let v = &grids[k][rem % grids[k].len()];
            rem /= grids[k].len();
            set_dotted(&mut t, &axes[k], v.clone())?;
            picked[k] = v.to_string();
        }
        t.insert("id".into(), toml::Value::String(format!("{id}-{index}")));
        let mut cfg: ExperimentConfig = t
            .try_into()
            .map_err(|e: toml::de::Error| Error::Validation(format!("sweep point {index}: {}", e.message())))?;
        adjust(&mut cfg);
        cfg.validate()?;
        points.push(cfg);
        values.push(picked);
    }
    let budget = section.budget.unwrap_or(DEFAULT_BUDGET);
    let plan = SweepPlan {
        id,
        axes,
        values,
        points,
        budget,
    };
    let work = plan.work();
    if work > budget {
        return Err(Error::Budget {
            estimated: work,
            budget,
        });
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment_id: String,
    pub axis_values: Vec<String>,
    pub theory_exponent: f64,
    pub theory_log_factor: bool,
    /// Fitted log-log slope of the theorem's metric over the fit window.
    pub fitted_exponent: Option<f64>,
    pub fit_points: Option<usize>,
    pub precondition_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub id: String,
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<ExperimentRecord>,
    pub summary: SweepSummary,
}

/// Run every point in order, each with `threads` replication workers.
pub fn run_sweep(plan: &SweepPlan, threads: Option<usize>) -> Result<SweepResult> {
    let prepared = plan.points.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(prepared.len());
    let mut rows = Vec::with_capacity(prepared.len());
    for (p, values) in prepared.iter().zip(&plan.values) {
        let rec = run_prepared(p, threads)?;
        let fit = rec.fit_for(rec.theory.metric);
        rows.push(SweepRow {
            experiment_id: rec.experiment_id.clone(),
            axis_values: values.clone(),
            theory_exponent: rec.theory.rate.exponent,
            theory_log_factor: rec.theory.rate.log_factor,
            fitted_exponent: fit.map(|f| f.slope),
            fit_points: fit.map(|f| f.points),
            precondition_holds: rec.theory.precondition_holds,
        });
        records.push(rec);
    }
    Ok(SweepResult {
        records,
        summary: SweepSummary {
            id: plan.id.clone(),
            axes: plan.axes.clone(),
            rows,
        },
    })
}

/// Fit the terminal error of the theorem's metric against the horizon,
/// for sweeps over `horizon`.
pub fn terminal_fit(records: &[ExperimentRecord]) -> Result<SlopeFit> {
    let data: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|rec| {
            let t = rec.config.horizon;
            rec.rows_for(rec.theory.metric)
                .find(|r| r.t == t)
                .map(|r| (t as f64, r.mean))
        })
        .collect();
    let lo = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let hi = data.iter().map(|d| d.0).fold(0.0, f64::max);
    slope_fit(&data, (lo, hi))
}
