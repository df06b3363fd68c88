//! Experiment configuration files.
//!
//! Configurations are TOML documents. Every table rejects unknown keys, and
//! the configuration hash is the SHA-256 of its canonical JSON form (keys in
//! declaration order, numbers in shortest round-trip notation), so two
//! configurations that parse to the same values share a hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_slope, CoefficientLaw, ProcessSpec, SlopeCoefficients, SlopeTarget};
use crate::spectral::{DecayKind, EigenDecay, SpectralModel};

/// Default work budget, in coordinate updates (`replications * horizon * m`).
pub const DEFAULT_BUDGET: f64 = 1e11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Auto,
}

/// A number, or the keyword `"auto"` to let the theory pick it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr {
    Auto(Keyword),
    Value(f64),
}

impl Default for AutoOr {
    fn default() -> Self {
        AutoOr::Auto(Keyword::Auto)
    }
}

impl AutoOr {
    pub fn value(&self) -> Option<f64> {
        match *self {
            AutoOr::Auto(_) => None,
            AutoOr::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKeyword {
    Dyadic,
}

/// Steps at which errors are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordGrid {
    /// `{0, 1, 2, 4, ...}` plus the horizon.
    Named(GridKeyword),
    Steps(Vec<u64>),
}

impl Default for RecordGrid {
    fn default() -> Self {
        RecordGrid::Named(GridKeyword::Dyadic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of retained eigenvalues `m`.
    pub dimension: usize,
    pub kernel: DecayKind,
    pub covariance: DecayKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeConfig {
    pub target: SlopeTarget,
    pub r: f64,
    /// Source element `g`; defaults to `g_i = 1/i`.
    #[serde(default)]
    pub source: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    #[serde(default = "default_law")]
    pub law: CoefficientLaw,
    #[serde(default)]
    pub normalize: bool,
    pub sigma: f64,
}

fn default_law() -> CoefficientLaw {
    CoefficientLaw::Gaussian
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// `eta_t = eta_0 t^{-theta}`.
    Online {
        #[serde(default)]
        eta0: AutoOr,
        #[serde(default)]
        theta: AutoOr,
    },
    /// `eta_t = eta_0 T^{-exponent}`.
    FiniteHorizon {
        #[serde(default)]
        eta0: AutoOr,
        #[serde(default)]
        exponent: AutoOr,
    },
}

impl ScheduleConfig {
    pub fn eta0(&self) -> AutoOr {
        match *self {
            ScheduleConfig::Online { eta0, .. } | ScheduleConfig::FiniteHorizon { eta0, .. } => eta0,
        }
    }

    pub fn is_online(&self) -> bool {
        matches!(self, ScheduleConfig::Online { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    /// Capacity exponent `s` assumed by the rates and constants.
    pub s: f64,
    /// Fourth-moment constant; 3 bounds both Gaussian and Rademacher sums.
    #[serde(default = "default_c_m")]
    pub c_m: f64,
}

fn default_c_m() -> f64 {
    3.0
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record: RecordGrid,
    /// `[t_lo, t_hi]` for the log-log fit; defaults to `[max(1, T/256), T]`.
    #[serde(default)]
    pub fit_window: Option<[u64; 2]>,
    /// Work budget in coordinate updates.
    #[serde(default)]
    pub budget: Option<f64>,
    pub model: ModelConfig,
    pub slope: SlopeConfig,
    pub process: ProcessConfig,
    pub schedule: ScheduleConfig,
    pub theory: TheoryConfig,
}

fn default_replications() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Validation(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Parameter checks that do not need the materialized model.
    pub fn validate(&self) -> Result<()> {
        let id_ok = !self.id.is_empty()
            && self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
        if !id_ok {
            return Err(Error::Validation(format!(
                "id {:?} must be non-empty and use only letters, digits, '-', '_' and '.'",
                self.id
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Validation("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Validation("replications must be at least 1".into()));
        }
        if self.model.dimension == 0 {
            return Err(Error::Validation("model.dimension must be at least 1".into()));
        }
        if let RecordGrid::Steps(steps) = &self.record {
            if steps.is_empty() || steps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation("record steps must be non-empty and strictly increasing".into()));
            }
            if *steps.last().unwrap() > self.horizon {
                return Err(Error::Validation("record steps must not exceed the horizon".into()));
            }
        }
        if let Some([lo, hi]) = self.fit_window {
            if lo == 0 || lo >= hi || hi > self.horizon {
                return Err(Error::Validation(format!(
                    "fit_window [{lo}, {hi}] must satisfy 1 <= lo < hi <= horizon"
                )));
            }
        }
        if let Some(b) = self.budget {
            if !(b > 0.0) {
                return Err(Error::Validation("budget must be positive".into()));
            }
        }
        if !(self.process.sigma >= 0.0 && self.process.sigma.is_finite()) {
            return Err(Error::Validation("process.sigma must be a non-negative number".into()));
        }
        if !(self.theory.s > 0.0 && self.theory.s <= 1.0) {
            return Err(Error::Validation(format!("theory.s = {} must lie in (0, 1]", self.theory.s)));
        }
        if !(self.theory.c_m >= 1.0 && self.theory.c_m.is_finite()) {
            return Err(Error::Validation("theory.c_m must be at least 1".into()));
        }
        if !(self.slope.r > 0.0 && self.slope.r.is_finite()) {
            return Err(Error::Validation("slope.r must be positive".into()));
        }
        if let Some(e) = self.schedule.eta0().value() {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Validation("schedule.eta0 must be a non-negative number".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and echoing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Estimated work, `replications * horizon * m`.
    pub fn work(&self) -> f64 {
        self.replications as f64 * self.horizon as f64 * self.model.dimension as f64
    }

    pub fn budget(&self) -> f64 {
        self.budget.unwrap_or(DEFAULT_BUDGET)
    }

    pub fn record_steps(&self) -> Vec<u64> {
        match &self.record {
            RecordGrid::Named(GridKeyword::Dyadic) => crate::sgd::dyadic_grid(self.horizon),
            RecordGrid::Steps(s) => s.clone(),
        }
    }

    pub fn fit_window(&self) -> (u64, u64) {
        match self.fit_window {
            Some([lo, hi]) => (lo, hi),
            None => ((self.horizon >> 8).max(1), self.horizon),
        }
    }

    pub fn build_model(&self) -> Result<SpectralModel> {
        let m = self.model.dimension;
        let k = EigenDecay {
            kind: self.model.kernel.clone(),
            truncation: m,
        };
        let c = EigenDecay {
            kind: self.model.covariance.clone(),
            truncation: m,
        };
        SpectralModel::new(&k, &c)
    }

    pub fn build_slope(&self, model: &SpectralModel) -> Result<SlopeCoefficients> {
        build_slope(model, self.slope.r, self.slope.target, self.slope.source.as_deref())
    }

    pub fn process_spec(&self) -> ProcessSpec {
        ProcessSpec {
            law: self.process.law,
            normalize: self.process.normalize,
            sigma: self.process.sigma,
            seed: self.seed,
        }
    }
}

/// Set `path` (dot separated) inside a TOML table, creating tables as needed.
pub fn set_dotted(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts = path.split('.').peekable();
    let mut cur = table;
    while let Some(key) = parts.next() {
        if key.is_empty() {
            return Err(Error::Validation(format!("bad sweep axis {path:?}")));
        }
        if parts.peek().is_none() {
            cur.insert(key.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Validation(format!("sweep axis {path:?} passes through a non-table key {key:?}")))?;
    }
    Err(Error::Validation(format!("bad sweep axis {path:?}")))
}
