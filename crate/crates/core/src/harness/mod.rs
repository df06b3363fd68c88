//! Configuration-driven experiments: TOML configs, replicated runs, sweeps,
//! verification suites and CSV/JSON output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod sweep;
pub mod verify;

pub use config::ExperimentConfig;
pub use experiment::{
    prepare, run_experiment, run_oracle, run_prepared, ExperimentRecord, Metric, RecordMode, RecordRow, Theorem,
    LIBRARY_VERSION,
};
pub use output::{Format, CSV_HEADER};
pub use sweep::{plan_sweep, run_sweep, SweepPlan, SweepResult, SweepSummary};
pub use verify::{verify_suite, Selector, VerifyReport};
