//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every tolerance is a named constant below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sgdlab::harness::output::{record_to_string, write_record};
use sgdlab::harness::sweep::terminal_fit;
use sgdlab::harness::verify::{lemma6_checks, lemma_a1_checks, oracle_checks, theorem5_checks, Check};
use sgdlab::harness::{
    plan_sweep, run_experiment, run_oracle, run_sweep, verify_suite, ExperimentConfig, Format, Metric, Selector,
};
use sgdlab::theory::{horizon_estimation_rate, omega, omega_mixed, omega_step, omega_sum, theta_for_prediction};

const QUICKSTART: &str = include_str!("../../../configs/quickstart.toml");
const ORACLE_EQUIVALENCE: &str = include_str!("../../../configs/oracle-equivalence.toml");
const ONLINE_PREDICTION: &str = include_str!("../../../configs/online-prediction-rate.toml");
const HORIZON_ESTIMATION: &str = include_str!("../../../configs/horizon-estimation-sweep.toml");
const SATURATION: &str = include_str!("../../../configs/saturation-sweep.toml");
const SATURATION_CAPACITY: &str = include_str!("../../../configs/saturation-capacity.toml");

const TRACE_REL_TOL: f64 = 1e-6;
const MC_STDERR_MULTIPLE: f64 = 4.0;
// Slack for t = 0, where both sides are the same deterministic sum.
const MC_EXACT_SLACK: f64 = 1e-12;
const DECOMPOSITION_REL_TOL: f64 = 1e-10;
const SLOPE_TOL: f64 = 0.15;
const SATURATION_GAP_TOL: f64 = 0.05;
const SEAM_TOL: f64 = 1e-12;

const BUDGET_THEOREM5: Duration = Duration::from_secs(5);
const BUDGET_LEMMA6: Duration = Duration::from_secs(30);
const BUDGET_LEMMA_A1: Duration = Duration::from_secs(60);
const BUDGET_ORACLE_MC: Duration = Duration::from_secs(5 * 60);
const BUDGET_DECOMPOSITION: Duration = Duration::from_secs(10);
const BUDGET_ONLINE_RATE: Duration = Duration::from_secs(20 * 60);
const BUDGET_HORIZON_RATE: Duration = Duration::from_secs(30 * 60);
const BUDGET_SATURATION: Duration = Duration::from_secs(30 * 60);
const BUDGET_PROPERTIES: Duration = Duration::from_secs(10 * 60);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn failed(e: impl std::fmt::Display) -> Outcome {
    outcome(false, format!("error: {e}"))
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("shipped config parses")
}

/// Run `body`, then fail it if it took longer than `budget`.
fn timed(budget: Duration, body: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = body();
    let took = start.elapsed();
    if took > budget {
        o.passed = false;
    }
    o.detail = format!("{}; runtime {:.2}s (budget {}s)", o.detail, took.as_secs_f64(), budget.as_secs());
    o
}

fn all_pass(checks: &[Check]) -> Outcome {
    let bad: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let worst = checks
        .iter()
        .filter(|c| c.threshold > 0.0)
        .map(|c| c.measured / c.threshold)
        .fold(0.0, f64::max);
    let mut detail = format!("{} checks, {} failed, worst measured/threshold {worst:.3e}", checks.len(), bad.len());
    for c in bad.iter().take(3) {
        detail.push_str(&format!("; FAILED {} ({} > {})", c.name, c.measured, c.threshold));
    }
    outcome(bad.is_empty(), detail)
}

fn theorem5() -> Outcome {
    let checks: Vec<Check> = theorem5_checks().into_iter().filter(|c| c.name.starts_with("trace identity")).collect();
    assert!(checks.iter().all(|c| c.threshold == TRACE_REL_TOL));
    all_pass(&checks)
}

fn lemma6() -> Outcome {
    let checks: Vec<Check> = lemma6_checks().into_iter().filter(|c| c.name.starts_with("sum bound")).collect();
    let violations: f64 = checks.iter().map(|c| c.measured).sum();
    let mut o = all_pass(&checks);
    o.detail = format!("{} (nu, theta, eta0) cells, {violations} violations", checks.len());
    o
}

fn lemma_a1() -> Outcome {
    all_pass(&lemma_a1_checks())
}

fn oracle_equivalence() -> Outcome {
    let c = cfg(ORACLE_EQUIVALENCE);
    let (mc, exact) = match (run_experiment(&c, None), run_oracle(&c)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return failed(e),
    };
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut steps = 0;
    for (m, o) in mc.rows_for(Metric::Prediction).zip(exact.rows_for(Metric::Prediction)) {
        assert_eq!(m.t, o.t);
        let diff = (m.mean - o.mean).abs();
        ok &= diff <= MC_STDERR_MULTIPLE * m.stderr + MC_EXACT_SLACK * o.mean;
        if m.stderr > 0.0 {
            worst = worst.max(diff / m.stderr);
        }
        steps += 1;
    }
    outcome(
        ok,
        format!(
            "{steps} recorded steps, N = {}, worst |MC - exact| = {worst:.2} stderr (tolerance {MC_STDERR_MULTIPLE})",
            mc.replications
        ),
    )
}

fn decomposition() -> Outcome {
    let checks: Vec<Check> = oracle_checks().into_iter().filter(|c| c.name.starts_with("bias + variance")).collect();
    assert!(checks.len() == 3 && checks.iter().all(|c| c.threshold == DECOMPOSITION_REL_TOL));
    all_pass(&checks)
}

fn online_prediction_rate() -> Outcome {
    let c = cfg(ONLINE_PREDICTION);
    let rec = match run_experiment(&c, None) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let theta = theta_for_prediction(c.slope.r, c.theory.s).unwrap();
    let Some(fit) = rec.fit_for(Metric::Prediction) else {
        return outcome(false, "no fit".into());
    };
    let slope_ok = (fit.slope + theta).abs() <= SLOPE_TOL;
    let bounded = rec.rows_for(Metric::Prediction).filter(|r| r.bound_value.is_some()).count();
    let tightest = rec
        .rows_for(Metric::Prediction)
        .filter_map(|r| r.bound_value.map(|b| r.mean / b))
        .fold(0.0, f64::max);
    outcome(
        slope_ok && rec.bounds_satisfied() && bounded > 0,
        format!(
            "fitted slope {:.4} vs -theta = {:.4} (tolerance {SLOPE_TOL}); bound held at {bounded} steps, max mean/bound {tightest:.3e}; step-size precondition {}",
            fit.slope,
            -theta,
            if rec.theory.precondition_holds { "met" } else { "not met" }
        ),
    )
}

fn horizon_estimation_rate_check() -> Outcome {
    let plan = match plan_sweep(HORIZON_ESTIMATION, |_| {}) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let res = match run_sweep(&plan, None) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let first = &plan.points[0];
    let target = horizon_estimation_rate(first.slope.r, first.theory.s).unwrap().exponent;
    match terminal_fit(&res.records) {
        Ok(fit) => outcome(
            (fit.slope - target).abs() <= SLOPE_TOL,
            format!(
                "{} horizons, fitted terminal slope {:.4} vs {target:.4} (tolerance {SLOPE_TOL})",
                fit.points, fit.slope
            ),
        ),
        Err(e) => failed(e),
    }
}

fn saturation() -> Outcome {
    let plan = match plan_sweep(SATURATION, |_| {}) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let res = match run_sweep(&plan, None) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let slopes: Vec<f64> = res.summary.rows.iter().filter_map(|r| r.fitted_exponent).collect();
    if slopes.len() != 2 {
        return outcome(false, "missing saturated fits".into());
    }
    let gap = (slopes[0] - slopes[1]).abs();
    let c = cfg(SATURATION_CAPACITY);
    let rec = match run_experiment(&c, None) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let s = c.theory.s;
    let target = -(2.0 - s) / (3.0 - s);
    let Some(fit) = rec.fit_for(Metric::Prediction) else {
        return outcome(false, "no fit".into());
    };
    outcome(
        gap < SATURATION_GAP_TOL && (fit.slope - target).abs() <= SLOPE_TOL,
        format!(
            "s = 1: slopes {:.4} (r = 2) and {:.4} (r = 5), gap {gap:.4} (tolerance {SATURATION_GAP_TOL}); s = {s}: slope {:.4} vs {target:.4} (tolerance {SLOPE_TOL})",
            slopes[0], slopes[1], fit.slope
        ),
    )
}

fn seams() -> (usize, bool) {
    let mut n = 0;
    let mut ok = true;
    for k in 0..1000 {
        let u = (k as f64 + 0.5) / 1000.0;
        let nu_low = 1e-3 + u * (1.0 - 1e-3);
        ok &= (omega_mixed(nu_low, 0.5) - omega_sum(nu_low, 0.5)).abs() < SEAM_TOL;
        let theta = 1e-3 + u * (0.5 - 1e-3);
        ok &= (omega_mixed(1.0, theta) - omega_step(1.0, theta)).abs() < SEAM_TOL;
        let nu = 1.0 + 49.0 * u;
        let t = nu / (nu + 1.0);
        ok &= (omega_step(nu, t) - omega_sum(nu, t)).abs() < SEAM_TOL;
        ok &= (omega(nu, t).unwrap().exponent - omega_sum(nu, t)).abs() < SEAM_TOL;
        n += 4;
    }
    (n, ok)
}

fn properties() -> Outcome {
    let report = verify_suite(Selector::All);
    let (seam_checks, seams_ok) = seams();

    let c = cfg(QUICKSTART);
    let deterministic = (|| -> sgdlab::Result<bool> {
        let a = run_experiment(&c, Some(1))?;
        let b = run_experiment(&c, Some(4))?;
        let dir_a = tempfile::tempdir()?;
        let dir_b = tempfile::tempdir()?;
        let mut same = record_to_string(&a, Format::Csv)? == record_to_string(&b, Format::Csv)?;
        for format in [Format::Csv, Format::Json] {
            let pa = write_record(&a, dir_a.path(), format)?;
            let pb = write_record(&run_experiment(&c, Some(1))?, dir_b.path(), format)?;
            same &= std::fs::read(pa)? == std::fs::read(pb)?;
        }
        Ok(same)
    })();
    let deterministic = matches!(deterministic, Ok(true));
    let failures = report.failures().count();
    outcome(
        failures == 0 && seams_ok && deterministic,
        format!(
            "{} suite checks ({failures} failed); {seam_checks} seam checks {}; outputs bit-identical across runs and thread counts: {deterministic}",
            report.checks.len(),
            if seams_ok { "agree" } else { "DISAGREE" }
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a name filter that excludes this
    // target means there is nothing to do.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }

    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("1 trace identity by quadrature", BUDGET_THEOREM5, theorem5),
        ("2 step-size sum inequality suite", BUDGET_LEMMA6, lemma6),
        ("3 appendix integral inequality suite", BUDGET_LEMMA_A1, lemma_a1),
        ("4 Monte Carlo matches exact recursion", BUDGET_ORACLE_MC, oracle_equivalence),
        ("5 bias + variance decomposition", BUDGET_DECOMPOSITION, decomposition),
        ("6 online prediction rate and bound", BUDGET_ONLINE_RATE, online_prediction_rate),
        ("7 finite-horizon estimation rate", BUDGET_HORIZON_RATE, horizon_estimation_rate_check),
        ("8 saturation and capacity uplift", BUDGET_SATURATION, saturation),
        ("9 property suites", BUDGET_PROPERTIES, properties),
    ];
    let mut all = true;
    for (name, budget, f) in criteria {
        let o = timed(budget, f);
        all &= o.passed;
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
