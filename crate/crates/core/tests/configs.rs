use std::path::Path;

use sgdlab::harness::{plan_sweep, prepare, ExperimentConfig, Theorem};
use sgdlab::theory::theta_for_prediction;

fn configs_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn shipped_configs_parse_and_prepare() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let points = if text.contains("[sweep]") {
            plan_sweep(&text, |_| {}).unwrap().points
        } else {
            vec![ExperimentConfig::load(&path).unwrap()]
        };
        for cfg in &points {
            let p = prepare(cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(p.theory.eta0 > 0.0);
        }
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn hash_ignores_formatting_but_not_values() {
    let path = configs_dir().join("quickstart.toml");
    let text = std::fs::read_to_string(&path).unwrap();
    let a = ExperimentConfig::from_toml_str(&text).unwrap();
    let reformatted = text.replace(" = ", "=").replace("# Small", "# A small");
    let b = ExperimentConfig::from_toml_str(&reformatted).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = ExperimentConfig::from_toml_str(&text.replace("seed = 1", "seed = 2")).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn saturation_sweep_delegates_theta() {
    let text = std::fs::read_to_string(configs_dir().join("saturation-sweep.toml")).unwrap();
    let plan = plan_sweep(&text, |_| {}).unwrap();
    for cfg in &plan.points {
        let p = prepare(cfg).unwrap();
        assert_eq!(p.theory.theorem, Theorem::OnlinePrediction);
        let theta = theta_for_prediction(cfg.slope.r, cfg.theory.s).unwrap();
        assert_eq!(p.theory.schedule_exponent, theta);
        assert_eq!(theta, 0.5);
    }
}

#[test]
fn default_steps_respect_threshold() {
    let text = std::fs::read_to_string(configs_dir().join("quickstart.toml")).unwrap();
    let cfg = ExperimentConfig::from_toml_str(&text.replace("eta0 = 1.0", "eta0 = \"auto\"")).unwrap();
    let p = prepare(&cfg).unwrap();
    assert!(p.theory.precondition_holds);
    assert!(p.theory.eta0 <= p.theory.step_threshold.truncated);
    if let Some(t) = p.theory.step_threshold.tail_corrected {
        assert!(p.theory.eta0 <= t);
    }
}
