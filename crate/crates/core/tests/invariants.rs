use proptest::prelude::*;

use sgdlab::harness::{run_experiment, ExperimentConfig, Metric};
use sgdlab::numeric::QuadratureTolerance;
use sgdlab::oracle::spectral_polynomial_bound_check;
use sgdlab::theory::{stepsize_sum, stepsize_sum_bound, trace_identity_check};

const BASE: &str = r#"
id = "prop"
horizon = 32
replications = 4

[model]
dimension = 5
kernel = { kind = "power", exponent = 2.0 }
covariance = { kind = "power", exponent = 1.0 }

[slope]
target = "prediction"
r = 0.5

[process]
sigma = 0.3

[schedule]
kind = "online"
eta0 = 0.5

[theory]
s = 0.75
"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_identity_on_random_spectra(
        eigs in prop::collection::vec(1e-3f64..10.0, 1..20),
        s in 0.05f64..0.95,
    ) {
        let id = trace_identity_check(&eigs, s, QuadratureTolerance::default()).unwrap();
        prop_assert!(id.rel_err < 1e-6, "{id:?}");
    }

    #[test]
    fn polynomial_bound_on_random_steps(
        eigs in prop::collection::vec(1e-4f64..1.0, 1..30),
        etas in prop::collection::vec(0.0f64..1.0, 0..60),
        alpha in 0.0f64..3.0,
    ) {
        let norm = eigs.iter().copied().fold(0.0, f64::max);
        let etas: Vec<f64> = etas.iter().map(|e| e / norm).collect();
        let b = spectral_polynomial_bound_check(&eigs, &etas, alpha).unwrap();
        prop_assert!(b.holds(), "{b:?}");
    }

    #[test]
    fn stepsize_sum_below_bound(t in 1u64..3000, eta0 in 0.01f64..1.0, theta in 0.05f64..0.95, nu in 0.2f64..3.0) {
        let s = stepsize_sum(t, eta0, theta, nu).unwrap();
        let b = stepsize_sum_bound(t, eta0, theta, nu).unwrap();
        prop_assert!(s <= b, "{s} > {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn records_are_consistent(seed in 0u64..1000, reps in 1u64..6) {
        let text = BASE
            .replace("replications = 4", &format!("replications = {reps}\nseed = {seed}"));
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let rec = run_experiment(&cfg, Some(1)).unwrap();
        for row in &rec.rows {
            prop_assert_eq!(row.n, reps);
            prop_assert!(row.stderr >= 0.0);
            prop_assert!(row.min <= row.mean * (1.0 + 1e-12) && row.mean <= row.max * (1.0 + 1e-12));
        }
        // Bound cells appear only for the theorem's metric.
        prop_assert!(rec.rows_for(Metric::Estimation).all(|r| r.bound_value.is_none()));
        let again = run_experiment(&cfg, Some(2)).unwrap();
        prop_assert_eq!(rec, again);
    }
}
