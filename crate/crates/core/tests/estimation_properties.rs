use crowdpriv_core::estimation::{
    analytic_error_oracle, estimate_true_yes, monte_carlo_estimates, relative_error_mc,
    AggregateCounts, ErrorTrialConfig,
};
use crowdpriv_core::mechanisms::{rr_response_prob, CoinPair};
use proptest::prelude::*;

proptest! {
    /// At the expected randomized count the estimator returns the truth.
    #[test]
    fn inversion_identity(p in 0.05f64..=1.0, q in 0.0f64..=1.0, n in 1u64..5000, frac in 0.0f64..=1.0) {
        let coins = CoinPair::new(p, q).unwrap();
        let true_yes = (frac * n as f64).floor();
        let expected_yes = true_yes * rr_response_prob(true, coins)
            + (n as f64 - true_yes) * rr_response_prob(false, coins);
        // Feed the exact expectation through the closed form, bypassing integer rounding.
        let raw = (expected_yes - (1.0 - p) * q * n as f64) / p;
        prop_assert!((raw - true_yes).abs() < 1e-6 * n as f64);
    }

    #[test]
    fn estimate_invariants(p in 0.05f64..=1.0, q in 0.0f64..=1.0, n in 1u64..5000, frac in 0.0f64..=1.0) {
        let coins = CoinPair::new(p, q).unwrap();
        let yes = (frac * n as f64) as u64;
        let r = estimate_true_yes(AggregateCounts::new(yes, n).unwrap(), coins).unwrap();
        prop_assert_eq!(r.y_a_clamped, r.y_a_raw.max(0.0).min(n as f64));
        prop_assert!(r.ci95_low <= r.y_a_raw && r.y_a_raw <= r.ci95_high);
        prop_assert!(r.std_plugin >= 0.0);
    }
}

const TABLE_COINS: [(f64, f64); 9] = [
    (0.3, 0.3), (0.3, 0.6), (0.3, 0.9),
    (0.6, 0.3), (0.6, 0.6), (0.6, 0.9),
    (0.9, 0.3), (0.9, 0.6), (0.9, 0.9),
];

fn trial(p: f64, q: f64, runs: u64) -> ErrorTrialConfig {
    ErrorTrialConfig { n: 1000, true_yes: 800, coins: CoinPair::new(p, q).unwrap(), runs, seed: 0x5eed }
}

#[test]
fn oracle_matches_frozen_values() {
    // Independent closed-form values for the nine coin pairs.
    let frozen = [50.8920, 48.3046, 33.1160, 22.5093, 20.0000, 14.6059, 8.4547, 7.2008, 5.4772];
    for ((p, q), want) in TABLE_COINS.into_iter().zip(frozen) {
        let got = analytic_error_oracle(&trial(p, q, 1)).unwrap().std_exact;
        assert!((got - want).abs() < 1e-3, "({p},{q}): {got} vs {want}");
    }
}

#[test]
fn empirical_std_matches_oracle() {
    let cfg = trial(0.6, 0.6, 4000);
    let xs = monte_carlo_estimates(&cfg).unwrap();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
    let oracle = analytic_error_oracle(&cfg).unwrap().std_exact;
    assert!((sd - oracle).abs() < 0.05 * oracle, "sd {sd} oracle {oracle}");
}

#[test]
fn eta_decreases_with_p_at_fixed_q() {
    for q in [0.3, 0.6, 0.9] {
        let etas: Vec<f64> = [0.3, 0.6, 0.9]
            .iter()
            .map(|&p| relative_error_mc(&trial(p, q, 2000)).unwrap())
            .collect();
        assert!(etas[0] > etas[1] && etas[1] > etas[2], "q={q}: {etas:?}");
    }
}
