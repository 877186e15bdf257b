use crowdpriv_core::cost_model::CostParams;
use crowdpriv_core::mechanisms::{CoinPair, EpsilonReading, MechanismSpec};
use crowdpriv_core::simulator::{generate_population, run_simulation, Poi, ScenarioConfig};
use proptest::prelude::*;

fn table_scenario() -> ScenarioConfig {
    // One POI visited with probability 0.8 by each of 1000 participants.
    ScenarioConfig {
        total_population: 1001,
        n_private_participants: 1000,
        n_nonprivate: 1,
        pois: vec![Poi::flat("poi", "POI", 1000, 0.8)],
        epoch_length: 60,
        horizon: 100,
        start_time: 0,
        mechanism: MechanismSpec::randomized_response(CoinPair::new(0.3, 0.3).unwrap()),
        cost_params: CostParams { n_private: 1000, n_nonprivate: 1, ..CostParams::default() },
        seed: 77,
        epsilon_reading: EpsilonReading::YesDirection,
    }
}

#[test]
fn embedded_table_scenario_is_unbiased() {
    let report = run_simulation(&table_scenario()).unwrap();
    let n = report.per_epoch.len() as f64;
    let mean_est = report.per_epoch.iter().map(|r| r.estimate.unwrap().y_a_raw).sum::<f64>() / n;
    let mean_truth = report.per_epoch.iter().map(|r| r.true_count as f64).sum::<f64>() / n;
    // Presence is Bernoulli(0.8), so truth itself wanders around 800.
    assert!((mean_truth - 800.0).abs() < 4.0 * (1000.0f64 * 0.16).sqrt() / 10.0);
    let se = (50.90f64.powi(2) + 160.0).sqrt() / 10.0;
    assert!((mean_est - 800.0).abs() < 4.0 * se, "mean estimate {mean_est}");
    assert!((mean_est - mean_truth).abs() < 4.0 * 50.90 / 10.0);
}

#[test]
fn identical_configs_identical_reports() {
    let mut cfg = ScenarioConfig::campus();
    cfg.horizon = 20;
    let a = run_simulation(&cfg).unwrap();
    let b = run_simulation(&cfg).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(
        serde_json::to_vec(&a.summary()).unwrap(),
        serde_json::to_vec(&b.summary()).unwrap()
    );
    cfg.seed += 1;
    let c = run_simulation(&cfg).unwrap();
    assert_ne!(a.per_epoch, c.per_epoch);
}

#[test]
fn gym_noon_count_is_binomial() {
    let mut cfg = ScenarioConfig::campus();
    cfg.total_population = 10_000;
    cfg.n_private_participants = 5_000;
    cfg.n_nonprivate = 2_000;
    cfg.start_time = 12 * 3600;
    cfg.horizon = 1;
    cfg.pois = vec![Poi::flat("gym", "Gym", 6000, 0.2)];
    let owners = generate_population(&cfg).unwrap();
    let at_gym = owners.iter().filter(|o| o.presence_trace[0] == Some(0)).count() as f64;
    assert!((at_gym - 2000.0).abs() < 4.0 * (10_000.0f64 * 0.2 * 0.8).sqrt(), "{at_gym}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ground_truth_conservation(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        let mut cfg = table_scenario();
        cfg.seed = seed;
        cfg.total_population = 300;
        cfg.n_private_participants = 100;
        cfg.cost_params.n_private = 100;
        cfg.horizon = 12;
        cfg.pois = vec![Poi::flat("a", "A", 10, a), Poi::flat("b", "B", 10, b), Poi::flat("c", "C", 10, c)];
        let owners = generate_population(&cfg).unwrap();
        for epoch in 0..cfg.horizon as usize {
            let present = owners.iter().filter(|o| o.presence_trace[epoch].is_some()).count();
            let per_poi: usize = (0..3u16)
                .map(|k| owners.iter().filter(|o| o.presence_trace[epoch] == Some(k)).count())
                .sum();
            prop_assert!(per_poi <= present && present <= owners.len());
        }
        let report = run_simulation(&cfg).unwrap();
        prop_assert!((0.0..=1.0).contains(&report.coverage_fraction));
        for r in &report.per_epoch {
            prop_assert!(r.true_count <= r.population_count);
        }
    }
}
