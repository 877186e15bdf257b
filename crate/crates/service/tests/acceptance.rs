//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p crowdpriv-service --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use crowdpriv_core::cost_model::{base_cost, breakeven_epsilon, nonprivate_cost, private_cost, CostParams};
use crowdpriv_core::estimation::{
    analytic_error_oracle, monte_carlo_estimates, relative_error_mc, ErrorTrialConfig,
};
use crowdpriv_core::mechanisms::{
    dp_ratio_check, laplace_sample, laplace_scale, rr_privacy_level, CoinPair, MechanismSpec,
    RandomSource,
};
use crowdpriv_core::protocol::{
    sign_query, AggregateEstimate, Aggregator, AggregatorApi, AggregatorConfig, AnalystId,
    Ed25519Signer, Keyring, Nonce, Payload, PoiId, ProtocolError, PublicKeyId, Query, QueryId,
    Response,
};
use crowdpriv_core::simulator::{
    run_simulation, run_simulation_with, scenario_aggregator, Poi, ScenarioConfig,
};
use crowdpriv_service::commands::{campus_scenario, TABLE1_COINS};
use crowdpriv_service::respond::owner_response;
use crowdpriv_service::{run_respond, BackgroundServer, HttpAggregator, RespondConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

const TABLE1_EPSILON: [f64; 9] = [0.8873, 0.5390, 0.3895, 1.7918, 1.2528, 0.9808, 3.4340, 2.7726, 2.3979];
const TABLE1_ETA: [f64; 9] = [0.1958, 0.1833, 0.1333, 0.0958, 0.0875, 0.0708, 0.0569, 0.0542, 0.0514];

fn coins(p: f64, q: f64) -> CoinPair {
    CoinPair::new(p, q).unwrap()
}

fn criterion_1() -> Outcome {
    for (&(p, q), &expected) in TABLE1_COINS.iter().zip(&TABLE1_EPSILON) {
        let eps = rr_privacy_level(coins(p, q)).unwrap().epsilon_yes;
        ensure!(
            format!("{eps:.4}") == format!("{expected:.4}"),
            "(p={p}, q={q}) gave {eps:.6}, expected {expected:.4}"
        );
    }
    Ok("all nine values match to 4 decimals".into())
}

fn criterion_2() -> Outcome {
    let params = CostParams::default();
    ensure!(base_cost(&params) == 30.0, "E = {}", base_cost(&params));
    let table = [
        (2.3979, 1_500_008.0),
        (1.2528, 375_020.0),
        (0.8873, 214_285.0),
        (0.539, 107_144.0),
        (0.3895, 71_436.0),
    ];
    let mut worst: f64 = 0.0;
    for (eps, expected) in table {
        let cost = private_cost(eps, &params).unwrap();
        ensure!((cost - expected).abs() <= 10.0, "eps {eps}: {cost:.2} vs {expected}");
        worst = worst.max((cost - expected).abs());
    }
    Ok(format!("max deviation {worst:.2}"))
}

fn criterion_3() -> Outcome {
    let params = CostParams::new(60.0, 0.5, 0.8, 2000, 5000).unwrap();
    ensure!(nonprivate_cost(&params) == 96_000.0, "non-private {}", nonprivate_cost(&params));
    ensure!(base_cost(&params) == 30.0, "base {}", base_cost(&params));
    Ok("96000 and 30 exactly".into())
}

fn criterion_4() -> Outcome {
    let params = CostParams::default();
    let b = breakeven_epsilon(&params).unwrap();
    ensure!((b - 0.4947).abs() <= 0.0005, "breakeven {b}");
    ensure!((b - 1.64f64.ln()).abs() < 1e-12, "breakeven {b} is not ln(1.64)");
    let c = private_cost(0.0083, &params).unwrap();
    ensure!((c - 1250.0).abs() <= 1.0, "cost at 0.0083 = {c}");
    Ok(format!("breakeven {b:.4}, cost(0.0083) {c:.2}"))
}

fn criterion_5() -> Outcome {
    const RUNS: u64 = 10_000;
    let mut eta = [0.0; 9];
    let mut worst_bias_ratio: f64 = 0.0;
    let mut worst_eta_gap: f64 = 0.0;
    for (i, &(p, q)) in TABLE1_COINS.iter().enumerate() {
        let cfg = ErrorTrialConfig {
            n: 1000,
            true_yes: 800,
            coins: coins(p, q),
            runs: RUNS,
            seed: 0xacce_0000 + i as u64,
        };
        let oracle = analytic_error_oracle(&cfg).unwrap();
        let estimates = monte_carlo_estimates(&cfg).unwrap();
        let mean = estimates.iter().sum::<f64>() / RUNS as f64;
        let bound = 4.0 * oracle.std_exact / (RUNS as f64).sqrt();
        ensure!((mean - 800.0).abs() < bound, "(p={p}, q={q}) mean {mean:.3}, bound {bound:.3}");
        worst_bias_ratio = worst_bias_ratio.max((mean - 800.0).abs() / bound);

        eta[i] = relative_error_mc(&cfg).unwrap();
        let gap = (eta[i] - oracle.expected_abs_rel_error).abs() / oracle.expected_abs_rel_error;
        ensure!(gap <= 0.10, "(p={p}, q={q}) eta {:.5} vs oracle {:.5}", eta[i], oracle.expected_abs_rel_error);
        worst_eta_gap = worst_eta_gap.max(gap);
    }
    // Grid index is 3 * p_index + q_index.
    for a in 0..3 {
        for b in 0..2 {
            for (lo, hi) in [(3 * a + b, 3 * a + b + 1), (3 * b + a, 3 * (b + 1) + a)] {
                ensure!(eta[hi] <= eta[lo], "eta not monotone between cells {lo} and {hi}");
                ensure!(
                    (eta[hi] < eta[lo]) == (TABLE1_ETA[hi] < TABLE1_ETA[lo]),
                    "ordering of cells {lo} and {hi} differs from the reference eta column"
                );
            }
        }
    }
    Ok(format!(
        "bias within {:.0}% of the 4-SE bound, eta within {:.1}% of oracle, ordering matches",
        worst_bias_ratio * 100.0,
        worst_eta_gap * 100.0
    ))
}

fn criterion_6() -> Outcome {
    for &(p, q) in &TABLE1_COINS {
        let c = coins(p, q);
        let check = dp_ratio_check(c).unwrap();
        let strict = rr_privacy_level(c).unwrap().epsilon_strict;
        ensure!(check.satisfies, "(p={p}, q={q}) violates its bound");
        let target = strict.exp();
        let rel = (check.max_observed_ratio - target).abs() / target;
        ensure!(rel <= 1e-12, "(p={p}, q={q}) ratio {} vs {target}", check.max_observed_ratio);
    }
    Ok("nine pairs tight at exp(epsilon_strict)".into())
}

fn criterion_7() -> Outcome {
    const SAMPLES: usize = 1_000_000;
    let mut notes = Vec::new();
    for (eps, sens) in [(0.5, 1.0), (1.0, 1.0), (0.1, 2.0)] {
        let scale = laplace_scale(eps, sens).unwrap();
        let mut rng = RandomSource::derive(7, format!("laplace/{eps}/{sens}").as_bytes());
        let xs: Vec<f64> = (0..SAMPLES).map(|_| laplace_sample(scale, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / SAMPLES as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / SAMPLES as f64;
        let target = 2.0 * scale * scale;
        ensure!(mean.abs() < 0.01 * scale, "scale {scale}: mean {mean}");
        ensure!((var - target).abs() < 0.05 * target, "scale {scale}: variance {var} vs {target}");
        notes.push(format!("b={scale}: var/2b^2={:.4}", var / target));
    }
    Ok(notes.join(", "))
}

fn one_epoch_query(id: &str, mechanism: MechanismSpec) -> Query {
    Query {
        query_id: QueryId::new(id),
        analyst_id: AnalystId::new("acceptance"),
        poi_id: PoiId::new("gym"),
        start_time: 0,
        end_time: 300,
        epoch_length: 300,
        mechanism,
    }
}

fn test_aggregator(signer: &Ed25519Signer, noise_seed: u64) -> Arc<Aggregator> {
    let keyring = Keyring::from_entries(&[signer.key_entry(AnalystId::new("acceptance"))]).unwrap();
    Arc::new(Aggregator::new(keyring, AggregatorConfig::simulation(noise_seed)))
}

fn criterion_8() -> Outcome {
    let signer = Ed25519Signer::from_seed(PublicKeyId::new("acceptance-key"), [3; 32]);
    let respond = RespondConfig {
        owners: 1000,
        true_yes: 800,
        seed: 2017,
        now: 0,
        ..RespondConfig::default()
    };

    let server = BackgroundServer::start("127.0.0.1:0", test_aggregator(&signer, 1)).unwrap();
    let http = HttpAggregator::new(&server.base_url()).unwrap();
    let local = test_aggregator(&signer, 1);

    let mut detail = String::new();
    for mechanism in [
        MechanismSpec::randomized_response(coins(0.3, 0.3)),
        MechanismSpec::laplace(0.5, 1.0).unwrap(),
    ] {
        let q = one_epoch_query(
            match mechanism {
                MechanismSpec::RandomizedResponse { .. } => "rr",
                MechanismSpec::Laplace { .. } => "laplace",
            },
            mechanism,
        );
        let sq = sign_query(q.clone(), &signer);
        http.register_query(&sq, 0).map_err(|e| e.to_string())?;
        local.register_query(&sq, 0).map_err(|e| e.to_string())?;
    }
    let sent = run_respond(&http, &respond).map_err(|e| e.to_string())?;
    run_respond(local.as_ref(), &respond).map_err(|e| e.to_string())?;
    ensure!(sent.submitted == 2000, "submitted {}", sent.submitted);

    let rr = http.close_epoch(&QueryId::new("rr"), 0, 300).map_err(|e| e.to_string())?;
    ensure!(rr.n_responses == 1000, "n_responses {}", rr.n_responses);
    let sum_bound = 4.0 * 233.1f64.sqrt();
    ensure!((rr.raw_sum - 450.0).abs() <= sum_bound, "raw_sum {}", rr.raw_sum);
    let AggregateEstimate::RandomizedResponse(est) = rr.estimate else {
        return Err(format!("unexpected estimate {:?}", rr.estimate));
    };
    ensure!((est.y_a_raw - 800.0).abs() <= 4.0 * 50.90, "estimate {}", est.y_a_raw);
    ensure!(http.get_aggregate(&QueryId::new("rr"), 0).map_err(|e| e.to_string())? == rr, "stored aggregate differs");
    detail.push_str(&format!("HTTP raw_sum {} estimate {:.1}", rr.raw_sum, est.y_a_raw));

    for id in ["rr", "laplace"] {
        let a = local.close_epoch(&QueryId::new(id), 0, 300).map_err(|e| e.to_string())?;
        let b = http.close_epoch(&QueryId::new(id), 0, 300).map_err(|e| e.to_string())?;
        ensure!(a == b, "{id}: in-process {a:?} vs HTTP {b:?}");
    }

    // Whole simulated scenarios, both mechanisms.
    for mechanism in [
        MechanismSpec::randomized_response(coins(0.6, 0.3)),
        MechanismSpec::laplace(1.0, 1.0).unwrap(),
    ] {
        let cfg = ScenarioConfig {
            total_population: 500,
            n_private_participants: 300,
            n_nonprivate: 100,
            pois: vec![Poi::flat("gym", "Gym", 150, 0.3), Poi::flat("library", "Library", 200, 0.2)],
            epoch_length: 60,
            horizon: 5,
            start_time: 0,
            mechanism,
            cost_params: CostParams::new(60.0, 0.5, 0.8, 100, 300).unwrap(),
            seed: 88,
            epsilon_reading: Default::default(),
        };
        let in_process = run_simulation(&cfg).map_err(|e| e.to_string())?;
        let srv = BackgroundServer::start("127.0.0.1:0", Arc::new(scenario_aggregator(&cfg))).unwrap();
        let api = HttpAggregator::new(&srv.base_url()).unwrap();
        let over_http = run_simulation_with(&cfg, &api).map_err(|e| e.to_string())?;
        ensure!(in_process == over_http, "simulation reports differ for {mechanism:?}");
    }
    detail.push_str("; in-process and HTTP aggregates identical for both mechanisms");
    Ok(detail)
}

fn criterion_9() -> Outcome {
    const SUBMITTERS: u64 = 16;
    const PER: u64 = 1000;
    let signer = Ed25519Signer::from_seed(PublicKeyId::new("acceptance-key"), [3; 32]);
    let agg = test_aggregator(&signer, 0);
    let q = one_epoch_query("conc", MechanismSpec::randomized_response(coins(0.3, 0.3)));
    agg.register_query(&sign_query(q.clone(), &signer), 0).map_err(|e| e.to_string())?;

    let ledgers: Vec<(u64, f64, u64)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..SUBMITTERS)
            .map(|t| {
                let agg = &agg;
                let q = &q;
                s.spawn(move || {
                    let (mut accepted, mut sum, mut dup_rejected) = (0u64, 0.0, 0u64);
                    for i in 0..PER {
                        let owner = t * PER + i;
                        let r = owner_response(q, 0, owner, !owner.is_multiple_of(5), 41);
                        agg.submit_response(&r).unwrap();
                        accepted += 1;
                        sum += r.payload.value();
                        if i % 10 == 0 {
                            let mut replay = r.clone();
                            replay.payload = Payload::Bit(true);
                            if agg.submit_response(&replay) == Err(ProtocolError::DuplicateNonce) {
                                dup_rejected += 1;
                            }
                        }
                    }
                    (accepted, sum, dup_rejected)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let accepted: u64 = ledgers.iter().map(|l| l.0).sum();
    let ledger_sum: f64 = ledgers.iter().map(|l| l.1).sum();
    let dups: u64 = ledgers.iter().map(|l| l.2).sum();
    let result = agg.close_epoch(&q.query_id, 0, 300).map_err(|e| e.to_string())?;
    ensure!(accepted == SUBMITTERS * PER, "accepted {accepted}");
    ensure!(dups == SUBMITTERS * PER / 10, "duplicates rejected {dups}");
    ensure!(result.n_responses == 16_000, "n_responses {}", result.n_responses);
    ensure!(result.raw_sum == ledger_sum, "raw_sum {} vs ledger {ledger_sum}", result.raw_sum);
    let late = Response {
        query_id: q.query_id.clone(),
        epoch_index: 0,
        payload: Payload::Bit(true),
        nonce: Nonce([0xff; 16]),
    };
    ensure!(agg.submit_response(&late) == Err(ProtocolError::EpochClosed(0)), "closed epoch accepted a response");
    Ok(format!("16000 accepted, raw_sum {ledger_sum} matches ledger, {dups} replays rejected"))
}

fn criterion_10() -> Outcome {
    let mut cfg = campus_scenario();
    cfg.horizon = 200;
    cfg.mechanism = MechanismSpec::randomized_response(coins(0.3, 0.9));
    let a = run_simulation(&cfg).map_err(|e| e.to_string())?;
    let b = run_simulation(&cfg).map_err(|e| e.to_string())?;
    ensure!(
        (0.90..=0.99).contains(&a.coverage_fraction),
        "coverage {}",
        a.coverage_fraction
    );
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).map_err(|e| e.to_string())?;
    b.write_csv(&mut y).map_err(|e| e.to_string())?;
    ensure!(x == y, "reports differ between identical runs");
    Ok(format!(
        "coverage {:.3} over {} epoch records, reports byte-identical",
        a.coverage_fraction,
        a.per_epoch.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("table 1 epsilon column", criterion_1),
        ("table 2 private costs", criterion_2),
        ("non-private baseline", criterion_3),
        ("breakeven epsilon", criterion_4),
        ("estimator unbiasedness", criterion_5),
        ("dp ratio bound", criterion_6),
        ("laplace moments", criterion_7),
        ("end-to-end protocol", criterion_8),
        ("concurrency conservation", criterion_9),
        ("simulation calibration", criterion_10),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            Err(panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("[PASS] criterion {:>2}: {name} ({msg}) [{secs:.2}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {:>2}: {name}: {msg} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
