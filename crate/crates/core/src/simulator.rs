//! Synthetic campus population and an end-to-end driver for the protocol.
//!
//! Every owner independently picks at most one point of interest per epoch,
//! with probabilities taken from the POIs' hour-of-day attraction profiles.
//! Participating owners answer one standing query per POI each epoch; the
//! aggregator publishes one estimate per (POI, epoch).

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost_model::{
    breakeven_epsilon, nonprivate_cost, participation_favored, private_cost, CostError, CostParams,
};
use crate::estimation::EstimateResult;
use crate::mechanisms::{
    derive_seed, rr_privacy_level, rr_randomize, CoinPair, EpsilonReading, MechanismSpec,
    RandomSource,
};
use crate::protocol::{
    sign_query, Aggregator, AggregatorApi, AggregatorConfig, AnalystId, Ed25519Signer, KeyEntry,
    Keyring, Nonce, Payload, PoiId, ProtocolError, PublicKeyId, Query, QueryId, Response,
};

pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
    #[error("protocol rejected a simulated request: {0}")]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("writing report: {0}")]
    Io(#[from] io::Error),
    #[error("writing report: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub poi_id: PoiId,
    pub name: String,
    pub capacity: u64,
    /// Visit probability for each hour of the day.
    pub attraction_profile: Vec<f64>,
}

impl Poi {
    pub fn flat(poi_id: &str, name: &str, capacity: u64, intensity: f64) -> Self {
        Self {
            poi_id: PoiId::new(poi_id),
            name: name.to_string(),
            capacity,
            attraction_profile: vec![intensity; HOURS_PER_DAY],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub total_population: u64,
    pub n_private_participants: u64,
    pub n_nonprivate: u64,
    pub pois: Vec<Poi>,
    /// Seconds.
    pub epoch_length: u64,
    /// Number of epochs.
    pub horizon: u64,
    /// Epoch-seconds timestamp of the first epoch; hour of day is taken in UTC.
    #[serde(default)]
    pub start_time: i64,
    pub mechanism: MechanismSpec,
    pub cost_params: CostParams,
    pub seed: u64,
    /// Which epsilon of a randomized-response mechanism feeds the cost model.
    #[serde(default)]
    pub epsilon_reading: EpsilonReading,
}

fn campus_profile(peaks: &[(usize, f64)]) -> Vec<f64> {
    let mut profile = vec![0.0; HOURS_PER_DAY];
    for &(hour, value) in peaks {
        profile[hour] = value;
    }
    profile
}

impl ScenarioConfig {
    /// The campus study: 42,000 students, 5,000 private participants, 2,000
    /// declining, three POIs, 200 five-minute epochs from 06:00.
    pub fn campus() -> Self {
        let gym = campus_profile(&[
            (6, 0.08), (7, 0.12), (8, 0.10), (9, 0.06), (10, 0.06), (11, 0.10),
            (12, 0.20), (13, 0.12), (14, 0.06), (15, 0.08), (16, 0.14), (17, 0.18),
            (18, 0.16), (19, 0.10), (20, 0.06), (21, 0.03), (22, 0.01),
        ]);
        let library = campus_profile(&[
            (8, 0.05), (9, 0.10), (10, 0.15), (11, 0.15), (12, 0.10), (13, 0.15),
            (14, 0.20), (15, 0.22), (16, 0.20), (17, 0.12), (18, 0.10), (19, 0.15),
            (20, 0.18), (21, 0.15), (22, 0.08), (23, 0.03),
        ]);
        let cafeteria = campus_profile(&[
            (7, 0.10), (8, 0.15), (9, 0.05), (11, 0.15), (12, 0.35), (13, 0.25),
            (14, 0.05), (17, 0.15), (18, 0.30), (19, 0.20), (20, 0.05),
        ]);
        Self {
            total_population: 42_000,
            n_private_participants: 5_000,
            n_nonprivate: 2_000,
            pois: vec![
                Poi {
                    poi_id: PoiId::new("gym"),
                    name: "Gym".into(),
                    capacity: 6_000,
                    attraction_profile: gym,
                },
                Poi {
                    poi_id: PoiId::new("library"),
                    name: "Library".into(),
                    capacity: 12_000,
                    attraction_profile: library,
                },
                Poi {
                    poi_id: PoiId::new("cafeteria"),
                    name: "Cafeteria".into(),
                    capacity: 10_000,
                    attraction_profile: cafeteria,
                },
            ],
            epoch_length: 300,
            horizon: 200,
            start_time: 6 * 3600,
            mechanism: MechanismSpec::randomized_response(
                CoinPair::new(0.3, 0.9).expect("valid coins"),
            ),
            cost_params: CostParams::default(),
            seed: 2017,
            epsilon_reading: EpsilonReading::YesDirection,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let infeasible = |m: String| Err(SimulationError::InfeasibleScenario(m));
        if self.total_population == 0 {
            return infeasible("total_population must be positive".into());
        }
        if self.n_private_participants + self.n_nonprivate > self.total_population {
            return infeasible(format!(
                "n_private_participants + n_nonprivate = {} exceeds total_population {}",
                self.n_private_participants + self.n_nonprivate,
                self.total_population
            ));
        }
        if self.epoch_length == 0 {
            return infeasible("epoch_length must be at least one second".into());
        }
        if self.horizon == 0 {
            return infeasible("horizon must be at least one epoch".into());
        }
        if self.pois.len() > usize::from(u16::MAX) {
            return infeasible("too many POIs".into());
        }
        for poi in &self.pois {
            if poi.capacity == 0 {
                return infeasible(format!("POI {} has zero capacity", poi.poi_id));
            }
            if poi.attraction_profile.len() != HOURS_PER_DAY {
                return infeasible(format!(
                    "POI {} attraction_profile has {} entries, expected 24",
                    poi.poi_id,
                    poi.attraction_profile.len()
                ));
            }
            if let Some(v) = poi.attraction_profile.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return infeasible(format!(
                    "POI {} attraction value {v} outside [0, 1]",
                    poi.poi_id
                ));
            }
        }
        let mut ids: Vec<_> = self.pois.iter().map(|p| &p.poi_id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.pois.len() {
            return infeasible("duplicate poi_id".into());
        }
        self.mechanism
            .validate()
            .map_err(|e| SimulationError::InfeasibleScenario(e.to_string()))?;
        self.cost_params
            .validate()
            .map_err(|e| SimulationError::InfeasibleScenario(e.to_string()))?;
        if self.cost_params.n_private != self.n_private_participants
            || self.cost_params.n_nonprivate != self.n_nonprivate
        {
            return infeasible(format!(
                "cost_params cohorts ({} private, {} non-private) disagree with the scenario ({}, {})",
                self.cost_params.n_private,
                self.cost_params.n_nonprivate,
                self.n_private_participants,
                self.n_nonprivate
            ));
        }
        Ok(())
    }

    pub fn hour_of_epoch(&self, epoch_index: u64) -> usize {
        let t = self.start_time + (epoch_index * self.epoch_length) as i64;
        (t.rem_euclid(86_400) / 3_600) as usize
    }

    pub fn end_time(&self) -> i64 {
        self.start_time + (self.horizon * self.epoch_length) as i64
    }
}

/// One simulated data owner and where they were in each epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnerState {
    pub owner_index: u64,
    pub participates: bool,
    /// Index into `ScenarioConfig::pois` per epoch, `None` when elsewhere.
    pub presence_trace: Vec<Option<u16>>,
}

/// Per-hour cumulative visit probabilities, scaled down when they sum past 1.
fn cumulative_visit_tables(pois: &[Poi]) -> Vec<Vec<f64>> {
    (0..HOURS_PER_DAY)
        .map(|hour| {
            let total: f64 = pois.iter().map(|p| p.attraction_profile[hour]).sum();
            let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
            let mut acc = 0.0;
            pois.iter()
                .map(|p| {
                    acc += p.attraction_profile[hour] * scale;
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn generate_population(config: &ScenarioConfig) -> Result<Vec<OwnerState>, SimulationError> {
    config.validate()?;
    let tables = cumulative_visit_tables(&config.pois);
    let hours: Vec<usize> = (0..config.horizon).map(|e| config.hour_of_epoch(e)).collect();
    let mut rng = RandomSource::derive(config.seed, b"population");
    Ok((0..config.total_population)
        .map(|owner_index| {
            let presence_trace = hours
                .iter()
                .map(|&hour| {
                    let u = rng.uniform();
                    tables[hour]
                        .iter()
                        .position(|&c| u < c)
                        .map(|k| k as u16)
                })
                .collect();
            OwnerState {
                owner_index,
                participates: owner_index < config.n_private_participants,
                presence_trace,
            }
        })
        .collect())
}

/// Linear occupancy-to-wait map, saturating at `w_max` when the POI is full.
pub fn wait_time_estimate(crowd_estimate: f64, poi: &Poi, w_max: f64) -> f64 {
    w_max * (crowd_estimate.max(0.0) / poi.capacity as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    /// Realized privacy level; `None` when the mechanism has unbounded loss.
    pub epsilon: Option<f64>,
    pub nonprivate_cost: f64,
    pub private_cost: Option<f64>,
    pub breakeven_epsilon: Option<f64>,
    pub participation_favored: bool,
}

fn scenario_cost_params(config: &ScenarioConfig) -> CostParams {
    CostParams {
        n_private: config.n_private_participants,
        n_nonprivate: config.n_nonprivate,
        ..config.cost_params
    }
}

/// Compares declining the study with privately participating at `epsilon`.
pub fn compare_participation(
    config: &ScenarioConfig,
    epsilon: f64,
) -> Result<CostComparison, SimulationError> {
    let params = scenario_cost_params(config);
    Ok(CostComparison {
        epsilon: Some(epsilon),
        nonprivate_cost: nonprivate_cost(&params),
        private_cost: Some(private_cost(epsilon, &params)?),
        breakeven_epsilon: breakeven_epsilon(&params).ok(),
        participation_favored: participation_favored(epsilon, &params)?,
    })
}

/// Epsilon the configured mechanism actually provides, if finite.
pub fn realized_epsilon(config: &ScenarioConfig) -> Option<f64> {
    match config.mechanism {
        MechanismSpec::RandomizedResponse { coins } => rr_privacy_level(coins)
            .ok()
            .map(|level| level.get(config.epsilon_reading)),
        MechanismSpec::Laplace { epsilon, .. } => Some(epsilon),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch_index: u64,
    pub poi_id: PoiId,
    /// Participants present at the POI: the quantity the study estimates.
    pub true_count: u64,
    /// Everyone present at the POI, participants or not.
    pub population_count: u64,
    pub n_responses: u64,
    pub estimate: Option<EstimateResult>,
    pub wait_estimate_minutes: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub per_epoch: Vec<EpochRecord>,
    pub coverage_fraction: f64,
    pub cost_comparison: CostComparison,
}

/// Flat CSV row of an [`EpochRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epoch: u64,
    pub poi_id: String,
    pub true_count: u64,
    pub estimate_raw: Option<f64>,
    pub estimate_clamped: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub wait_minutes: Option<f64>,
}

impl From<&EpochRecord> for ReportRow {
    fn from(r: &EpochRecord) -> Self {
        Self {
            epoch: r.epoch_index,
            poi_id: r.poi_id.to_string(),
            true_count: r.true_count,
            estimate_raw: r.estimate.map(|e| e.y_a_raw),
            estimate_clamped: r.estimate.map(|e| e.y_a_clamped),
            ci_low: r.estimate.map(|e| e.ci95_low),
            ci_high: r.estimate.map(|e| e.ci95_high),
            wait_minutes: r.wait_estimate_minutes,
        }
    }
}

/// JSON summary written next to the per-epoch CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub n_records: usize,
    pub coverage_fraction: f64,
    pub cost_comparison: CostComparison,
}

impl SimulationReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.per_epoch.iter().map(ReportRow::from).collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SimulationError> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> SimulationSummary {
        SimulationSummary {
            n_records: self.per_epoch.len(),
            coverage_fraction: self.coverage_fraction,
            cost_comparison: self.cost_comparison,
        }
    }
}

pub fn read_report_csv<R: io::Read>(input: R) -> Result<Vec<ReportRow>, SimulationError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub const SCENARIO_ANALYST: &str = "campus-study";

/// The analyst key a scenario signs its queries with, derived from its seed.
pub fn scenario_signer(config: &ScenarioConfig) -> Ed25519Signer {
    let mut rng = RandomSource::derive(config.seed, b"analyst-key");
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    Ed25519Signer::from_seed(PublicKeyId::new(format!("{SCENARIO_ANALYST}-key")), seed)
}

pub fn scenario_key_entry(config: &ScenarioConfig) -> KeyEntry {
    scenario_signer(config).key_entry(AnalystId::new(SCENARIO_ANALYST))
}

pub fn scenario_noise_seed(config: &ScenarioConfig) -> u64 {
    derive_seed(config.seed, b"aggregator-noise")
}

/// An in-process aggregator that trusts the scenario's analyst key.
pub fn scenario_aggregator(config: &ScenarioConfig) -> Aggregator {
    let keyring =
        Keyring::from_entries(&[scenario_key_entry(config)]).expect("freshly generated key");
    Aggregator::new(
        keyring,
        AggregatorConfig::simulation(scenario_noise_seed(config)),
    )
}

/// The standing queries a scenario registers, one per POI.
pub fn scenario_queries(config: &ScenarioConfig) -> Vec<Query> {
    config
        .pois
        .iter()
        .map(|poi| Query {
            query_id: QueryId::new(format!("sim-{}-{}", config.seed, poi.poi_id)),
            analyst_id: AnalystId::new(SCENARIO_ANALYST),
            poi_id: poi.poi_id.clone(),
            start_time: config.start_time,
            end_time: config.end_time(),
            epoch_length: config.epoch_length,
            mechanism: config.mechanism,
        })
        .collect()
}

pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationReport, SimulationError> {
    config.validate()?;
    run_simulation_with(config, &scenario_aggregator(config))
}

/// Runs the scenario against any aggregator, e.g. a remote one over HTTP.
///
/// The aggregator must trust [`scenario_key_entry`] and, for Laplace
/// scenarios, use [`scenario_noise_seed`] to reproduce in-process results.
pub fn run_simulation_with(
    config: &ScenarioConfig,
    api: &dyn AggregatorApi,
) -> Result<SimulationReport, SimulationError> {
    let owners = generate_population(config)?;
    let signer = scenario_signer(config);
    let queries = scenario_queries(config);
    for q in &queries {
        api.register_query(&sign_query(q.clone(), &signer), config.start_time)?;
    }

    let participants: Vec<&OwnerState> = owners.iter().filter(|o| o.participates).collect();
    let scale_to_population = if config.n_private_participants > 0 {
        config.total_population as f64 / config.n_private_participants as f64
    } else {
        0.0
    };
    let w_max = config.cost_params.worst_case_wait_w;
    let mut rng = RandomSource::derive(config.seed, b"responses");
    let mut per_epoch = Vec::with_capacity((config.horizon as usize) * config.pois.len());

    for epoch in 0..config.horizon {
        let slot = epoch as usize;
        for (k, (poi, query)) in config.pois.iter().zip(&queries).enumerate() {
            let here = Some(k as u16);
            let population_count =
                owners.iter().filter(|o| o.presence_trace[slot] == here).count() as u64;
            let mut true_count = 0;
            for owner in &participants {
                let truth = owner.presence_trace[slot] == here;
                true_count += u64::from(truth);
                let payload = match config.mechanism {
                    MechanismSpec::RandomizedResponse { coins } => {
                        Payload::Bit(rr_randomize(truth, coins, &mut rng))
                    }
                    MechanismSpec::Laplace { .. } => Payload::Real(f64::from(u8::from(truth))),
                };
                api.submit_response(&Response {
                    query_id: query.query_id.clone(),
                    epoch_index: epoch,
                    payload,
                    nonce: Nonce::random(&mut rng),
                })?;
            }
            let aggregate = api.close_epoch(&query.query_id, epoch, query.epoch_end(epoch))?;
            let estimate = aggregate.estimate.result().copied();
            per_epoch.push(EpochRecord {
                epoch_index: epoch,
                poi_id: poi.poi_id.clone(),
                true_count,
                population_count,
                n_responses: aggregate.n_responses,
                estimate,
                wait_estimate_minutes: estimate.map(|e| {
                    wait_time_estimate(e.y_a_clamped * scale_to_population, poi, w_max)
                }),
            });
        }
    }

    let estimated: Vec<_> = per_epoch
        .iter()
        .filter_map(|r| r.estimate.map(|e| (e, r.true_count)))
        .collect();
    let coverage_fraction = if estimated.is_empty() {
        0.0
    } else {
        estimated.iter().filter(|(e, t)| e.covers(*t as f64)).count() as f64
            / estimated.len() as f64
    };

    let cost_comparison = match realized_epsilon(config) {
        Some(eps) => compare_participation(config, eps)?,
        None => {
            let params = scenario_cost_params(config);
            CostComparison {
                epsilon: None,
                nonprivate_cost: nonprivate_cost(&params),
                private_cost: None,
                breakeven_epsilon: breakeven_epsilon(&params).ok(),
                participation_favored: false,
            }
        }
    };

    Ok(SimulationReport {
        per_epoch,
        coverage_fraction,
        cost_comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mechanism: MechanismSpec) -> ScenarioConfig {
        ScenarioConfig {
            total_population: 300,
            n_private_participants: 200,
            n_nonprivate: 50,
            pois: vec![Poi::flat("gym", "Gym", 100, 0.3), Poi::flat("lib", "Library", 100, 0.2)],
            epoch_length: 60,
            horizon: 5,
            start_time: 0,
            mechanism,
            cost_params: CostParams {
                n_private: 200,
                n_nonprivate: 50,
                ..CostParams::default()
            },
            seed: 11,
            epsilon_reading: EpsilonReading::YesDirection,
        }
    }

    fn rr(p: f64, q: f64) -> MechanismSpec {
        MechanismSpec::randomized_response(CoinPair::new(p, q).unwrap())
    }

    #[test]
    fn zero_profiles_mean_nobody_anywhere() {
        let mut cfg = small(rr(0.5, 0.5));
        for poi in &mut cfg.pois {
            poi.attraction_profile = vec![0.0; 24];
        }
        let owners = generate_population(&cfg).unwrap();
        assert!(owners.iter().all(|o| o.presence_trace.iter().all(Option::is_none)));
    }

    #[test]
    fn saturated_single_poi_holds_everyone() {
        let mut cfg = small(rr(0.5, 0.5));
        cfg.pois = vec![Poi::flat("gym", "Gym", 10, 1.0)];
        let owners = generate_population(&cfg).unwrap();
        assert!(owners.iter().all(|o| o.presence_trace.iter().all(|p| *p == Some(0))));
    }

    #[test]
    fn oversubscribed_profiles_are_normalized() {
        let mut cfg = small(rr(0.5, 0.5));
        cfg.pois = vec![Poi::flat("a", "A", 10, 0.9), Poi::flat("b", "B", 10, 0.9)];
        let owners = generate_population(&cfg).unwrap();
        // Sum 1.8 scales to 0.5 each, so nobody is absent.
        assert!(owners.iter().all(|o| o.presence_trace.iter().all(Option::is_some)));
    }

    #[test]
    fn participants_are_the_first_owners() {
        let owners = generate_population(&small(rr(0.5, 0.5))).unwrap();
        assert_eq!(owners.iter().filter(|o| o.participates).count(), 200);
        assert!(owners[..200].iter().all(|o| o.participates));
    }

    #[test]
    fn infeasible_scenarios() {
        let mut cfg = small(rr(0.5, 0.5));
        cfg.n_nonprivate = 150;
        assert!(matches!(
            generate_population(&cfg),
            Err(SimulationError::InfeasibleScenario(_))
        ));
        let mut cfg = small(rr(0.5, 0.5));
        cfg.pois[0].attraction_profile[3] = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = small(rr(0.5, 0.5));
        cfg.pois[0].attraction_profile.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = small(rr(0.5, 0.5));
        cfg.cost_params.n_private = 7;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hour_of_epoch_wraps() {
        let mut cfg = small(rr(0.5, 0.5));
        cfg.start_time = 23 * 3600;
        cfg.epoch_length = 1800;
        assert_eq!(cfg.hour_of_epoch(0), 23);
        assert_eq!(cfg.hour_of_epoch(1), 23);
        assert_eq!(cfg.hour_of_epoch(2), 0);
    }

    #[test]
    fn wait_time_examples() {
        let poi = Poi::flat("gym", "Gym", 200, 0.1);
        assert_eq!(wait_time_estimate(0.0, &poi, 60.0), 0.0);
        assert_eq!(wait_time_estimate(200.0, &poi, 60.0), 60.0);
        assert_eq!(wait_time_estimate(100.0, &poi, 60.0), 30.0);
        assert_eq!(wait_time_estimate(1e6, &poi, 60.0), 60.0);
        assert_eq!(wait_time_estimate(-5.0, &poi, 60.0), 0.0);
    }

    #[test]
    fn noiseless_run_is_exact() {
        let report = run_simulation(&small(rr(1.0, 0.5))).unwrap();
        assert_eq!(report.coverage_fraction, 1.0);
        for r in &report.per_epoch {
            assert_eq!(r.estimate.unwrap().y_a_raw, r.true_count as f64);
            assert_eq!(r.n_responses, 200);
        }
        assert_eq!(report.cost_comparison.epsilon, None);
        assert!(!report.cost_comparison.participation_favored);
    }

    #[test]
    fn laplace_run_uses_laplace_epsilon() {
        let report = run_simulation(&small(MechanismSpec::laplace(0.0083, 1.0).unwrap())).unwrap();
        assert_eq!(report.cost_comparison.epsilon, Some(0.0083));
        assert!(report.cost_comparison.participation_favored);
        assert_eq!(report.per_epoch.len(), 10);
    }

    #[test]
    fn compare_participation_examples() {
        let cfg = ScenarioConfig::campus();
        let c = compare_participation(&cfg, 0.3895).unwrap();
        assert!((c.private_cost.unwrap() - 71_436.0).abs() <= 10.0);
        assert_eq!(c.nonprivate_cost, 96_000.0);
        assert!(c.participation_favored);
        let c = compare_participation(&cfg, 2.3979).unwrap();
        assert!((c.private_cost.unwrap() - 1_500_008.0).abs() <= 10.0);
        assert!(!c.participation_favored);
        let b = c.breakeven_epsilon.unwrap();
        assert!(!compare_participation(&cfg, b).unwrap().participation_favored);
    }

    #[test]
    fn csv_round_trip() {
        let report = run_simulation(&small(rr(0.6, 0.3))).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "epoch,poi_id,true_count,estimate_raw,estimate_clamped,ci_low,ci_high,wait_minutes"
        );
        assert_eq!(read_report_csv(buf.as_slice()).unwrap(), report.rows());
    }

    #[test]
    fn campus_config_is_valid() {
        ScenarioConfig::campus().validate().unwrap();
        let json = serde_json::to_string(&ScenarioConfig::campus()).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ScenarioConfig::campus());
    }
}
