use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::signing::Keyring;
use super::types::{
    AggregateEstimate, EpochAggregate, Nonce, Payload, Query, QueryId, Response, SignedQuery,
};
use super::{AggregatorApi, ProtocolError};
use crate::estimation::{estimate_true_yes, AggregateCounts, EstimateResult};
use crate::mechanisms::{laplace_privatize, laplace_scale, MechanismSpec, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    /// Extra whole epochs to wait after an epoch's window before it may close.
    pub grace_epochs: u64,
    /// Master seed for the aggregator's Laplace noise.
    pub noise_seed: u64,
}

impl AggregatorConfig {
    /// Virtual-time simulation: epochs close as soon as their window ends.
    pub fn simulation(noise_seed: u64) -> Self {
        Self {
            grace_epochs: 0,
            noise_seed,
        }
    }

    /// Network service: one epoch of grace for straggling deliveries.
    pub fn service(noise_seed: u64) -> Self {
        Self {
            grace_epochs: 1,
            noise_seed,
        }
    }
}

#[derive(Default)]
struct EpochSlot {
    n_responses: u64,
    raw_sum: f64,
    nonces: HashSet<Nonce>,
    published: Option<EpochAggregate>,
}

/// In-memory aggregation server.
///
/// Each (query, epoch) accumulator sits behind its own mutex, so concurrent
/// submissions to one epoch serialize while different epochs proceed in
/// parallel. Closing an epoch takes the same mutex, so every submission is
/// either counted in the published aggregate or rejected with `EpochClosed`.
pub struct Aggregator {
    keyring: Keyring,
    config: AggregatorConfig,
    queries: RwLock<BTreeMap<QueryId, Arc<SignedQuery>>>,
    epochs: RwLock<HashMap<(QueryId, u64), SlotHandle>>,
}

type SlotHandle = Arc<Mutex<EpochSlot>>;

impl Aggregator {
    pub fn new(keyring: Keyring, config: AggregatorConfig) -> Self {
        Self {
            keyring,
            config,
            queries: RwLock::new(BTreeMap::new()),
            epochs: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> AggregatorConfig {
        self.config
    }

    fn query(&self, query_id: &QueryId) -> Result<Arc<SignedQuery>, ProtocolError> {
        self.queries
            .read()
            .get(query_id)
            .cloned()
            .ok_or_else(|| ProtocolError::UnknownQuery(query_id.to_string()))
    }

    fn check_epoch(query: &Query, epoch_index: u64) -> Result<(), ProtocolError> {
        let n_epochs = query.n_epochs();
        if epoch_index >= n_epochs {
            return Err(ProtocolError::EpochOutOfRange {
                epoch_index,
                n_epochs,
            });
        }
        Ok(())
    }

    fn slot(&self, query_id: &QueryId, epoch_index: u64) -> Arc<Mutex<EpochSlot>> {
        let key = (query_id.clone(), epoch_index);
        if let Some(slot) = self.epochs.read().get(&key) {
            return slot.clone();
        }
        self.epochs.write().entry(key).or_default().clone()
    }

    fn check_payload(mechanism: &MechanismSpec, payload: &Payload) -> Result<(), ProtocolError> {
        match (mechanism, payload) {
            (MechanismSpec::RandomizedResponse { .. }, Payload::Bit(_)) => Ok(()),
            (MechanismSpec::Laplace { sensitivity, .. }, Payload::Real(x)) => {
                if x.is_finite() && (0.0..=*sensitivity).contains(x) {
                    Ok(())
                } else {
                    Err(ProtocolError::PayloadMismatch(format!(
                        "contribution {x} outside [0, {sensitivity}]"
                    )))
                }
            }
            (MechanismSpec::RandomizedResponse { .. }, Payload::Real(_)) => Err(
                ProtocolError::PayloadMismatch("randomized-response query expects a bit".into()),
            ),
            (MechanismSpec::Laplace { .. }, Payload::Bit(_)) => Err(
                ProtocolError::PayloadMismatch("laplace query expects a real contribution".into()),
            ),
        }
    }

    fn publish(&self, query: &Query, epoch_index: u64, slot: &EpochSlot) -> EpochAggregate {
        let n = slot.n_responses;
        let (raw_sum, estimate) = match query.mechanism {
            _ if n == 0 => (0.0, AggregateEstimate::Undefined),
            MechanismSpec::RandomizedResponse { coins } => {
                let counts = AggregateCounts::new(slot.raw_sum as u64, n)
                    .expect("yes count never exceeds responses");
                let estimate = match estimate_true_yes(counts, coins) {
                    Ok(r) => AggregateEstimate::RandomizedResponse(r),
                    Err(_) => AggregateEstimate::Undefined,
                };
                (slot.raw_sum, estimate)
            }
            MechanismSpec::Laplace {
                epsilon,
                sensitivity,
            } => {
                let mut label = query.query_id.as_str().as_bytes().to_vec();
                label.push(0);
                label.extend_from_slice(&epoch_index.to_le_bytes());
                let mut rng = RandomSource::derive(self.config.noise_seed, &label);
                let noisy = laplace_privatize(slot.raw_sum, epsilon, sensitivity, &mut rng)
                    .expect("validated at registration");
                let scale = laplace_scale(epsilon, sensitivity).expect("validated at registration");
                let std = std::f64::consts::SQRT_2 * scale;
                (
                    noisy,
                    AggregateEstimate::Laplace(EstimateResult::from_raw(noisy, n as f64, std)),
                )
            }
        };
        EpochAggregate {
            query_id: query.query_id.clone(),
            epoch_index,
            n_responses: n,
            raw_sum,
            estimate,
            closed: true,
        }
    }
}

impl AggregatorApi for Aggregator {
    fn register_query(&self, sq: &SignedQuery, now: i64) -> Result<QueryId, ProtocolError> {
        sq.query.validate()?;
        self.keyring.verify(sq)?;
        if sq.query.end_time <= now {
            return Err(ProtocolError::ExpiredQuery);
        }
        let mut queries = self.queries.write();
        if let Some(existing) = queries.get(&sq.query.query_id) {
            return if **existing == *sq {
                Ok(sq.query.query_id.clone())
            } else {
                Err(ProtocolError::QueryIdConflict(sq.query.query_id.to_string()))
            };
        }
        queries.insert(sq.query.query_id.clone(), Arc::new(sq.clone()));
        Ok(sq.query.query_id.clone())
    }

    fn fetch_queries(&self, now: i64) -> Result<Vec<SignedQuery>, ProtocolError> {
        Ok(self
            .queries
            .read()
            .values()
            .filter(|sq| sq.query.is_active(now))
            .map(|sq| (**sq).clone())
            .collect())
    }

    fn submit_response(&self, response: &Response) -> Result<(), ProtocolError> {
        let sq = self.query(&response.query_id)?;
        Self::check_epoch(&sq.query, response.epoch_index)?;
        Self::check_payload(&sq.query.mechanism, &response.payload)?;
        let slot = self.slot(&response.query_id, response.epoch_index);
        let mut slot = slot.lock();
        if slot.published.is_some() {
            return Err(ProtocolError::EpochClosed(response.epoch_index));
        }
        if !slot.nonces.insert(response.nonce) {
            return Err(ProtocolError::DuplicateNonce);
        }
        slot.n_responses += 1;
        slot.raw_sum += response.payload.value();
        Ok(())
    }

    fn close_epoch(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
        now: i64,
    ) -> Result<EpochAggregate, ProtocolError> {
        let sq = self.query(query_id)?;
        let query = &sq.query;
        Self::check_epoch(query, epoch_index)?;
        let slot = self.slot(query_id, epoch_index);
        let mut slot = slot.lock();
        if let Some(published) = &slot.published {
            return Ok(published.clone());
        }
        let closes_at = query.epoch_end(epoch_index)
            + (self.config.grace_epochs * query.epoch_length) as i64;
        if now < closes_at {
            return Err(ProtocolError::EpochStillOpen(epoch_index));
        }
        let aggregate = self.publish(query, epoch_index, &slot);
        slot.nonces = HashSet::new();
        slot.published = Some(aggregate.clone());
        Ok(aggregate)
    }

    fn get_aggregate(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
    ) -> Result<EpochAggregate, ProtocolError> {
        let key = (query_id.clone(), epoch_index);
        self.epochs
            .read()
            .get(&key)
            .and_then(|slot| slot.lock().published.clone())
            .ok_or(ProtocolError::AggregateNotFound(epoch_index))
    }
}
