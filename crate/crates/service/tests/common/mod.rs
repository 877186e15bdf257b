#![allow(dead_code)]

use std::sync::Arc;

use crowdpriv_core::mechanisms::{CoinPair, MechanismSpec};
use crowdpriv_core::protocol::{
    sign_query, Aggregator, AggregatorConfig, AnalystId, Ed25519Signer, KeyEntry, Keyring, PoiId,
    PublicKeyId, Query, QueryId, SignedQuery,
};

pub const ANALYST: &str = "analyst-1";

pub fn signer() -> Ed25519Signer {
    Ed25519Signer::from_seed(PublicKeyId::new("analyst-1-key"), [7u8; 32])
}

pub fn key_entry() -> KeyEntry {
    signer().key_entry(AnalystId::new(ANALYST))
}

pub fn aggregator(noise_seed: u64) -> Arc<Aggregator> {
    let keyring = Keyring::from_entries(&[key_entry()]).unwrap();
    Arc::new(Aggregator::new(keyring, AggregatorConfig::simulation(noise_seed)))
}

pub fn rr(p: f64, q: f64) -> MechanismSpec {
    MechanismSpec::randomized_response(CoinPair::new(p, q).unwrap())
}

/// A query over `[1000, 1000 + 60 * epochs)` with one-minute epochs.
pub fn query(id: &str, mechanism: MechanismSpec, epochs: i64) -> Query {
    Query {
        query_id: QueryId::new(id),
        analyst_id: AnalystId::new(ANALYST),
        poi_id: PoiId::new("gym"),
        start_time: 1000,
        end_time: 1000 + 60 * epochs,
        epoch_length: 60,
        mechanism,
    }
}

pub fn signed(q: Query) -> SignedQuery {
    sign_query(q, &signer())
}
