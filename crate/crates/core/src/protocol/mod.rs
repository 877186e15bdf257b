//! Aggregator protocol: signed standing queries, anonymous per-epoch
//! responses, and per-epoch published aggregates.
//!
//! The [`Aggregator`] holds all server state and is safe to share across
//! threads. [`AggregatorApi`] abstracts over where the aggregator lives so the
//! same driver code can talk to it in-process or over HTTP.

mod aggregator;
mod signing;
mod types;

pub use aggregator::{Aggregator, AggregatorConfig};
pub use signing::{
    canonical_query_encoding, sign_query, verify_signed_query, Ed25519PublicKey, Ed25519Signer, KeyEntry,
    Keyring, KeyringError, SignatureVerifier,
    QuerySigner,
};
pub use types::{
    AggregateEstimate, AnalystId, EpochAggregate, Nonce, Payload, PoiId, PublicKeyId, Query,
    QueryId, Response, SignedQuery,
};

use thiserror::Error;

use crate::mechanisms::MechanismError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error("query signature does not verify")]
    InvalidSignature,
    #[error("no registered analyst key {0}")]
    UnknownAnalyst(String),
    #[error("query has already ended")]
    ExpiredQuery,
    #[error("query id {0} is already registered with different content")]
    QueryIdConflict(String),
    #[error("unknown query {0}")]
    UnknownQuery(String),
    #[error("epoch {epoch_index} is outside the query's {n_epochs} epochs")]
    EpochOutOfRange { epoch_index: u64, n_epochs: u64 },
    #[error("epoch {0} is already closed")]
    EpochClosed(u64),
    #[error("epoch {0} has not ended yet")]
    EpochStillOpen(u64),
    #[error("aggregate for epoch {0} has not been published")]
    AggregateNotFound(u64),
    #[error("nonce already used in this epoch")]
    DuplicateNonce,
    #[error("payload does not match the query mechanism: {0}")]
    PayloadMismatch(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

impl ProtocolError {
    /// Stable snake_case code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            ProtocolError::MalformedQuery(_) => "malformed_query",
            ProtocolError::InvalidSignature => "invalid_signature",
            ProtocolError::UnknownAnalyst(_) => "unknown_analyst",
            ProtocolError::ExpiredQuery => "expired_query",
            ProtocolError::QueryIdConflict(_) => "query_id_conflict",
            ProtocolError::UnknownQuery(_) => "unknown_query",
            ProtocolError::EpochOutOfRange { .. } => "epoch_out_of_range",
            ProtocolError::EpochClosed(_) => "epoch_closed",
            ProtocolError::EpochStillOpen(_) => "epoch_still_open",
            ProtocolError::AggregateNotFound(_) => "aggregate_not_found",
            ProtocolError::DuplicateNonce => "duplicate_nonce",
            ProtocolError::PayloadMismatch(_) => "payload_mismatch",
            ProtocolError::Transport(_) => "transport",
        }
    }
}

impl From<MechanismError> for ProtocolError {
    fn from(e: MechanismError) -> Self {
        ProtocolError::MalformedQuery(e.to_string())
    }
}

/// Operations a data owner, analyst or simulator performs against an aggregator.
pub trait AggregatorApi {
    fn register_query(&self, sq: &SignedQuery, now: i64) -> Result<QueryId, ProtocolError>;
    fn fetch_queries(&self, now: i64) -> Result<Vec<SignedQuery>, ProtocolError>;
    fn submit_response(&self, response: &Response) -> Result<(), ProtocolError>;
    fn close_epoch(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
        now: i64,
    ) -> Result<EpochAggregate, ProtocolError>;
    fn get_aggregate(
        &self,
        query_id: &QueryId,
        epoch_index: u64,
    ) -> Result<EpochAggregate, ProtocolError>;
}
