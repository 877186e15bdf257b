//! JSON error bodies and the HTTP status each protocol error maps to.

use axum::http::StatusCode;
use crowdpriv_core::protocol::ProtocolError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Stable snake_case error code.
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_epochs: Option<u64>,
}

pub fn status_for(err: &ProtocolError) -> StatusCode {
    use ProtocolError::*;
    match err {
        MalformedQuery(_) => StatusCode::BAD_REQUEST,
        InvalidSignature | UnknownAnalyst(_) => StatusCode::UNAUTHORIZED,
        ExpiredQuery | QueryIdConflict(_) | DuplicateNonce | EpochClosed(_) | EpochStillOpen(_) => {
            StatusCode::CONFLICT
        }
        UnknownQuery(_) | AggregateNotFound(_) => StatusCode::NOT_FOUND,
        EpochOutOfRange { .. } | PayloadMismatch(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Transport(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<&ProtocolError> for ErrorBody {
    fn from(err: &ProtocolError) -> Self {
        use ProtocolError::*;
        let mut body = ErrorBody {
            error: err.code().to_string(),
            message: err.to_string(),
            detail: None,
            epoch_index: None,
            n_epochs: None,
        };
        match err {
            MalformedQuery(s) | UnknownAnalyst(s) | QueryIdConflict(s) | UnknownQuery(s)
            | PayloadMismatch(s) | Transport(s) => body.detail = Some(s.clone()),
            EpochClosed(i) | EpochStillOpen(i) | AggregateNotFound(i) => {
                body.epoch_index = Some(*i)
            }
            EpochOutOfRange {
                epoch_index,
                n_epochs,
            } => {
                body.epoch_index = Some(*epoch_index);
                body.n_epochs = Some(*n_epochs);
            }
            InvalidSignature | ExpiredQuery | DuplicateNonce => {}
        }
        body
    }
}

impl ErrorBody {
    /// Rebuilds the protocol error a server reported.
    pub fn into_protocol_error(self) -> ProtocolError {
        use ProtocolError::*;
        let detail = self.detail.unwrap_or_default();
        let epoch = self.epoch_index.unwrap_or_default();
        match self.error.as_str() {
            "malformed_query" => MalformedQuery(detail),
            "invalid_signature" => InvalidSignature,
            "unknown_analyst" => UnknownAnalyst(detail),
            "expired_query" => ExpiredQuery,
            "query_id_conflict" => QueryIdConflict(detail),
            "unknown_query" => UnknownQuery(detail),
            "epoch_out_of_range" => EpochOutOfRange {
                epoch_index: epoch,
                n_epochs: self.n_epochs.unwrap_or_default(),
            },
            "epoch_closed" => EpochClosed(epoch),
            "epoch_still_open" => EpochStillOpen(epoch),
            "aggregate_not_found" => AggregateNotFound(epoch),
            "duplicate_nonce" => DuplicateNonce,
            "payload_mismatch" => PayloadMismatch(detail),
            "transport" => Transport(detail),
            _ => Transport(format!("{}: {}", self.error, self.message)),
        }
    }
}
