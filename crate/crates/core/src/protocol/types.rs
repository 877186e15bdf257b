use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ProtocolError;
use crate::estimation::EstimateResult;
use crate::mechanisms::{MechanismSpec, RandomSource};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(QueryId);
string_id!(AnalystId);
string_id!(PoiId);
string_id!(PublicKeyId);

/// A standing "is the owner at this POI?" query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: QueryId,
    pub analyst_id: AnalystId,
    pub poi_id: PoiId,
    pub start_time: i64,
    pub end_time: i64,
    pub epoch_length: u64,
    pub mechanism: MechanismSpec,
}

impl Query {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let malformed = |m: &str| Err(ProtocolError::MalformedQuery(m.to_string()));
        if self.query_id.0.is_empty() || self.analyst_id.0.is_empty() || self.poi_id.0.is_empty() {
            return malformed("identifiers must be non-empty");
        }
        if self.start_time >= self.end_time {
            return malformed("start_time must precede end_time");
        }
        if self.epoch_length < 1 {
            return malformed("epoch_length must be at least one second");
        }
        if self.n_epochs() == 0 {
            return malformed("query window is shorter than one epoch");
        }
        self.mechanism.validate()?;
        Ok(())
    }

    /// Number of complete epochs in `[start_time, end_time)`.
    pub fn n_epochs(&self) -> u64 {
        if self.end_time <= self.start_time || self.epoch_length == 0 {
            return 0;
        }
        (self.end_time - self.start_time) as u64 / self.epoch_length
    }

    /// Epoch containing `t`, if `t` falls inside a valid epoch.
    pub fn epoch_index_at(&self, t: i64) -> Option<u64> {
        if t < self.start_time {
            return None;
        }
        let idx = (t - self.start_time) as u64 / self.epoch_length;
        (idx < self.n_epochs()).then_some(idx)
    }

    pub fn epoch_start(&self, epoch_index: u64) -> i64 {
        self.start_time + (epoch_index * self.epoch_length) as i64
    }

    pub fn epoch_end(&self, epoch_index: u64) -> i64 {
        self.epoch_start(epoch_index + 1)
    }

    pub fn is_active(&self, now: i64) -> bool {
        self.start_time <= now && now < self.end_time
    }
}

pub(crate) mod base64_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        BASE64.decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedQuery {
    pub query: Query,
    pub public_key_id: PublicKeyId,
    #[serde(with = "base64_bytes")]
    pub signature: Vec<u8>,
}

/// 128-bit per-response random value. Serialized as base64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Nonce(pub [u8; 16]);

impl Nonce {
    pub fn random(rng: &mut RandomSource) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        Nonce(bytes)
    }
}

impl Serialize for Nonce {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64.encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Nonce {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = BASE64.decode(s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 16] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("nonce must be 16 bytes"))?;
        Ok(Nonce(arr))
    }
}

/// A privatized answer. Randomized-response queries take a bit; Laplace
/// queries take the owner's real-valued contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Bit(bool),
    Real(f64),
}

impl Payload {
    pub fn value(&self) -> f64 {
        match *self {
            Payload::Bit(b) => f64::from(u8::from(b)),
            Payload::Real(x) => x,
        }
    }
}

/// One owner's answer for one epoch. Carries no respondent identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Response {
    pub query_id: QueryId,
    pub epoch_index: u64,
    pub payload: Payload,
    pub nonce: Nonce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregateEstimate {
    /// No responses arrived; nothing to estimate.
    Undefined,
    /// Debiased randomized-response estimate.
    RandomizedResponse(EstimateResult),
    /// Noisy count; the CI reflects the Laplace noise only.
    Laplace(EstimateResult),
}

impl AggregateEstimate {
    pub fn result(&self) -> Option<&EstimateResult> {
        match self {
            AggregateEstimate::Undefined => None,
            AggregateEstimate::RandomizedResponse(r) | AggregateEstimate::Laplace(r) => Some(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochAggregate {
    pub query_id: QueryId,
    pub epoch_index: u64,
    pub n_responses: u64,
    /// Randomized yes count, or the noisy sum for Laplace queries.
    pub raw_sum: f64,
    pub estimate: AggregateEstimate,
    pub closed: bool,
}
