//! Detached query signatures over a canonical byte encoding.
//!
//! The encoding is a domain tag followed by every query field in a fixed
//! order, each as a big-endian `u32` length and the field bytes. Integers are
//! 8-byte big-endian, reals are their IEEE-754 bit patterns.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use ring::signature::{self as ring_sig, Ed25519KeyPair, KeyPair, UnparsedPublicKey};
use serde::{Deserialize, Serialize};

use super::types::{AnalystId, PublicKeyId, Query, SignedQuery};
use super::ProtocolError;
use crate::mechanisms::MechanismSpec;

const DOMAIN_TAG: &[u8] = b"crowdpriv/query/v1";

fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

pub fn canonical_query_encoding(query: &Query) -> Vec<u8> {
    let mut out = Vec::with_capacity(128);
    put_field(&mut out, DOMAIN_TAG);
    put_field(&mut out, query.query_id.as_str().as_bytes());
    put_field(&mut out, query.analyst_id.as_str().as_bytes());
    put_field(&mut out, query.poi_id.as_str().as_bytes());
    put_field(&mut out, &query.start_time.to_be_bytes());
    put_field(&mut out, &query.end_time.to_be_bytes());
    put_field(&mut out, &query.epoch_length.to_be_bytes());
    match query.mechanism {
        MechanismSpec::RandomizedResponse { coins } => {
            put_field(&mut out, b"randomized_response");
            put_field(&mut out, &coins.p().to_bits().to_be_bytes());
            put_field(&mut out, &coins.q().to_bits().to_be_bytes());
        }
        MechanismSpec::Laplace {
            epsilon,
            sensitivity,
        } => {
            put_field(&mut out, b"laplace");
            put_field(&mut out, &epsilon.to_bits().to_be_bytes());
            put_field(&mut out, &sensitivity.to_bits().to_be_bytes());
        }
    }
    out
}

/// Something that can produce detached signatures for an analyst.
pub trait QuerySigner {
    fn public_key_id(&self) -> &PublicKeyId;
    fn sign_bytes(&self, message: &[u8]) -> Vec<u8>;
}

/// Verifies a detached signature under one public key.
pub trait SignatureVerifier: Send + Sync {
    fn verify(&self, message: &[u8], signature: &[u8]) -> bool;
}

/// An Ed25519 public key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ed25519PublicKey([u8; 32]);

impl Ed25519PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(Self)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl SignatureVerifier for Ed25519PublicKey {
    fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        UnparsedPublicKey::new(&ring_sig::ED25519, &self.0)
            .verify(message, signature)
            .is_ok()
    }
}

pub struct Ed25519Signer {
    key_id: PublicKeyId,
    key: Ed25519KeyPair,
}

impl Ed25519Signer {
    pub fn from_seed(key_id: PublicKeyId, seed: [u8; 32]) -> Self {
        let key = Ed25519KeyPair::from_seed_unchecked(&seed).expect("any 32-byte seed is valid");
        Self { key_id, key }
    }

    pub fn verifying_key(&self) -> Ed25519PublicKey {
        Ed25519PublicKey::from_bytes(self.key.public_key().as_ref()).expect("32-byte public key")
    }

    /// Keyring entry for this signer's public half.
    pub fn key_entry(&self, analyst_id: AnalystId) -> KeyEntry {
        KeyEntry {
            analyst_id,
            public_key_id: self.key_id.clone(),
            public_key_base64: BASE64.encode(self.verifying_key().as_bytes()),
        }
    }
}

impl QuerySigner for Ed25519Signer {
    fn public_key_id(&self) -> &PublicKeyId {
        &self.key_id
    }

    fn sign_bytes(&self, message: &[u8]) -> Vec<u8> {
        self.key.sign(message).as_ref().to_vec()
    }
}

pub fn sign_query(query: Query, signer: &dyn QuerySigner) -> SignedQuery {
    let signature = signer.sign_bytes(&canonical_query_encoding(&query));
    SignedQuery {
        query,
        public_key_id: signer.public_key_id().clone(),
        signature,
    }
}

/// One line of the keyring file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub analyst_id: AnalystId,
    pub public_key_id: PublicKeyId,
    pub public_key_base64: String,
}

struct RegisteredKey {
    analyst_id: AnalystId,
    verifier: Arc<dyn SignatureVerifier>,
}

/// Public keys of the analysts this aggregator accepts queries from.
#[derive(Default, Clone)]
pub struct Keyring {
    keys: HashMap<PublicKeyId, Arc<RegisteredKey>>,
}

impl std::fmt::Debug for Keyring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.keys.keys()).finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KeyringError {
    #[error("reading keyring: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing keyring: {0}")]
    Json(#[from] serde_json::Error),
    #[error("key {0}: {1}")]
    BadKey(String, String),
}

impl Keyring {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        analyst_id: AnalystId,
        public_key_id: PublicKeyId,
        verifier: Arc<dyn SignatureVerifier>,
    ) {
        self.keys.insert(
            public_key_id,
            Arc::new(RegisteredKey {
                analyst_id,
                verifier,
            }),
        );
    }

    pub fn insert_entry(&mut self, entry: &KeyEntry) -> Result<(), KeyringError> {
        let bad = |m: String| KeyringError::BadKey(entry.public_key_id.to_string(), m);
        let bytes = BASE64
            .decode(&entry.public_key_base64)
            .map_err(|e| bad(e.to_string()))?;
        let key = Ed25519PublicKey::from_bytes(&bytes)
            .ok_or_else(|| bad("ed25519 public keys are 32 bytes".into()))?;
        self.insert(
            entry.analyst_id.clone(),
            entry.public_key_id.clone(),
            Arc::new(key),
        );
        Ok(())
    }

    pub fn from_entries(entries: &[KeyEntry]) -> Result<Self, KeyringError> {
        let mut ring = Self::new();
        for e in entries {
            ring.insert_entry(e)?;
        }
        Ok(ring)
    }

    pub fn load(path: &Path) -> Result<Self, KeyringError> {
        let entries: Vec<KeyEntry> = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::from_entries(&entries)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Checks that the key is known, belongs to the query's analyst, and
    /// that the signature covers the canonical encoding.
    pub fn verify(&self, sq: &SignedQuery) -> Result<(), ProtocolError> {
        let key = self
            .keys
            .get(&sq.public_key_id)
            .ok_or_else(|| ProtocolError::UnknownAnalyst(sq.public_key_id.to_string()))?;
        if key.analyst_id != sq.query.analyst_id {
            return Err(ProtocolError::UnknownAnalyst(format!(
                "{} is not registered for analyst {}",
                sq.public_key_id, sq.query.analyst_id
            )));
        }
        if key
            .verifier
            .verify(&canonical_query_encoding(&sq.query), &sq.signature)
        {
            Ok(())
        } else {
            Err(ProtocolError::InvalidSignature)
        }
    }
}

pub fn verify_signed_query(keyring: &Keyring, sq: &SignedQuery) -> Result<(), ProtocolError> {
    keyring.verify(sq)
}
