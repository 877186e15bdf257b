//! Simulated data owners: fetch standing queries once, then answer every
//! remaining epoch of each.

use std::time::Duration;

use crowdpriv_core::mechanisms::{derive_seed, rr_randomize, MechanismSpec, RandomSource};
use crowdpriv_core::protocol::{
    AggregatorApi, Nonce, Payload, ProtocolError, Query, Response,
};
use serde::{Deserialize, Serialize};

use crate::server::unix_now;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespondConfig {
    /// Number of simulated owners.
    pub owners: u64,
    /// Owners `0..true_yes` answer yes; the rest answer no.
    pub true_yes: u64,
    pub seed: u64,
    /// Virtual clock used for fetching; ignored in realtime mode.
    #[serde(default)]
    pub now: i64,
    /// Wait for each epoch's wall-clock window instead of submitting at once.
    #[serde(default)]
    pub realtime: bool,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Replay one response per (query, epoch) and expect it to be rejected.
    #[serde(default)]
    pub inject_duplicate_nonce: bool,
}

fn default_concurrency() -> usize {
    8
}

impl Default for RespondConfig {
    fn default() -> Self {
        Self {
            owners: 1000,
            true_yes: 800,
            seed: 2017,
            now: 0,
            realtime: false,
            concurrency: default_concurrency(),
            inject_duplicate_nonce: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondSummary {
    pub queries: u64,
    pub epochs: u64,
    pub submitted: u64,
    pub duplicates_rejected: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum RespondError {
    #[error("invalid respond config: {0}")]
    Config(String),
    #[error("owner {owner} in epoch {epoch_index} of {query_id}: {source}")]
    Rejected {
        query_id: String,
        epoch_index: u64,
        owner: u64,
        source: ProtocolError,
    },
    #[error("fetching queries: {0}")]
    Fetch(ProtocolError),
    #[error("duplicate nonce was accepted for {0}")]
    DuplicateAccepted(String),
}

/// The response owner `owner` sends for one epoch of `query`.
///
/// Randomness depends only on (seed, query, epoch, owner), never on
/// submission order.
pub fn owner_response(query: &Query, epoch_index: u64, owner: u64, truth: bool, seed: u64) -> Response {
    let label = format!("respond/{}/{epoch_index}", query.query_id.as_str());
    let mut rng = RandomSource::substream(derive_seed(seed, label.as_bytes()), owner);
    let payload = match query.mechanism {
        MechanismSpec::RandomizedResponse { coins } => Payload::Bit(rr_randomize(truth, coins, &mut rng)),
        MechanismSpec::Laplace { .. } => Payload::Real(f64::from(u8::from(truth))),
    };
    Response {
        query_id: query.query_id.clone(),
        epoch_index,
        payload,
        nonce: Nonce::random(&mut rng),
    }
}

fn submit_epoch<A: AggregatorApi + Sync>(
    api: &A,
    cfg: &RespondConfig,
    query: &Query,
    epoch_index: u64,
) -> Result<u64, RespondError> {
    let workers = cfg.concurrency.max(1) as u64;
    let per_worker = cfg.owners.div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let lo = (w * per_worker).min(cfg.owners);
                let hi = ((w + 1) * per_worker).min(cfg.owners);
                s.spawn(move || -> Result<u64, RespondError> {
                    for owner in lo..hi {
                        let r = owner_response(query, epoch_index, owner, owner < cfg.true_yes, cfg.seed);
                        api.submit_response(&r).map_err(|source| RespondError::Rejected {
                            query_id: query.query_id.0.clone(),
                            epoch_index,
                            owner,
                            source,
                        })?;
                    }
                    Ok(hi - lo)
                })
            })
            .collect();
        let mut total = 0;
        for h in handles {
            total += h.join().expect("submitter thread panicked")?;
        }
        Ok(total)
    })
}

pub fn run_respond<A: AggregatorApi + Sync>(
    api: &A,
    cfg: &RespondConfig,
) -> Result<RespondSummary, RespondError> {
    if cfg.true_yes > cfg.owners {
        return Err(RespondError::Config(format!(
            "true_yes {} exceeds owners {}",
            cfg.true_yes, cfg.owners
        )));
    }
    let now = if cfg.realtime { unix_now() } else { cfg.now };
    let queries = api.fetch_queries(now).map_err(RespondError::Fetch)?;
    let mut summary = RespondSummary {
        queries: queries.len() as u64,
        ..Default::default()
    };

    for sq in &queries {
        let query = &sq.query;
        let first = query.epoch_index_at(now).unwrap_or(0);
        for epoch in first..query.n_epochs() {
            if cfg.realtime {
                let wait = query.epoch_start(epoch) - unix_now();
                if wait > 0 {
                    std::thread::sleep(Duration::from_secs(wait as u64));
                }
            }
            summary.submitted += submit_epoch(api, cfg, query, epoch)?;
            summary.epochs += 1;

            if cfg.inject_duplicate_nonce && cfg.owners > 0 {
                let replay = owner_response(query, epoch, 0, cfg.true_yes > 0, cfg.seed);
                match api.submit_response(&replay) {
                    Err(ProtocolError::DuplicateNonce) => summary.duplicates_rejected += 1,
                    Ok(()) => return Err(RespondError::DuplicateAccepted(query.query_id.0.clone())),
                    Err(source) => {
                        return Err(RespondError::Rejected {
                            query_id: query.query_id.0.clone(),
                            epoch_index: epoch,
                            owner: 0,
                            source,
                        })
                    }
                }
            }
        }
    }
    Ok(summary)
}
