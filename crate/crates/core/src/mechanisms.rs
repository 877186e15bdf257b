//! Privatization mechanisms: two-coin randomized response and the Laplace
//! mechanism, plus their privacy-level calculators.
//!
//! Randomized response works per data owner. Each owner flips a first coin
//! with bias `p`; on heads they answer truthfully, on tails they flip a second
//! coin with bias `q` and report that instead. This gives
//!
//! ```text
//! P(yes | truth = 1) = p + (1 - p) q
//! P(yes | truth = 0) = (1 - p) q
//! ```
//!
//! The Laplace mechanism is centralized: the aggregator sees the true sum and
//! releases `sum + Lap(0, sensitivity / epsilon)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error("probability {name}={value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("{name} must be a finite positive number, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("a response has zero probability under one truth value; privacy loss is unbounded")]
    InfinitePrivacyLoss,
}

fn check_probability(name: &'static str, value: f64) -> Result<f64, MechanismError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(MechanismError::ProbabilityOutOfRange { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, MechanismError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(MechanismError::NonPositiveParameter { name, value })
    }
}

/// The two coin biases of a randomized-response mechanism.
///
/// `p` is the probability of answering truthfully, `q` the probability that
/// the forced answer is "yes".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoinPair")]
pub struct CoinPair {
    p: f64,
    q: f64,
}

#[derive(Deserialize)]
struct RawCoinPair {
    p: f64,
    q: f64,
}

impl TryFrom<RawCoinPair> for CoinPair {
    type Error = MechanismError;

    fn try_from(raw: RawCoinPair) -> Result<Self, Self::Error> {
        CoinPair::new(raw.p, raw.q)
    }
}

impl CoinPair {
    pub fn new(p: f64, q: f64) -> Result<Self, MechanismError> {
        Ok(Self {
            p: check_probability("p", p)?,
            q: check_probability("q", q)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// Which privatization a query uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismSpec {
    RandomizedResponse {
        #[serde(flatten)]
        coins: CoinPair,
    },
    Laplace { epsilon: f64, sensitivity: f64 },
}

impl MechanismSpec {
    pub fn laplace(epsilon: f64, sensitivity: f64) -> Result<Self, MechanismError> {
        Ok(MechanismSpec::Laplace {
            epsilon: check_positive("epsilon", epsilon)?,
            sensitivity: check_positive("sensitivity", sensitivity)?,
        })
    }

    pub fn randomized_response(coins: CoinPair) -> Self {
        MechanismSpec::RandomizedResponse { coins }
    }

    /// Checks the Laplace parameters; coin pairs are validated on construction.
    pub fn validate(&self) -> Result<(), MechanismError> {
        match *self {
            MechanismSpec::RandomizedResponse { coins } => {
                CoinPair::new(coins.p, coins.q).map(|_| ())
            }
            MechanismSpec::Laplace {
                epsilon,
                sensitivity,
            } => MechanismSpec::laplace(epsilon, sensitivity).map(|_| ()),
        }
    }
}

/// Seeded pseudo-random stream. Equal seeds give equal draw sequences.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha12Rng,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a master seed and a label.
pub fn derive_seed(master: u64, label: &[u8]) -> u64 {
    let mut h = mix64(master);
    for chunk in label.chunks(8) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(buf));
    }
    mix64(h ^ label.len() as u64)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// A stream for `label` that does not overlap with the parent's.
    pub fn derive(seed: u64, label: &[u8]) -> Self {
        Self::new(derive_seed(seed, label))
    }

    /// Sub-stream `index` of `seed`; used to split Monte Carlo runs across workers.
    pub fn substream(seed: u64, index: u64) -> Self {
        Self::derive(seed, &index.to_le_bytes())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw on the open interval (0, 1): 53-bit grid shifted by half a step.
    pub fn uniform_open(&mut self) -> f64 {
        let k = self.rng.next_u64() >> 11;
        (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// True with probability `prob`. `prob = 1` is always true, `prob = 0` never.
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        self.uniform() < prob
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Privacy level of a randomized-response coin pair.
///
/// `epsilon_yes` is the log-likelihood ratio of a "yes" response, the
/// quantity tabulated in the usual utility/privacy tables. `epsilon_strict`
/// is the worst case over both response symbols and is the true DP level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyLevel {
    pub epsilon_yes: f64,
    pub epsilon_strict: f64,
}

/// Which of the two epsilon readings to use downstream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonReading {
    #[default]
    YesDirection,
    Strict,
}

impl PrivacyLevel {
    pub fn get(&self, reading: EpsilonReading) -> f64 {
        match reading {
            EpsilonReading::YesDirection => self.epsilon_yes,
            EpsilonReading::Strict => self.epsilon_strict,
        }
    }
}

/// Privatizes one bit.
pub fn rr_randomize(truth: bool, coins: CoinPair, rng: &mut RandomSource) -> bool {
    if rng.bernoulli(coins.p) {
        truth
    } else {
        rng.bernoulli(coins.q)
    }
}

/// Closed-form probability of a "yes" response given the truth.
pub fn rr_response_prob(truth: bool, coins: CoinPair) -> f64 {
    let forced_yes = (1.0 - coins.p) * coins.q;
    if truth {
        coins.p + forced_yes
    } else {
        forced_yes
    }
}

/// The two output-probability ratios between neighbouring inputs (truth 1 vs 0).
fn rr_ratios(coins: CoinPair) -> Result<(f64, f64), MechanismError> {
    let yes_given_1 = rr_response_prob(true, coins);
    let yes_given_0 = rr_response_prob(false, coins);
    let no_given_1 = 1.0 - yes_given_1;
    let no_given_0 = 1.0 - yes_given_0;
    if yes_given_0 <= 0.0 || no_given_1 <= 0.0 {
        return Err(MechanismError::InfinitePrivacyLoss);
    }
    Ok((yes_given_1 / yes_given_0, no_given_0 / no_given_1))
}

pub fn rr_privacy_level(coins: CoinPair) -> Result<PrivacyLevel, MechanismError> {
    let (yes_ratio, no_ratio) = rr_ratios(coins)?;
    let epsilon_yes = yes_ratio.ln();
    // For q <= 1/2 the yes ratio dominates analytically.
    let epsilon_strict = if coins.q <= 0.5 {
        epsilon_yes
    } else {
        epsilon_yes.max(no_ratio.ln())
    };
    Ok(PrivacyLevel {
        epsilon_yes,
        epsilon_strict,
    })
}

/// Inverse CDF of Laplace(0, scale) at `u` in (0, 1).
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    -scale * centered.signum() * (-2.0 * centered.abs()).ln_1p()
}

pub fn laplace_sample(scale: f64, rng: &mut RandomSource) -> f64 {
    laplace_inverse_cdf(rng.uniform_open(), scale)
}

/// Noise scale for a count query at the given privacy level.
pub fn laplace_scale(epsilon: f64, sensitivity: f64) -> Result<f64, MechanismError> {
    Ok(check_positive("sensitivity", sensitivity)? / check_positive("epsilon", epsilon)?)
}

/// `true_count + Lap(0, sensitivity / epsilon)`.
pub fn laplace_privatize(
    true_count: f64,
    epsilon: f64,
    sensitivity: f64,
    rng: &mut RandomSource,
) -> Result<f64, MechanismError> {
    let scale = laplace_scale(epsilon, sensitivity)?;
    Ok(true_count + laplace_sample(scale, rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpRatioCheck {
    pub max_observed_ratio: f64,
    pub bound: f64,
    pub satisfies: bool,
}

/// Checks the single-record DP inequality for both output symbols.
pub fn dp_ratio_check(coins: CoinPair) -> Result<DpRatioCheck, MechanismError> {
    let level = rr_privacy_level(coins)?;
    let (yes_ratio, no_ratio) = rr_ratios(coins)?;
    // Each ratio and its reciprocal cover both orderings of the neighbours.
    let max_observed_ratio = [yes_ratio, no_ratio, yes_ratio.recip(), no_ratio.recip()]
        .into_iter()
        .fold(f64::MIN, f64::max);
    let bound = level.epsilon_strict.exp();
    Ok(DpRatioCheck {
        max_observed_ratio,
        bound,
        satisfies: max_observed_ratio <= bound + 1e-12,
    })
}
