//! Reconstruction of true "yes" counts from randomized-response aggregates.
//!
//! With `N` respondents and `Ŷ` observed yes answers, the unbiased estimate of
//! the true yes count is
//!
//! ```text
//! Y_A = (Ŷ - (1 - p) q N) / p
//! ```
//!
//! Its variance follows from `Ŷ` being a sum of independent Bernoullis with
//! success probability `P1` for true-yes owners and `P0` for true-no owners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mechanisms::{rr_randomize, rr_response_prob, CoinPair, RandomSource};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EstimationError {
    #[error("first coin bias p = 0: the estimator is undefined")]
    DegenerateMechanism,
    #[error("relative error is undefined when the true yes count is 0")]
    UndefinedRelativeError,
    #[error("yes count {yes} exceeds respondent count {n}")]
    CountOutOfRange { yes: u64, n: u64 },
    #[error("respondent count must be positive")]
    NoRespondents,
    #[error("at least one run is required")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateCounts {
    yes_randomized: u64,
    n_respondents: u64,
}

impl AggregateCounts {
    pub fn new(yes_randomized: u64, n_respondents: u64) -> Result<Self, EstimationError> {
        if n_respondents == 0 {
            return Err(EstimationError::NoRespondents);
        }
        if yes_randomized > n_respondents {
            return Err(EstimationError::CountOutOfRange {
                yes: yes_randomized,
                n: n_respondents,
            });
        }
        Ok(Self {
            yes_randomized,
            n_respondents,
        })
    }

    pub fn yes_randomized(&self) -> u64 {
        self.yes_randomized
    }

    pub fn n_respondents(&self) -> u64 {
        self.n_respondents
    }
}

/// A reconstructed count with its plug-in uncertainty.
///
/// `y_a_raw` is unbiased and may leave `[0, N]`; `y_a_clamped` is for display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub y_a_raw: f64,
    pub y_a_clamped: f64,
    pub std_plugin: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl EstimateResult {
    /// Builds the result around `raw` with a normal-approximation CI.
    pub fn from_raw(raw: f64, n: f64, std: f64) -> Self {
        Self {
            y_a_raw: raw,
            y_a_clamped: raw.max(0.0).min(n),
            std_plugin: std,
            ci95_low: raw - Z95 * std,
            ci95_high: raw + Z95 * std,
        }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci95_low <= truth && truth <= self.ci95_high
    }
}

/// Variance of the randomized yes count for a population with `true_yes`
/// yes-holders out of `n`.
fn randomized_count_variance(true_yes: f64, n: f64, coins: CoinPair) -> f64 {
    let p1 = rr_response_prob(true, coins);
    let p0 = rr_response_prob(false, coins);
    true_yes * p1 * (1.0 - p1) + (n - true_yes) * p0 * (1.0 - p0)
}

pub fn estimate_true_yes(
    agg: AggregateCounts,
    coins: CoinPair,
) -> Result<EstimateResult, EstimationError> {
    let p = coins.p();
    if p <= 0.0 {
        return Err(EstimationError::DegenerateMechanism);
    }
    let n = agg.n_respondents as f64;
    let raw = (agg.yes_randomized as f64 - (1.0 - p) * coins.q() * n) / p;
    let plug_in = raw.max(0.0).min(n);
    let std = randomized_count_variance(plug_in, n, coins).sqrt() / p;
    Ok(EstimateResult::from_raw(raw, n, std))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrialConfig {
    pub n: u64,
    pub true_yes: u64,
    pub coins: CoinPair,
    pub runs: u64,
    pub seed: u64,
}

impl ErrorTrialConfig {
    fn validate(&self) -> Result<(), EstimationError> {
        if self.n == 0 {
            return Err(EstimationError::NoRespondents);
        }
        if self.true_yes > self.n {
            return Err(EstimationError::CountOutOfRange {
                yes: self.true_yes,
                n: self.n,
            });
        }
        if self.runs == 0 {
            return Err(EstimationError::NoRuns);
        }
        if self.coins.p() <= 0.0 {
            return Err(EstimationError::DegenerateMechanism);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorOracle {
    pub std_exact: f64,
    pub expected_abs_rel_error: f64,
}

/// Closed-form estimator spread, independent of any sampling.
///
/// The expected absolute relative error uses the normal approximation
/// `E|X - mu| = sigma * sqrt(2 / pi)`.
pub fn analytic_error_oracle(config: &ErrorTrialConfig) -> Result<ErrorOracle, EstimationError> {
    config.validate()?;
    if config.true_yes == 0 {
        return Err(EstimationError::UndefinedRelativeError);
    }
    let std_exact = randomized_count_variance(config.true_yes as f64, config.n as f64, config.coins)
        .sqrt()
        / config.coins.p();
    let expected_abs_rel_error =
        std_exact * (2.0 / std::f64::consts::PI).sqrt() / config.true_yes as f64;
    Ok(ErrorOracle {
        std_exact,
        expected_abs_rel_error,
    })
}

/// One randomize-then-estimate pass over a population whose first `true_yes`
/// owners hold the attribute.
fn simulate_once(config: &ErrorTrialConfig, rng: &mut RandomSource) -> f64 {
    let observed = (0..config.n)
        .filter(|&owner| rr_randomize(owner < config.true_yes, config.coins, rng))
        .count() as u64;
    let agg = AggregateCounts {
        yes_randomized: observed,
        n_respondents: config.n,
    };
    estimate_true_yes(agg, config.coins)
        .expect("validated p > 0")
        .y_a_raw
}

/// Raw estimates from `runs` independent seeded trials, in run order.
///
/// Run `i` draws from sub-stream `i` of the seed, so the output does not
/// depend on how rayon schedules the work.
pub fn monte_carlo_estimates(config: &ErrorTrialConfig) -> Result<Vec<f64>, EstimationError> {
    config.validate()?;
    Ok((0..config.runs)
        .into_par_iter()
        .map(|run| simulate_once(config, &mut RandomSource::substream(config.seed, run)))
        .collect())
}

/// Mean absolute relative error of the estimator over seeded runs.
pub fn relative_error_mc(config: &ErrorTrialConfig) -> Result<f64, EstimationError> {
    config.validate()?;
    if config.true_yes == 0 {
        return Err(EstimationError::UndefinedRelativeError);
    }
    let truth = config.true_yes as f64;
    let estimates = monte_carlo_estimates(config)?;
    let total: f64 = estimates.iter().map(|y| (y - truth).abs() / truth).sum();
    Ok(total / estimates.len() as f64)
}
