//! Participation cost of a crowd study, in person-minutes.
//!
//! A non-participant pays `phi * W` per person (they may be re-identified and
//! get no congestion information). A private participant pays
//! `(e^eps - 1) * E` per person, where `E = error_prob * W` is the base cost
//! of relying on the study's estimate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("{name}={value} must lie in [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("worst-case wait must be finite and non-negative, got {0}")]
    InvalidWait(f64),
    #[error("{0} cohort must have at least one person")]
    EmptyCohort(&'static str),
    #[error("breakeven is undefined when base cost times private cohort is zero")]
    DegenerateCostModel,
    #[error("epsilon grid must be non-empty")]
    EmptyGrid,
    #[error("epsilon grid must be strictly increasing positive values; offending entry {0}")]
    InvalidGrid(f64),
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCostParams")]
pub struct CostParams {
    /// Worst-case wait W in minutes.
    pub worst_case_wait_w: f64,
    /// Probability that the study's congestion estimate is wrong.
    pub congestion_error_prob: f64,
    /// Fraction of non-participants who get re-identified.
    pub deanon_fraction_phi: f64,
    pub n_nonprivate: u64,
    pub n_private: u64,
}

#[derive(Deserialize)]
struct RawCostParams {
    worst_case_wait_w: f64,
    congestion_error_prob: f64,
    deanon_fraction_phi: f64,
    n_nonprivate: u64,
    n_private: u64,
}

impl TryFrom<RawCostParams> for CostParams {
    type Error = CostError;

    fn try_from(r: RawCostParams) -> Result<Self, CostError> {
        CostParams::new(
            r.worst_case_wait_w,
            r.congestion_error_prob,
            r.deanon_fraction_phi,
            r.n_nonprivate,
            r.n_private,
        )
    }
}

impl Default for CostParams {
    /// Campus study: one-hour worst case, coin-flip study error, 80%
    /// re-identification, 2000 non-private and 5000 private people.
    fn default() -> Self {
        Self {
            worst_case_wait_w: 60.0,
            congestion_error_prob: 0.5,
            deanon_fraction_phi: 0.8,
            n_nonprivate: 2000,
            n_private: 5000,
        }
    }
}

impl CostParams {
    pub fn new(
        worst_case_wait_w: f64,
        congestion_error_prob: f64,
        deanon_fraction_phi: f64,
        n_nonprivate: u64,
        n_private: u64,
    ) -> Result<Self, CostError> {
        let params = Self {
            worst_case_wait_w,
            congestion_error_prob,
            deanon_fraction_phi,
            n_nonprivate,
            n_private,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (name, value) in [
            ("congestion_error_prob", self.congestion_error_prob),
            ("deanon_fraction_phi", self.deanon_fraction_phi),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(CostError::ProbabilityOutOfRange { name, value });
            }
        }
        if !(self.worst_case_wait_w.is_finite() && self.worst_case_wait_w >= 0.0) {
            return Err(CostError::InvalidWait(self.worst_case_wait_w));
        }
        if self.n_nonprivate == 0 {
            return Err(CostError::EmptyCohort("non-private"));
        }
        if self.n_private == 0 {
            return Err(CostError::EmptyCohort("private"));
        }
        Ok(())
    }
}

/// Expected per-person cost E of acting on the study's estimate.
pub fn base_cost(params: &CostParams) -> f64 {
    params.congestion_error_prob * params.worst_case_wait_w
}

pub fn nonprivate_cost(params: &CostParams) -> f64 {
    params.deanon_fraction_phi * params.worst_case_wait_w * params.n_nonprivate as f64
}

pub fn private_cost(epsilon: f64, params: &CostParams) -> Result<f64, CostError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(CostError::InvalidEpsilon(epsilon));
    }
    Ok(epsilon.exp_m1() * base_cost(params) * params.n_private as f64)
}

/// The epsilon at which private and non-private costs are equal.
pub fn breakeven_epsilon(params: &CostParams) -> Result<f64, CostError> {
    let per_unit_epsilon = base_cost(params) * params.n_private as f64;
    if per_unit_epsilon <= 0.0 {
        return Err(CostError::DegenerateCostModel);
    }
    Ok((nonprivate_cost(params) / per_unit_epsilon).ln_1p())
}

/// Whether private participation is strictly cheaper at `epsilon`.
///
/// Decided in epsilon space so that `epsilon == breakeven` is never favored,
/// independent of rounding in the two cost evaluations.
pub fn participation_favored(epsilon: f64, params: &CostParams) -> Result<bool, CostError> {
    match breakeven_epsilon(params) {
        Ok(breakeven) => Ok(epsilon < breakeven),
        // Private cost is identically zero.
        Err(CostError::DegenerateCostModel) => Ok(0.0 < nonprivate_cost(params)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCurvePoint {
    pub epsilon: f64,
    pub private_cost: f64,
    pub nonprivate_cost: f64,
    pub participation_favored: bool,
}

pub fn cost_curve(epsilons: &[f64], params: &CostParams) -> Result<Vec<CostCurvePoint>, CostError> {
    if epsilons.is_empty() {
        return Err(CostError::EmptyGrid);
    }
    let mut prev = 0.0;
    for (i, &eps) in epsilons.iter().enumerate() {
        if !eps.is_finite() || eps <= 0.0 || (i > 0 && eps <= prev) {
            return Err(CostError::InvalidGrid(eps));
        }
        prev = eps;
    }
    let nonprivate = nonprivate_cost(params);
    epsilons
        .iter()
        .map(|&epsilon| {
            Ok(CostCurvePoint {
                epsilon,
                private_cost: private_cost(epsilon, params)?,
                nonprivate_cost: nonprivate,
                participation_favored: participation_favored(epsilon, params)?,
            })
        })
        .collect()
}
