//! Round-boundary model combination.
//!
//! * `balanced`: uniform average, `w_i = 1/P`.
//! * `tau_weighted`: `w_i = τ_i / Σ_j τ_j`, biasing the global model toward
//!   workers that performed more local updates.
//! * `fednova`: the opposite bias. Local deltas `W_i − W^t` are combined with
//!   normalized inverse-τ weights `(1/τ_i) / Σ_j (1/τ_j)` and added back to
//!   the round-start model. This is a simplified inverse-τ reading of FedNova
//!   (no effective-τ rescaling, no server momentum); it reproduces only the
//!   direction of its weighting.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{axpy, weighted_sum, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationRule {
    Balanced,
    TauWeighted,
    FedNova,
}

impl FromStr for AggregationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(AggregationRule::Balanced),
            "tau_weighted" => Ok(AggregationRule::TauWeighted),
            "fednova" => Ok(AggregationRule::FedNova),
            other => Err(Error::Config(format!("unknown aggregation rule `{other}`"))),
        }
    }
}

impl fmt::Display for AggregationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationRule::Balanced => "balanced",
            AggregationRule::TauWeighted => "tau_weighted",
            AggregationRule::FedNova => "fednova",
        })
    }
}

fn check_taus(taus: &[usize]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Empty("tau list"));
    }
    if taus.contains(&0) {
        return Err(Error::InvalidArgument("every tau must be at least 1".into()));
    }
    Ok(())
}

/// Per-worker weights for `rule`. Nonnegative, summing to one.
pub fn aggregation_weights(rule: AggregationRule, taus: &[usize]) -> Result<Vec<f64>> {
    check_taus(taus)?;
    let p = taus.len() as f64;
    Ok(match rule {
        AggregationRule::Balanced => vec![1.0 / p; taus.len()],
        AggregationRule::TauWeighted => {
            // integer total keeps each weight a single correctly rounded division
            let total: usize = taus.iter().sum();
            taus.iter().map(|&t| t as f64 / total as f64).collect()
        }
        AggregationRule::FedNova => {
            let inv: Vec<f64> = taus.iter().map(|&t| 1.0 / t as f64).collect();
            // summed in τ order so the total does not depend on worker order
            let mut sorted = taus.to_vec();
            sorted.sort_unstable();
            let total: f64 = sorted.iter().map(|&t| 1.0 / t as f64).sum();
            inv.iter().map(|v| v / total).collect()
        }
    })
}

/// Combines the locally trained `models` into the next global model.
/// `round_start` is the global model the round began from; only the
/// `fednova` rule reads it.
pub fn aggregate(
    rule: AggregationRule,
    models: &[ParamVector],
    taus: &[usize],
    round_start: &ParamVector,
) -> Result<ParamVector> {
    if models.is_empty() {
        return Err(Error::Empty("models"));
    }
    if models.len() != taus.len() {
        return Err(Error::LengthMismatch { expected: models.len(), found: taus.len() });
    }
    let weights = aggregation_weights(rule, taus)?;
    match rule {
        AggregationRule::Balanced | AggregationRule::TauWeighted => weighted_sum(models, &weights),
        AggregationRule::FedNova => {
            let deltas = models
                .iter()
                .map(|m| axpy(-1.0, round_start, m))
                .collect::<Result<Vec<_>>>()?;
            let step = weighted_sum(&deltas, &weights)?;
            axpy(1.0, &step, round_start)
        }
    }
}
