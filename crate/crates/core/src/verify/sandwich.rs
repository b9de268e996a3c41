//! Hit probabilities against capacities over a family of sets.

use serde::{Deserialize, Serialize};

use crate::capacity::CapacityResult;
use crate::error::{invalid, Result};
use crate::hitting::HitProbEstimate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub set_id: String,
    pub capacity: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ratio: f64,
    pub retained: bool,
    pub polarity_violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// Largest over smallest ratio among retained rows.
    pub band: f64,
    /// Smallest `K` with `Cap/K ≤ p ≤ K·Cap` on retained rows.
    pub k_fit: f64,
    pub ceiling: f64,
    pub pass: bool,
}

/// A zero-capacity set whose estimate is not consistent with zero violates polarity.
///
/// Consistent with zero means `ci_low = 0` and `p_hat ≤ 5/n`.
pub fn sandwich_report(
    ids: &[String],
    capacities: &[CapacityResult],
    hits: &[HitProbEstimate],
    ceiling: f64,
) -> Result<SandwichReport> {
    if ids.len() != capacities.len() || hits.len() != capacities.len() || ids.is_empty() {
        return invalid("ids, capacities and hit estimates must have equal nonzero length");
    }
    let mut rows = Vec::new();
    for ((id, cap), hit) in ids.iter().zip(capacities).zip(hits) {
        let c = cap.value;
        let zero_cap = c <= 0.0;
        let consistent_zero = hit.ci_low == 0.0 && hit.p_hat <= 5.0 / hit.n_paths as f64;
        let retained = !zero_cap && hit.p_hat > 0.0;
        rows.push(SandwichRow {
            set_id: id.clone(),
            capacity: c,
            p_hat: hit.p_hat,
            ci_low: hit.ci_low,
            ci_high: hit.ci_high,
            ratio: if zero_cap { f64::NAN } else { hit.p_hat / c },
            retained,
            polarity_violation: zero_cap && !consistent_zero,
        });
    }
    let kept: Vec<f64> = rows.iter().filter(|r| r.retained).map(|r| r.ratio).collect();
    let (hi, lo) = (kept.iter().cloned().fold(f64::NAN, f64::max), kept.iter().cloned().fold(f64::NAN, f64::min));
    let band = hi / lo;
    let k_fit = hi.max(1.0 / lo);
    let pass = band.is_finite() && band <= ceiling && !rows.iter().any(|r| r.polarity_violation);
    Ok(SandwichReport { rows, band, k_fit, ceiling, pass })
}
