//! Loss-parameter elicitation from indifference probabilities.
//!
//! Two gambles are put to the decision maker. In the first they adjust `p1`
//! until indifferent between incurring error E1 for certain and incurring
//! (E1, E3) with probability `p1`; in the second they adjust `p2` against
//! (E1, E2). The two indifference equations together with the unit-sum
//! constraint determine the loss weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-6;

/// Normalized weights on the three error events: proceeding to an infeasible
/// main trial (c1), discarding a promising intervention (c2), and making
/// unnecessary adjustments (c3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl LossParams {
    /// Validate and renormalize a raw triple. Each component must lie in
    /// [0, 1] and the sum must be within 1e-6 of 1; residual drift is
    /// renormalized away.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        for (name, v) in [("c1", c1), ("c2", c2), ("c3", c3)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "loss weight {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let sum = c1 + c2 + c3;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Validation(format!(
                "loss weights must sum to 1 (tolerance {SUM_TOL}), got {sum}"
            )));
        }
        Ok(LossParams { c1: c1 / sum, c2: c2 / sum, c3: c3 / sum })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }
}

/// The elicited indifference probabilities (p1, p2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndifferencePair {
    pub p1: f64,
    pub p2: f64,
}

impl IndifferencePair {
    /// Both probabilities must lie in (0, 1]. p = 0 would make the certain
    /// error infinitely worse than the gamble, contradicting the gamble
    /// construction; (1, 1) is degenerate but solvable.
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for (name, v) in [("p1", p1), ("p2", p2)] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(Error::Validation(format!(
                    "indifference probability {name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(IndifferencePair { p1, p2 })
    }

    /// The (1, 1) corner yields c = (1, 0, 0); callers should surface a
    /// warning since it implies the other two errors carry no weight.
    pub fn is_degenerate(&self) -> bool {
        self.p1 == 1.0 && self.p2 == 1.0
    }
}

/// Solve the indifference equations p1(c1 + c3) = c1 and p2(c1 + c2) = c1
/// under the unit-sum constraint.
pub fn loss_from_indifference(pair: IndifferencePair) -> Result<LossParams> {
    let (p1, p2) = (pair.p1, pair.p2);
    let denom = p1 * p2 - p1 - p2;
    let c1 = -p1 * p2 / denom;
    let c2 = (p1 * p2 - p1) / denom;
    let c3 = (p1 * p2 - p2) / denom;
    LossParams::new(c1.max(0.0), c2.max(0.0), c3.max(0.0))
}

/// Validate an arbitrary loss triple.
pub fn validate_loss(c1: f64, c2: f64, c3: f64) -> Result<LossParams> {
    LossParams::new(c1, c2, c3)
}
