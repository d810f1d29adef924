//! Loss table, expected losses, and the optimal progression decision.

use serde::{Deserialize, Serialize};

use crate::elicit::LossParams;
use crate::error::{Error, Result};

/// Traffic-light progression decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Red,
    Amber,
    Green,
}

impl Decision {
    pub const ALL: [Decision; 3] = [Decision::Red, Decision::Amber, Decision::Green];
}

/// Region of the substantive parameter space in which the corresponding
/// decision would be optimal under certainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HypothesisLabel {
    R,
    A,
    G,
}

impl HypothesisLabel {
    /// Label ordering used by monotonicity checks: R < A < G.
    pub fn rank(&self) -> u8 {
        match self {
            HypothesisLabel::R => 0,
            HypothesisLabel::A => 1,
            HypothesisLabel::G => 2,
        }
    }
}

impl std::fmt::Display for HypothesisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HypothesisLabel::R => write!(f, "R"),
            HypothesisLabel::A => write!(f, "A"),
            HypothesisLabel::G => write!(f, "G"),
        }
    }
}

impl std::str::FromStr for HypothesisLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(HypothesisLabel::R),
            "A" => Ok(HypothesisLabel::A),
            "G" => Ok(HypothesisLabel::G),
            other => Err(Error::Format(format!("unknown hypothesis label {other:?}"))),
        }
    }
}

/// Which of the three errors a (decision, hypothesis) pair incurs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorTriple {
    /// Proceeded to an infeasible main trial.
    pub e1: bool,
    /// Discarded a promising intervention.
    pub e2: bool,
    /// Made unnecessary adjustments.
    pub e3: bool,
}

/// Posterior probabilities of the three hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisProbs {
    pub p_r: f64,
    pub p_a: f64,
    pub p_g: f64,
}

impl HypothesisProbs {
    /// Validate and renormalize a probability triple. Monte Carlo estimates
    /// may carry rounding drift; the sum must still be within 1e-6 of 1.
    pub fn new(p_r: f64, p_a: f64, p_g: f64) -> Result<Self> {
        for (name, v) in [("p_r", p_r), ("p_a", p_a), ("p_g", p_g)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "hypothesis probability {name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let sum = p_r + p_a + p_g;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "hypothesis probabilities must sum to 1, got {sum}"
            )));
        }
        Ok(HypothesisProbs { p_r: p_r / sum, p_a: p_a / sum, p_g: p_g / sum })
    }

    /// Degenerate distribution concentrated on one hypothesis.
    pub fn certain(label: HypothesisLabel) -> Self {
        match label {
            HypothesisLabel::R => HypothesisProbs { p_r: 1.0, p_a: 0.0, p_g: 0.0 },
            HypothesisLabel::A => HypothesisProbs { p_r: 0.0, p_a: 1.0, p_g: 0.0 },
            HypothesisLabel::G => HypothesisProbs { p_r: 0.0, p_a: 0.0, p_g: 1.0 },
        }
    }
}

/// Error indicators for a decision taken under a known hypothesis.
pub fn errors(d: Decision, h: HypothesisLabel) -> ErrorTriple {
    use Decision::*;
    use HypothesisLabel::*;
    let (e1, e2, e3) = match (d, h) {
        (Red, R) | (Amber, A) | (Green, G) => (false, false, false),
        (Amber, R) => (true, false, true),
        (Green, R) => (true, false, false),
        (Red, A) => (false, true, false),
        (Green, A) => (true, true, false),
        (Red, G) => (false, true, false),
        (Amber, G) => (false, false, true),
    };
    ErrorTriple { e1, e2, e3 }
}

///// Piecewise-constant loss: the dot product of the error indicators with the
/// loss weights.
pub fn loss(d: Decision, h: HypothesisLabel, c: &LossParams) -> f64 {
    let e = errors(d, h);
    c.c1 * (e.e1 as u8 as f64) + c.c2 * (e.e2 as u8 as f64) + c.c3 * (e.e3 as u8 as f64)
}

/// Posterior expected loss of a decision.
pub fn expected_loss(d: Decision, p: &HypothesisProbs, c: &LossParams) -> f64 {
    match d {
        Decision::Red => c.c2 * (p.p_a + p.p_g),
        Decision::Amber => (c.c1 + c.c3) * p.p_r + c.c3 * p.p_g,
        Decision::Green => c.c1 * p.p_r + (c.c1 + c.c2) * p.p_a,
    }
}

/// Expected-loss-minimizing decision. Ties are broken in the fixed order
/// r, g, a: preferring g over a on ties preserves the binary reduction
/// "choose g iff p_g > c1" when c3 = 0, where a and g always tie.
pub fn decide(p: &HypothesisProbs, c: &LossParams) -> Decision {
    let mut best = Decision::Red;
    let mut best_loss = expected_loss(Decision::Red, p, c);
    for d in [Decision::Green, Decision::Amber] {
        let l = expected_loss(d, p, c);
        if l < best_loss {
            best = d;
            best_loss = l;
        }
    }
    best
}

/// Monte Carlo hypothesis probabilities from classified posterior draws.
pub fn probs_from_labels(labels: &[HypothesisLabel]) -> Result<HypothesisProbs> {
    if labels.is_empty() {
        return Err(Error::Estimation("cannot estimate probabilities from zero samples".into()));
    }
    let m = labels.len() as f64;
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.rank() as usize] += 1;
    }
    Ok(HypothesisProbs {
        p_r: counts[0] as f64 / m,
        p_a: counts[1] as f64 / m,
        p_g: counts[2] as f64 / m,
    })
}
