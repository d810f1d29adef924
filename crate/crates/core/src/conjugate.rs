//! Two-endpoint binomial pilot model with exact conjugate posteriors.
//!
//! Follow-up is observed on all randomized participants (2n) and adherence
//! on the intervention arm only (n). Both rates carry beta priors, so the
//! posterior probability of the go region is a product of two beta tail
//! probabilities and the operating characteristics admit an exact
//! enumeration-plus-quadrature oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::HypothesisLabel;
use crate::dist::{draw_beta, draw_binomial, DistSpec};
use crate::error::{Error, Result};
use crate::oc::OCReport;
use crate::special::{beta_ln_pdf, beta_sf, binomial_ln_pmf, gauss_legendre_on};

/// Outcome-count capacity limit for the exact enumeration path.
const MAX_ENUMERATION: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateScenario {
    pub n_per_arm: u64,
    pub followup_threshold: f64,
    pub adherence_threshold: f64,
    pub design_prior_f: DistSpec,
    pub design_prior_a: DistSpec,
    pub analysis_prior_f: DistSpec,
    pub analysis_prior_a: DistSpec,
}

/// Substantive parameters: true follow-up and adherence rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateParams {
    pub p_f: f64,
    pub p_a: f64,
}

/// Observed counts: followed-up out of 2n, adherent out of n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateData {
    pub x_f: u64,
    pub x_a: u64,
}

impl ConjugateScenario {
    /// Design priors and thresholds of the child-psychotherapy case study.
    pub fn case_study(n_per_arm: u64) -> Self {
        ConjugateScenario {
            n_per_arm,
            followup_threshold: 0.8,
            adherence_threshold: 0.7,
            design_prior_f: DistSpec::Beta { alpha: 40.0, beta: 10.0 },
            design_prior_a: DistSpec::Beta { alpha: 11.2, beta: 4.8 },
            analysis_prior_f: DistSpec::Beta { alpha: 1.0, beta: 1.0 },
            analysis_prior_a: DistSpec::Beta { alpha: 1.0, beta: 1.0 },
        }
    }

    /// Participants contributing to the follow-up count (both arms).
    pub fn n_followup(&self) -> u64 {
        2 * self.n_per_arm
    }

    /// Participants contributing to the adherence count (intervention arm).
    pub fn n_adherence(&self) -> u64 {
        self.n_per_arm
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_arm == 0 {
            return Err(Error::Validation("n_per_arm must be at least 1".into()));
        }
        for (name, t) in [
            ("followup_threshold", self.followup_threshold),
            ("adherence_threshold", self.adherence_threshold),
        ] {
            if !t.is_finite() || t <= 0.0 || t >= 1.0 {
                return Err(Error::Validation(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        for prior in [
            &self.design_prior_f,
            &self.design_prior_a,
            &self.analysis_prior_f,
            &self.analysis_prior_a,
        ] {
            prior.as_beta()?;
            prior.validate()?;
        }
        Ok(())
    }
}

/// Hypothesis label of a parameter point. The partition is binary: green
/// iff both rates meet their thresholds (boundaries inclusive), red
/// otherwise. Amber is never produced.
pub fn classify(params: &ConjugateParams, scenario: &ConjugateScenario) -> HypothesisLabel {
    if params.p_f >= scenario.followup_threshold && params.p_a >= scenario.adherence_threshold {
        HypothesisLabel::G
    } else {
        HypothesisLabel::R
    }
}

/// Draw true rates from the design prior.
pub fn draw_design_prior<R: Rng>(scenario: &ConjugateScenario, rng: &mut R) -> Result<ConjugateParams> {
    let (af, bf) = scenario.design_prior_f.as_beta()?;
    let (aa, ba) = scenario.design_prior_a.as_beta()?;
    Ok(ConjugateParams { p_f: draw_beta(rng, af, bf), p_a: draw_beta(rng, aa, ba) })
}

/// Simulate pilot counts: x_f ~ Bin(2n, p_f), x_a ~ Bin(n, p_a), independent.
pub fn simulate<R: Rng>(
    params: &ConjugateParams,
    scenario: &ConjugateScenario,
    rng: &mut R,
) -> ConjugateData {
    ConjugateData {
        x_f: draw_binomial(rng, scenario.n_followup(), params.p_f),
        x_a: draw_binomial(rng, scenario.n_adherence(), params.p_a),
    }
}

/// Exact posterior probability of the go region given the counts:
/// the product of the two beta posterior tail probabilities above the
/// respective thresholds, under the analysis priors.
pub fn exact_pg(data: &ConjugateData, scenario: &ConjugateScenario) -> Result<f64> {
    let (af, bf) = scenario.analysis_prior_f.as_beta()?;
    let (aa, ba) = scenario.analysis_prior_a.as_beta()?;
    let nf = scenario.n_followup();
    let na = scenario.n_adherence();
    if data.x_f > nf || data.x_a > na {
        return Err(Error::Domain(format!(
            "counts out of range: x_f={} of {nf}, x_a={} of {na}",
            data.x_f, data.x_a
        )));
    }
    let tail_f = beta_sf(
        scenario.followup_threshold,
        af + data.x_f as f64,
        bf + (nf - data.x_f) as f64,
    )?;
    let tail_a = beta_sf(
        scenario.adherence_threshold,
        aa + data.x_a as f64,
        ba + (na - data.x_a) as f64,
    )?;
    Ok(tail_f * tail_a)
}

/// Exact operating characteristics of the threshold rule `g iff p_G > c1`.
///
/// The outcome space is enumerated exactly; the prior integral over the
/// true rates is computed by tensor-product Gauss-Legendre quadrature with
/// `grid_resolution` nodes per axis segment, the segments being split at
/// the partition thresholds so the integrand is smooth on each piece.
pub fn exact_ocs(scenario: &ConjugateScenario, c1: f64, grid_resolution: usize) -> Result<OCReport> {
    scenario.validate()?;
    if !(0.0..=1.0).contains(&c1) {
        return Err(Error::Validation(format!("c1 must lie in [0, 1], got {c1}")));
    }
    if grid_resolution < 100 {
        return Err(Error::Validation(format!(
            "grid_resolution must be at least 100, got {grid_resolution}"
        )));
    }
    let nf = scenario.n_followup();
    let na = scenario.n_adherence();
    if nf.saturating_mul(na) > MAX_ENUMERATION {
        return Err(Error::Capacity(format!(
            "exact enumeration over {} outcomes exceeds the {} limit; use the Monte Carlo path",
            nf * na,
            MAX_ENUMERATION
        )));
    }

    // Posterior tail factors for every possible count; both are
    // non-decreasing in the count.
    let tail_f: Vec<f64> = (0..=nf)
        .map(|x| exact_pg_factor(scenario.followup_threshold, scenario.analysis_prior_f, x, nf))
        .collect::<Result<_>>()?;
    let tail_a: Vec<f64> = (0..=na)
        .map(|x| exact_pg_factor(scenario.adherence_threshold, scenario.analysis_prior_a, x, na))
        .collect::<Result<_>>()?;

    // For each adherence count, the smallest follow-up count that triggers
    // a green decision (p_G > c1). nf + 1 means "never".
    let xf_min: Vec<u64> = tail_a
        .iter()
        .map(|va| {
            tail_f.partition_point(|uf| uf * va <= c1) as u64
        })
        .collect();

    let (af, bf) = scenario.design_prior_f.as_beta()?;
    let (aa, ba) = scenario.design_prior_a.as_beta()?;
    let tf = scenario.followup_threshold;
    let ta = scenario.adherence_threshold;

    // Quadrature nodes on each axis, split at the threshold. Each node
    // carries weight x prior density.
    let axis = |lo: f64, hi: f64, a: f64, b: f64| -> (Vec<f64>, Vec<f64>) {
        let (x, w) = gauss_legendre_on(grid_resolution, lo, hi);
        let wd = x.iter().zip(&w).map(|(x, w)| w * beta_ln_pdf(*x, a, b).exp()).collect();
        (x, wd)
    };
    let (pf_lo, wf_lo) = axis(0.0, tf, af, bf);
    let (pf_hi, wf_hi) = axis(tf, 1.0, af, bf);
    let (pa_lo, wa_lo) = axis(0.0, ta, aa, ba);
    let (pa_hi, wa_hi) = axis(ta, 1.0, aa, ba);

    // Pr[green | p_f, p_a] for a single quadrature node pair.
    let prob_green = |p_f: f64, p_a: f64| -> f64 {
        // Upper-tail cdf of Bin(nf, p_f) indexed by threshold count.
        let pmf_f: Vec<f64> = (0..=nf).map(|x| binomial_ln_pmf(x, nf, p_f).exp()).collect();
        let mut tail = vec![0.0; (nf + 2) as usize];
        for x in (0..=nf as usize).rev() {
            tail[x] = tail[x + 1] + pmf_f[x];
        }
        (0..=na)
            .map(|xa| binomial_ln_pmf(xa, na, p_a).exp() * tail[xf_min[xa as usize] as usize])
            .sum()
    };

    // Integrate Pr[g] (for OC1, over the red region) and Pr[r] = 1 - Pr[g]
    // (for OC2, over the green region).
    let mut oc1 = 0.0;
    let mut oc2 = 0.0;
    // Red region: p_f below threshold (any p_a), or p_f above but p_a below.
    for (pf, wf) in pf_lo.iter().zip(&wf_lo) {
        for (pa, wa) in pa_lo.iter().zip(&wa_lo).chain(pa_hi.iter().zip(&wa_hi)) {
            oc1 += wf * wa * prob_green(*pf, *pa);
        }
    }
    for (pf, wf) in pf_hi.iter().zip(&wf_hi) {
        for (pa, wa) in pa_lo.iter().zip(&wa_lo) {
            oc1 += wf * wa * prob_green(*pf, *pa);
        }
        // Green region.
        for (pa, wa) in pa_hi.iter().zip(&wa_hi) {
            oc2 += wf * wa * (1.0 - prob_green(*pf, *pa));
        }
    }

    Ok(OCReport {
        oc1,
        oc2,
        oc3: 0.0,
        se1: 0.0,
        se2: 0.0,
        se3: 0.0,
        expected_loss: c1 * oc1 + (1.0 - c1) * oc2,
        n_replicates: 0,
        n_nonconverged: 0,
    })
}

fn exact_pg_factor(threshold: f64, prior: DistSpec, x: u64, n: u64) -> Result<f64> {
    let (a, b) = prior.as_beta()?;
    beta_sf(threshold, a + x as f64, b + (n - x) as f64)
}
