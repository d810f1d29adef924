//! Blocked Gibbs sampler for the cluster-randomized pilot model.
//!
//! Conjugate updates cover the cluster-size block (normal / inverse-gamma),
//! the two rates (beta-binomial), the treatment effect, and the cluster
//! random effects (Gaussian conditionals). The within-cluster variance and
//! the ICC are updated by a joint random-walk Metropolis step on
//! (log sigma2_w, logit rho), tuned to a 20-50% acceptance rate during
//! burn-in with the adaptation frozen afterwards.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{probs_from_labels, HypothesisLabel, HypothesisProbs};
use crate::dist::{draw_beta, draw_inv_gamma, draw_nig, draw_normal, DistSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{beta_ln_pdf, inv_gamma_ln_pdf, normal_ln_pdf};

use super::{classify, AnalysisPrior, HierDataset, HierParams, HypothesisPartition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub chains: u32,
    pub iterations: u32,
    pub burnin: u32,
    /// Initial proposal sd on the log within-cluster-variance coordinate.
    pub step_sigma_w: f64,
    /// Initial proposal sd on the logit ICC coordinate.
    pub step_rho: f64,
    /// Split R-hat above this flags the run as non-converged.
    pub rhat_threshold: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chains: 4,
            iterations: 5000,
            burnin: 2500,
            step_sigma_w: 0.4,
            step_rho: 0.4,
            rhat_threshold: 1.05,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 {
            return Err(Error::Validation("chains must be at least 1".into()));
        }
        if self.iterations <= self.burnin {
            return Err(Error::Validation(format!(
                "iterations ({}) must exceed burnin ({})",
                self.iterations, self.burnin
            )));
        }
        if self.step_sigma_w <= 0.0 || self.step_rho <= 0.0 {
            return Err(Error::Validation("proposal step sizes must be positive".into()));
        }
        if self.rhat_threshold < 1.0 {
            return Err(Error::Validation("rhat_threshold must be at least 1".into()));
        }
        Ok(())
    }

    /// Retained draws across chains.
    pub fn total_draws(&self) -> usize {
        self.chains as usize * (self.iterations - self.burnin) as usize
    }
}

/// Split R-hat per monitored parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhatReport {
    pub mu_c: f64,
    pub sigma2_c: f64,
    pub p_f: f64,
    pub p_a: f64,
    pub mu: f64,
    pub sigma2_w: f64,
    pub rho: f64,
}

impl RhatReport {
    pub fn max(&self) -> f64 {
        [self.mu_c, self.sigma2_c, self.p_f, self.p_a, self.mu, self.sigma2_w, self.rho]
            .into_iter()
            .fold(f64::NAN, f64::max)
    }
}

/// Posterior draws of the substantive parameters, with diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub mu_c: Vec<f64>,
    pub p_f: Vec<f64>,
    pub p_a: Vec<f64>,
    pub mu: Vec<f64>,
    pub rhat: RhatReport,
    pub converged: bool,
    /// Mean Metropolis acceptance rate after burn-in, averaged over chains.
    pub accept_rate: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Per-cluster sufficient statistics.
struct ClusterStats {
    size: f64,
    n_obs: f64,
    sum_y: f64,
    sum_y2: f64,
    gated: bool,
}

struct DataStats {
    clusters: Vec<ClusterStats>,
    total_residents: f64,
    followed: f64,
    intervention_clusters: f64,
    adherent: f64,
    n_obs: f64,
    sum_sizes: f64,
    n_clusters: f64,
}

impl DataStats {
    fn build(data: &HierDataset) -> Self {
        let clusters: Vec<ClusterStats> = data
            .clusters
            .iter()
            .map(|c| ClusterStats {
                size: c.size as f64,
                n_obs: c.outcomes.len() as f64,
                sum_y: c.outcomes.iter().sum(),
                sum_y2: c.outcomes.iter().map(|y| y * y).sum(),
                gated: c.gate(),
            })
            .collect();
        DataStats {
            total_residents: data.total_residents() as f64,
            followed: data.total_followed_up() as f64,
            intervention_clusters: data.clusters_per_arm as f64,
            adherent: data.adherent_clusters() as f64,
            n_obs: clusters.iter().map(|c| c.n_obs).sum(),
            sum_sizes: clusters.iter().map(|c| c.size).sum(),
            n_clusters: clusters.len() as f64,
            clusters,
        }
    }
}

struct ChainState {
    mu_c: f64,
    sigma2_c: f64,
    p_f: f64,
    p_a: f64,
    mu: f64,
    sigma2_w: f64,
    rho: f64,
    u: Vec<f64>,
    /// Shared log scale multiplier for the joint Metropolis proposal.
    log_scale: f64,
    accepted: u64,
    proposed: u64,
}

impl ChainState {
    fn sigma2_b(&self) -> f64 {
        self.rho / (1.0 - self.rho) * self.sigma2_w
    }
}

fn init_chain<R: Rng>(prior: &AnalysisPrior, n_clusters: usize, rng: &mut R) -> Result<ChainState> {
    let (sigma2_c, mu_c) = match prior.mu_c {
        DistSpec::NormalInverseGamma { mu0, nu0, alpha0, beta0 } => {
            draw_nig(rng, mu0, nu0, alpha0, beta0)
        }
        DistSpec::Normal { mean, sd } => {
            let (shape, rate) = match prior.sigma2_c {
                Some(DistSpec::InverseGamma { shape, rate }) => (shape, rate),
                _ => unreachable!("validated prior"),
            };
            (draw_inv_gamma(rng, shape, rate), draw_normal(rng, mean, sd))
        }
        _ => unreachable!("validated prior"),
    };
    let (af, bf) = prior.p_f.as_beta()?;
    let (aa, ba) = prior.p_a.as_beta()?;
    let (mu_mean, mu_sd) = match prior.mu {
        DistSpec::Normal { mean, sd } => (mean, sd),
        _ => unreachable!("validated prior"),
    };
    let (ws, wr) = match prior.sigma2_w {
        DistSpec::InverseGamma { shape, rate } => (shape, rate),
        _ => unreachable!("validated prior"),
    };
    let (ra, rb) = prior.rho.as_beta()?;
    let sigma2_w = draw_inv_gamma(rng, ws, wr);
    let rho = draw_beta(rng, ra, rb).clamp(1e-12, 1.0 - 1e-12);
    let sigma_b = (rho / (1.0 - rho) * sigma2_w).sqrt();
    let u = (0..n_clusters).map(|_| draw_normal(rng, 0.0, sigma_b)).collect();
    Ok(ChainState {
        mu_c,
        sigma2_c,
        p_f: draw_beta(rng, af, bf),
        p_a: draw_beta(rng, aa, ba),
        mu: draw_normal(rng, mu_mean, mu_sd),
        sigma2_w,
        rho,
        u,
        log_scale: 0.0,
        accepted: 0,
        proposed: 0,
    })
}

fn update_rates<R: Rng>(state: &mut ChainState, prior: &AnalysisPrior, stats: &DataStats, rng: &mut R) {
    let (af, bf) = prior.p_f.as_beta().expect("validated prior");
    state.p_f = draw_beta(
        rng,
        af + stats.followed,
        bf + (stats.total_residents - stats.followed),
    );
    let (aa, ba) = prior.p_a.as_beta().expect("validated prior");
    state.p_a = draw_beta(
        rng,
        aa + stats.adherent,
        ba + (stats.intervention_clusters - stats.adherent),
    );
}

fn update_cluster_size_block<R: Rng>(
    state: &mut ChainState,
    prior: &AnalysisPrior,
    stats: &DataStats,
    rng: &mut R,
) {
    let j = stats.n_clusters;
    let ss_given_mean: f64 = stats
        .clusters
        .iter()
        .map(|c| (c.size - state.mu_c).powi(2))
        .sum();
    match prior.mu_c {
        DistSpec::NormalInverseGamma { mu0, nu0, alpha0, beta0 } => {
            // sigma2 | mu_c includes the prior coupling term on mu_c.
            let shape = alpha0 + (j + 1.0) / 2.0;
            let rate = beta0 + 0.5 * (ss_given_mean + nu0 * (state.mu_c - mu0).powi(2));
            state.sigma2_c = draw_inv_gamma(rng, shape, rate);
            let nu_n = nu0 + j;
            let mean = (nu0 * mu0 + stats.sum_sizes) / nu_n;
            state.mu_c = draw_normal(rng, mean, (state.sigma2_c / nu_n).sqrt());
        }
        DistSpec::Normal { mean: m0, sd: s0 } => {
            let (shape0, rate0) = match prior.sigma2_c {
                Some(DistSpec::InverseGamma { shape, rate }) => (shape, rate),
                _ => unreachable!("validated prior"),
            };
            state.sigma2_c = draw_inv_gamma(rng, shape0 + j / 2.0, rate0 + 0.5 * ss_given_mean);
            let prec = 1.0 / (s0 * s0) + j / state.sigma2_c;
            let mean = (m0 / (s0 * s0) + stats.sum_sizes / state.sigma2_c) / prec;
            state.mu_c = draw_normal(rng, mean, prec.recip().sqrt());
        }
        _ => unreachable!("validated prior"),
    }
}

fn update_random_effects<R: Rng>(state: &mut ChainState, stats: &DataStats, rng: &mut R) {
    let sigma2_b = state.sigma2_b();
    for (j, c) in stats.clusters.iter().enumerate() {
        if c.n_obs == 0.0 {
            state.u[j] = draw_normal(rng, 0.0, sigma2_b.sqrt().max(1e-154));
            continue;
        }
        let effect = if c.gated { state.mu } else { 0.0 };
        let prec = 1.0 / sigma2_b + c.n_obs / state.sigma2_w;
        let mean = (c.sum_y - c.n_obs * effect) / state.sigma2_w / prec;
        state.u[j] = draw_normal(rng, mean, prec.recip().sqrt());
    }
}

fn update_treatment_effect<R: Rng>(
    state: &mut ChainState,
    prior: &AnalysisPrior,
    stats: &DataStats,
    rng: &mut R,
) {
    let (m0, s0) = match prior.mu {
        DistSpec::Normal { mean, sd } => (mean, sd),
        _ => unreachable!("validated prior"),
    };
    let mut n_gated = 0.0;
    let mut sum_resid = 0.0;
    for (j, c) in stats.clusters.iter().enumerate() {
        if c.gated {
            n_gated += c.n_obs;
            sum_resid += c.sum_y - c.n_obs * state.u[j];
        }
    }
    let prec = 1.0 / (s0 * s0) + n_gated / state.sigma2_w;
    let mean = (m0 / (s0 * s0) + sum_resid / state.sigma2_w) / prec;
    state.mu = draw_normal(rng, mean, prec.recip().sqrt());
}

/// Log conditional density of (sigma2_w, rho) given everything else, on the
/// original scale, without the transform Jacobian.
fn variance_log_target(
    sigma2_w: f64,
    rho: f64,
    state: &ChainState,
    prior: &AnalysisPrior,
    stats: &DataStats,
) -> f64 {
    let (ws, wr) = match prior.sigma2_w {
        DistSpec::InverseGamma { shape, rate } => (shape, rate),
        _ => unreachable!("validated prior"),
    };
    let (ra, rb) = prior.rho.as_beta().expect("validated prior");
    let sigma2_b = rho / (1.0 - rho) * sigma2_w;
    let sigma_b = sigma2_b.sqrt();
    let mut lp = inv_gamma_ln_pdf(sigma2_w, ws, wr) + beta_ln_pdf(rho, ra, rb);
    for (j, c) in stats.clusters.iter().enumerate() {
        lp += normal_ln_pdf(state.u[j], 0.0, sigma_b);
        if c.n_obs > 0.0 {
            let shift = if c.gated { state.mu } else { 0.0 } + state.u[j];
            let ssr = c.sum_y2 - 2.0 * shift * c.sum_y + c.n_obs * shift * shift;
            lp += -0.5 * c.n_obs * (2.0 * std::f64::consts::PI * sigma2_w).ln()
                - ssr / (2.0 * sigma2_w);
        }
    }
    lp
}

fn update_variance_components<R: Rng>(
    state: &mut ChainState,
    prior: &AnalysisPrior,
    config: &McmcConfig,
    stats: &DataStats,
    adapt_step: Option<u64>,
    rng: &mut R,
) {
    let scale = state.log_scale.exp();
    let z1 = state.sigma2_w.ln() + scale * config.step_sigma_w * draw_normal(rng, 0.0, 1.0);
    let logit = (state.rho / (1.0 - state.rho)).ln();
    let z2 = logit + scale * config.step_rho * draw_normal(rng, 0.0, 1.0);
    let prop_sigma2_w = z1.exp();
    let prop_rho = 1.0 / (1.0 + (-z2).exp());

    let mut accept_prob = 0.0;
    if prop_sigma2_w.is_finite() && prop_rho > 0.0 && prop_rho < 1.0 {
        let lp_cur = variance_log_target(state.sigma2_w, state.rho, state, prior, stats)
            + state.sigma2_w.ln()
            + state.rho.ln()
            + (1.0 - state.rho).ln();
        let lp_prop = variance_log_target(prop_sigma2_w, prop_rho, state, prior, stats)
            + prop_sigma2_w.ln()
            + prop_rho.ln()
            + (1.0 - prop_rho).ln();
        accept_prob = (lp_prop - lp_cur).exp().min(1.0);
        if rng.gen::<f64>() < accept_prob {
            state.sigma2_w = prop_sigma2_w;
            state.rho = prop_rho;
            state.accepted += 1;
        }
    }
    state.proposed += 1;

    // Robbins-Monro adaptation towards 30% acceptance, burn-in only.
    if let Some(t) = adapt_step {
        let gain = 1.0 / (1.0 + t as f64).powf(0.6);
        state.log_scale += gain * (accept_prob - 0.3);
        state.log_scale = state.log_scale.clamp(-8.0, 8.0);
    }
}

/// Draw directly from the analysis prior; used when the dataset carries no
/// outcomes at all, in which case the outcome block's posterior is its
/// prior.
fn draw_outcome_prior<R: Rng>(state: &mut ChainState, prior: &AnalysisPrior, rng: &mut R) {
    let (m0, s0) = match prior.mu {
        DistSpec::Normal { mean, sd } => (mean, sd),
        _ => unreachable!("validated prior"),
    };
    let (ws, wr) = match prior.sigma2_w {
        DistSpec::InverseGamma { shape, rate } => (shape, rate),
        _ => unreachable!("validated prior"),
    };
    let (ra, rb) = prior.rho.as_beta().expect("validated prior");
    state.mu = draw_normal(rng, m0, s0);
    state.sigma2_w = draw_inv_gamma(rng, ws, wr);
    state.rho = draw_beta(rng, ra, rb).clamp(1e-12, 1.0 - 1e-12);
}

/// Split R-hat over a set of chains (each chain halved).
fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut sequences: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let half = c.len() / 2;
        sequences.push(&c[..half]);
        sequences.push(&c[half..half * 2]);
    }
    let n = sequences[0].len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let m = sequences.len() as f64;
    let means: Vec<f64> = sequences.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = sequences
        .iter()
        .zip(&means)
        .map(|(s, mean)| s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        // Degenerate chains (constant draws) are treated as converged.
        return 1.0;
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

/// Run the sampler and return the pooled post-burn-in draws of the
/// substantive parameters. Non-convergence (any split R-hat above the
/// configured threshold) flags the result rather than failing it.
pub fn posterior_sample(
    data: &HierDataset,
    prior: &AnalysisPrior,
    config: &McmcConfig,
    stream: RngStream,
) -> Result<PosteriorDraws> {
    data.validate()?;
    prior.validate()?;
    config.validate()?;

    let stats = DataStats::build(data);
    let keep = (config.iterations - config.burnin) as usize;
    let n_chains = config.chains as usize;

    // Per-parameter, per-chain traces for the R-hat diagnostic.
    let mut traces: Vec<[Vec<f64>; 7]> = Vec::with_capacity(n_chains);
    let mut accept_total = 0.0;

    for chain in 0..n_chains {
        let mut rng = stream.substream(chain as u64).rng();
        let mut state = init_chain(prior, stats.clusters.len(), &mut rng)?;
        let mut trace: [Vec<f64>; 7] = Default::default();
        for t in trace.iter_mut() {
            t.reserve(keep);
        }
        for iter in 0..config.iterations {
            update_rates(&mut state, prior, &stats, &mut rng);
            update_cluster_size_block(&mut state, prior, &stats, &mut rng);
            if stats.n_obs > 0.0 {
                update_random_effects(&mut state, &stats, &mut rng);
                update_treatment_effect(&mut state, prior, &stats, &mut rng);
                let adapt = (iter < config.burnin).then_some(iter as u64);
                update_variance_components(&mut state, prior, config, &stats, adapt, &mut rng);
            } else {
                draw_outcome_prior(&mut state, prior, &mut rng);
            }
            if iter == config.burnin {
                // Acceptance bookkeeping restarts after adaptation stops.
                state.accepted = 0;
                state.proposed = 0;
            }
            if iter >= config.burnin {
                trace[0].push(state.mu_c);
                trace[1].push(state.sigma2_c);
                trace[2].push(state.p_f);
                trace[3].push(state.p_a);
                trace[4].push(state.mu);
                trace[5].push(state.sigma2_w);
                trace[6].push(state.rho);
            }
        }
        accept_total += if state.proposed > 0 {
            state.accepted as f64 / state.proposed as f64
        } else {
            // No Metropolis steps were needed (no outcome data).
            f64::NAN
        };
        traces.push(trace);
    }

    let rhat_for = |idx: usize| -> f64 {
        let chains: Vec<Vec<f64>> = traces.iter().map(|t| t[idx].clone()).collect();
        split_rhat(&chains)
    };
    let rhat = RhatReport {
        mu_c: rhat_for(0),
        sigma2_c: rhat_for(1),
        p_f: rhat_for(2),
        p_a: rhat_for(3),
        mu: rhat_for(4),
        sigma2_w: rhat_for(5),
        rho: rhat_for(6),
    };
    let converged = rhat.max() <= config.rhat_threshold;

    let pool = |idx: usize| -> Vec<f64> {
        traces.iter().flat_map(|t| t[idx].iter().copied()).collect()
    };
    Ok(PosteriorDraws {
        mu_c: pool(0),
        p_f: pool(2),
        p_a: pool(3),
        mu: pool(4),
        rhat,
        converged,
        accept_rate: accept_total / n_chains as f64,
    })
}

/// Posterior hypothesis probabilities: classify every posterior draw and
/// average the indicators.
pub fn posterior_hypothesis_probs(
    data: &HierDataset,
    prior: &AnalysisPrior,
    partition: &HypothesisPartition,
    config: &McmcConfig,
    stream: RngStream,
) -> Result<(HypothesisProbs, PosteriorDraws)> {
    partition.validate()?;
    let draws = posterior_sample(data, prior, config, stream)?;
    let labels: Vec<HypothesisLabel> = (0..draws.len())
        .map(|i| {
            classify(
                &HierParams {
                    mu_c: draws.mu_c[i],
                    p_f: draws.p_f[i],
                    p_a: draws.p_a[i],
                    mu: draws.mu[i],
                    // Nuisance values are irrelevant to the partition.
                    sigma2_c: 1.0,
                    rho: 0.5,
                    sigma2_w: 1.0,
                },
                partition,
            )
        })
        .collect();
    let probs = probs_from_labels(&labels)?;
    Ok((probs, draws))
}
