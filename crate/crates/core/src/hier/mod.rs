//! Cluster-randomized pilot model: design-prior sampling, trial simulation,
//! hypothesis classification with trade-offs, and a self-contained MCMC
//! posterior sampler.

mod mcmc;

pub use mcmc::{posterior_hypothesis_probs, posterior_sample, McmcConfig, PosteriorDraws};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decision::HypothesisLabel;
use crate::dist::{draw_beta, draw_inv_gamma, draw_nig, draw_normal, DistSpec};
use crate::error::{Error, Result};

/// Substantive parameters (mean cluster size, follow-up rate, adherence
/// rate, potential efficacy) and nuisance parameters (cluster-size
/// variance, ICC, within-cluster variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierParams {
    pub mu_c: f64,
    pub p_f: f64,
    pub p_a: f64,
    pub mu: f64,
    pub sigma2_c: f64,
    pub rho: f64,
    pub sigma2_w: f64,
}

impl HierParams {
    /// Between-cluster variance implied by the ICC parametrization.
    pub fn sigma2_b(&self) -> f64 {
        self.rho / (1.0 - self.rho) * self.sigma2_w
    }
}

/// One simulated cluster: size, arm, adherence (intervention clusters
/// only), and outcomes for the followed-up residents.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub size: u64,
    pub intervention: bool,
    /// Whole-cluster adherence indicator; `None` for control clusters.
    pub adherent: Option<bool>,
    /// One outcome per followed-up resident.
    pub outcomes: Vec<f64>,
}

impl Cluster {
    /// Treatment-effect gate: 1 for adherent intervention clusters.
    pub fn gate(&self) -> bool {
        self.intervention && self.adherent == Some(true)
    }
}

/// A simulated pilot dataset with k clusters per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct HierDataset {
    pub clusters_per_arm: u64,
    pub clusters: Vec<Cluster>,
}

impl HierDataset {
    pub fn total_residents(&self) -> u64 {
        self.clusters.iter().map(|c| c.size).sum()
    }

    pub fn total_followed_up(&self) -> u64 {
        self.clusters.iter().map(|c| c.outcomes.len() as u64).sum()
    }

    pub fn adherent_clusters(&self) -> u64 {
        self.clusters.iter().filter(|c| c.adherent == Some(true)).count() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.clusters_per_arm as usize;
        if k == 0 || self.clusters.len() != 2 * k {
            return Err(Error::Validation(format!(
                "expected {} clusters for k={}, got {}",
                2 * k,
                k,
                self.clusters.len()
            )));
        }
        let intervention = self.clusters.iter().filter(|c| c.intervention).count();
        if intervention != k {
            return Err(Error::Validation(format!(
                "expected {k} intervention clusters, got {intervention}"
            )));
        }
        for c in &self.clusters {
            if c.intervention != c.adherent.is_some() {
                return Err(Error::Validation(
                    "adherence indicators must exist exactly for intervention clusters".into(),
                ));
            }
            if (c.outcomes.len() as u64) > c.size {
                return Err(Error::Validation("more outcomes than residents in a cluster".into()));
            }
        }
        Ok(())
    }
}

/// A boundary line `threshold(x) = intercept + slope * x` in one of the
/// two-dimensional marginal spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryLine {
    pub intercept: f64,
    pub slope: f64,
}

impl BoundaryLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Hypothesis partition of the substantive parameter space, built from two
/// marginal partitions: information (follow-up rate vs mean cluster size)
/// and effectiveness (adherence rate vs potential efficacy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HypothesisPartition {
    pub followup_floor: f64,
    pub followup_amber: f64,
    /// Red boundary: mean cluster sizes below this line (as a function of
    /// follow-up rate) are red.
    pub info_red: BoundaryLine,
    pub info_green: BoundaryLine,
    pub adherence_floor: f64,
    pub adherence_amber: f64,
    /// Red boundary: adherence rates below this line (as a function of
    /// potential efficacy) are red.
    pub eff_red: BoundaryLine,
    pub eff_green: BoundaryLine,
}

impl Default for HypothesisPartition {
    fn default() -> Self {
        HypothesisPartition {
            followup_floor: 0.6,
            followup_amber: 0.66,
            info_red: BoundaryLine { intercept: 20.0, slope: -15.0 },
            info_green: BoundaryLine { intercept: 22.0, slope: -15.0 },
            adherence_floor: 0.5,
            adherence_amber: 0.6,
            eff_red: BoundaryLine { intercept: 0.96, slope: -0.57 },
            eff_green: BoundaryLine { intercept: 1.06, slope: -0.57 },
        }
    }
}

impl HypothesisPartition {
    pub fn validate(&self) -> Result<()> {
        if self.followup_amber < self.followup_floor {
            return Err(Error::Validation("follow-up amber band must sit above the floor".into()));
        }
        if self.adherence_amber < self.adherence_floor {
            return Err(Error::Validation("adherence amber band must sit above the floor".into()));
        }
        // The red line must lie below the green line everywhere on the
        // shared domain; with equal slopes this is an intercept comparison.
        if self.info_red.slope != self.info_green.slope
            || self.info_red.intercept >= self.info_green.intercept
        {
            return Err(Error::Validation("information red line must lie below the green line".into()));
        }
        if self.eff_red.slope != self.eff_green.slope
            || self.eff_red.intercept >= self.eff_green.intercept
        {
            return Err(Error::Validation("effectiveness red line must lie below the green line".into()));
        }
        Ok(())
    }
}

/// Marginal information hypothesis: follow-up rate against mean cluster
/// size, with a linear trade-off between the two.
pub fn classify_info(p_f: f64, mu_c: f64, partition: &HypothesisPartition) -> HypothesisLabel {
    if p_f < partition.followup_floor || partition.info_red.at(p_f) > mu_c {
        HypothesisLabel::R
    } else if p_f > partition.followup_amber && partition.info_green.at(p_f) < mu_c {
        HypothesisLabel::G
    } else {
        HypothesisLabel::A
    }
}

/// Marginal effectiveness hypothesis: adherence rate against potential
/// efficacy.
pub fn classify_eff(p_a: f64, mu: f64, partition: &HypothesisPartition) -> HypothesisLabel {
    if p_a < partition.adherence_floor || partition.eff_red.at(mu) > p_a {
        HypothesisLabel::R
    } else if p_a > partition.adherence_amber && partition.eff_green.at(mu) < p_a {
        HypothesisLabel::G
    } else {
        HypothesisLabel::A
    }
}

/// Combine the marginal labels: red if either marginal is red, green only
/// if both are green.
pub fn combine_labels(info: HypothesisLabel, eff: HypothesisLabel) -> HypothesisLabel {
    use HypothesisLabel::*;
    match (info, eff) {
        (R, _) | (_, R) => R,
        (G, G) => G,
        _ => A,
    }
}

/// Combined hypothesis of a parameter point.
pub fn classify(params: &HierParams, partition: &HypothesisPartition) -> HypothesisLabel {
    combine_labels(
        classify_info(params.p_f, params.mu_c, partition),
        classify_eff(params.p_a, params.mu, partition),
    )
}

/// Design prior over all seven parameters. Cluster size mean and variance
/// carry a joint normal-inverse-gamma component; the rest are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierDesignPrior {
    pub cluster_size: DistSpec,
    pub p_f: DistSpec,
    pub p_a: DistSpec,
    pub mu: DistSpec,
    pub sigma2_w: DistSpec,
    pub rho: DistSpec,
}

impl Default for HierDesignPrior {
    /// Care-home case-study design prior. The efficacy sd is 0.1, the value
    /// consistent with the case study's reported hypothesis proportions.
    fn default() -> Self {
        HierDesignPrior {
            cluster_size: DistSpec::NormalInverseGamma { mu0: 10.0, nu0: 6.0, alpha0: 20.0, beta0: 39.0 },
            p_f: DistSpec::Beta { alpha: 22.4, beta: 9.6 },
            p_a: DistSpec::Beta { alpha: 28.8, beta: 3.2 },
            mu: DistSpec::Normal { mean: 0.2, sd: 0.1 },
            sigma2_w: DistSpec::InverseGamma { shape: 50.0, rate: 45.0 },
            rho: DistSpec::Beta { alpha: 1.6, beta: 30.4 },
        }
    }
}

impl HierDesignPrior {
    pub fn validate(&self) -> Result<()> {
        match self.cluster_size {
            DistSpec::NormalInverseGamma { .. } => {}
            other => {
                return Err(Error::Validation(format!(
                    "cluster_size design prior must be normal_inverse_gamma, got {other:?}"
                )))
            }
        }
        self.cluster_size.validate()?;
        self.p_f.as_beta()?;
        self.p_a.as_beta()?;
        match self.mu {
            DistSpec::Normal { .. } => {}
            other => {
                return Err(Error::Validation(format!("mu design prior must be normal, got {other:?}")))
            }
        }
        self.mu.validate()?;
        match self.sigma2_w {
            DistSpec::InverseGamma { .. } => {}
            other => {
                return Err(Error::Validation(format!(
                    "sigma2_w design prior must be inverse_gamma, got {other:?}"
                )))
            }
        }
        self.sigma2_w.validate()?;
        self.rho.as_beta()?;
        Ok(())
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<HierParams> {
        self.validate()?;
        let (sigma2_c, mu_c) = match self.cluster_size {
            DistSpec::NormalInverseGamma { mu0, nu0, alpha0, beta0 } => {
                draw_nig(rng, mu0, nu0, alpha0, beta0)
            }
            _ => unreachable!("validated above"),
        };
        let (af, bf) = self.p_f.as_beta()?;
        let (aa, ba) = self.p_a.as_beta()?;
        let (mu_mean, mu_sd) = match self.mu {
            DistSpec::Normal { mean, sd } => (mean, sd),
            _ => unreachable!("validated above"),
        };
        let (ws, wr) = match self.sigma2_w {
            DistSpec::InverseGamma { shape, rate } => (shape, rate),
            _ => unreachable!("validated above"),
        };
        let (ra, rb) = self.rho.as_beta()?;
        Ok(HierParams {
            mu_c,
            sigma2_c,
            p_f: draw_beta(rng, af, bf),
            p_a: draw_beta(rng, aa, ba),
            mu: draw_normal(rng, mu_mean, mu_sd),
            sigma2_w: draw_inv_gamma(rng, ws, wr),
            rho: draw_beta(rng, ra, rb),
        })
    }
}

/// Simulate one pilot trial. Cluster sizes are normal draws rounded to the
/// nearest integer with floor 1; follow-up is per resident; adherence is a
/// whole-cluster on/off switch; outcomes exist only for followed-up
/// residents.
pub fn simulate_trial<R: Rng>(
    params: &HierParams,
    clusters_per_arm: u64,
    rng: &mut R,
) -> Result<HierDataset> {
    if clusters_per_arm == 0 {
        return Err(Error::Validation("clusters_per_arm must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&params.rho) || params.sigma2_w <= 0.0 || params.sigma2_c <= 0.0 {
        return Err(Error::Domain(format!(
            "invalid nuisance parameters: rho={}, sigma2_w={}, sigma2_c={}",
            params.rho, params.sigma2_w, params.sigma2_c
        )));
    }
    let sigma_b = params.sigma2_b().sqrt();
    let sigma_w = params.sigma2_w.sqrt();
    let sigma_c = params.sigma2_c.sqrt();
    let p_f = params.p_f.clamp(0.0, 1.0);
    let p_a = params.p_a.clamp(0.0, 1.0);

    let mut clusters = Vec::with_capacity(2 * clusters_per_arm as usize);
    for j in 0..2 * clusters_per_arm {
        let intervention = j >= clusters_per_arm;
        let size = draw_normal(rng, params.mu_c, sigma_c).round().max(1.0) as u64;
        let adherent = if intervention { Some(rng.gen_bool(p_a)) } else { None };
        let gate = intervention && adherent == Some(true);
        let u_j = if sigma_b > 0.0 { draw_normal(rng, 0.0, sigma_b) } else { 0.0 };
        let mut outcomes = Vec::new();
        for _ in 0..size {
            if rng.gen_bool(p_f) {
                let effect = if gate { params.mu } else { 0.0 };
                outcomes.push(effect + u_j + draw_normal(rng, 0.0, sigma_w));
            }
        }
        clusters.push(Cluster { size, intervention, adherent, outcomes });
    }
    Ok(HierDataset { clusters_per_arm, clusters })
}

/// Named analysis-prior presets: weakly informative, informative nuisance,
/// and informative nuisance plus adherence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorPreset {
    Wi,
    In,
    Ina,
}

/// Analysis prior: one distribution component per model parameter.
///
/// The cluster-size block accepts either a joint normal-inverse-gamma spec
/// or an independent normal mean / inverse-gamma variance pair; both admit
/// conjugate Gibbs conditionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisPrior {
    /// `NormalInverseGamma` for a joint block, or `Normal` for the mean
    /// with the variance prior taken from `sigma2_c`.
    pub mu_c: DistSpec,
    /// Required (and used) only when `mu_c` is `Normal`.
    pub sigma2_c: Option<DistSpec>,
    pub p_f: DistSpec,
    pub p_a: DistSpec,
    pub mu: DistSpec,
    pub sigma2_w: DistSpec,
    pub rho: DistSpec,
}

impl AnalysisPrior {
    /// Weakly informative preset: wide normals on the means, Beta(1, 1) on
    /// the rates and the ICC, Inv-Gamma(2, 2) on the variances.
    pub fn wi() -> Self {
        AnalysisPrior {
            mu_c: DistSpec::Normal { mean: 0.0, sd: 10.0 },
            sigma2_c: Some(DistSpec::InverseGamma { shape: 2.0, rate: 2.0 }),
            p_f: DistSpec::Beta { alpha: 1.0, beta: 1.0 },
            p_a: DistSpec::Beta { alpha: 1.0, beta: 1.0 },
            mu: DistSpec::Normal { mean: 0.0, sd: 10.0 },
            sigma2_w: DistSpec::InverseGamma { shape: 2.0, rate: 2.0 },
            rho: DistSpec::Beta { alpha: 1.0, beta: 1.0 },
        }
    }

    /// Informative nuisance preset: design-prior components for the
    /// nuisance parameters, weakly informative for the rest.
    pub fn informative_nuisance(design: &HierDesignPrior) -> Result<Self> {
        let mut prior = AnalysisPrior::wi();
        let (alpha0, beta0) = match design.cluster_size {
            DistSpec::NormalInverseGamma { alpha0, beta0, .. } => (alpha0, beta0),
            other => {
                return Err(Error::Validation(format!(
                    "design prior cluster_size must be normal_inverse_gamma, got {other:?}"
                )))
            }
        };
        prior.sigma2_c = Some(DistSpec::InverseGamma { shape: alpha0, rate: beta0 });
        prior.sigma2_w = design.sigma2_w;
        prior.rho = design.rho;
        Ok(prior)
    }

    /// Informative nuisance and adherence preset.
    pub fn informative_nuisance_adherence(design: &HierDesignPrior) -> Result<Self> {
        let mut prior = Self::informative_nuisance(design)?;
        prior.p_a = design.p_a;
        Ok(prior)
    }

    /// The design prior itself, used for self-consistency checks.
    pub fn from_design(design: &HierDesignPrior) -> Self {
        AnalysisPrior {
            mu_c: design.cluster_size,
            sigma2_c: None,
            p_f: design.p_f,
            p_a: design.p_a,
            mu: design.mu,
            sigma2_w: design.sigma2_w,
            rho: design.rho,
        }
    }

    pub fn preset(preset: PriorPreset, design: &HierDesignPrior) -> Result<Self> {
        match preset {
            PriorPreset::Wi => Ok(AnalysisPrior::wi()),
            PriorPreset::In => AnalysisPrior::informative_nuisance(design),
            PriorPreset::Ina => AnalysisPrior::informative_nuisance_adherence(design),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mu_c {
            DistSpec::NormalInverseGamma { .. } => {
                if self.sigma2_c.is_some() {
                    return Err(Error::Validation(
                        "sigma2_c must be omitted when mu_c is a joint normal_inverse_gamma".into(),
                    ));
                }
            }
            DistSpec::Normal { .. } => match self.sigma2_c {
                Some(DistSpec::InverseGamma { .. }) => {}
                other => {
                    return Err(Error::Validation(format!(
                        "sigma2_c must be an inverse_gamma prior, got {other:?}"
                    )))
                }
            },
            other => {
                return Err(Error::Validation(format!(
                    "mu_c prior must be normal or normal_inverse_gamma, got {other:?}"
                )))
            }
        }
        self.mu_c.validate()?;
        if let Some(s) = self.sigma2_c {
            s.validate()?;
        }
        self.p_f.as_beta()?;
        self.p_a.as_beta()?;
        match self.mu {
            DistSpec::Normal { .. } => self.mu.validate()?,
            other => {
                return Err(Error::Validation(format!("mu prior must be normal, got {other:?}")))
            }
        }
        match self.sigma2_w {
            DistSpec::InverseGamma { .. } => self.sigma2_w.validate()?,
            other => {
                return Err(Error::Validation(format!(
                    "sigma2_w prior must be inverse_gamma, got {other:?}"
                )))
            }
        }
        self.rho.as_beta()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn design_prior_marginal_moments() {
        let prior = HierDesignPrior::default();
        let mut rng = RngStream::new(21).rng();
        let n = 1_000_000;
        let mut sum_pf = 0.0;
        let mut sum_pa = 0.0;
        let mut rho_exceed = 0usize;
        for _ in 0..n {
            let p = prior.draw(&mut rng).unwrap();
            sum_pf += p.p_f;
            sum_pa += p.p_a;
            if p.rho > 0.1 {
                rho_exceed += 1;
            }
        }
        assert_abs_diff_eq!(sum_pf / n as f64, 0.7, epsilon = 1e-3);
        assert_abs_diff_eq!(sum_pa / n as f64, 0.9, epsilon = 1e-3);
        assert_abs_diff_eq!(rho_exceed as f64 / n as f64, 0.104, epsilon = 2e-3);
    }

    #[test]
    fn classify_info_examples() {
        let p = HypothesisPartition::default();
        assert_eq!(classify_info(0.5, 12.0, &p), HypothesisLabel::R);
        assert_eq!(classify_info(0.9, 10.0, &p), HypothesisLabel::G);
        // On the amber band between the lines.
        assert_eq!(classify_info(0.8, 8.5, &p), HypothesisLabel::A);
    }

    #[test]
    fn classify_eff_examples() {
        let p = HypothesisPartition::default();
        assert_eq!(classify_eff(0.4, 0.5, &p), HypothesisLabel::R);
        assert_eq!(classify_eff(1.0, 0.2, &p), HypothesisLabel::G);
        assert_eq!(classify_eff(0.9, 0.2, &p), HypothesisLabel::A);
    }

    #[test]
    fn combine_rule() {
        use HypothesisLabel::*;
        assert_eq!(combine_labels(R, G), R);
        assert_eq!(combine_labels(G, G), G);
        assert_eq!(combine_labels(A, G), A);
        assert_eq!(combine_labels(G, A), A);
        assert_eq!(combine_labels(A, R), R);
    }

    #[test]
    fn combine_is_monotone() {
        use HypothesisLabel::*;
        let order = [R, A, G];
        for &a in &order {
            for &b in &order {
                for &a2 in &order {
                    if a2.rank() >= a.rank() {
                        assert!(combine_labels(a2, b).rank() >= combine_labels(a, b).rank());
                        assert!(combine_labels(b, a2).rank() >= combine_labels(b, a).rank());
                    }
                }
            }
        }
    }

    #[test]
    fn prior_hypothesis_proportions() {
        let prior = HierDesignPrior::default();
        let partition = HypothesisPartition::default();
        let mut rng = RngStream::new(22).rng();
        let n = 100_000;
        let mut info = [0usize; 3];
        let mut eff = [0usize; 3];
        let mut comb = [0usize; 3];
        for _ in 0..n {
            let p = prior.draw(&mut rng).unwrap();
            let hi = classify_info(p.p_f, p.mu_c, &partition);
            let he = classify_eff(p.p_a, p.mu, &partition);
            info[hi.rank() as usize] += 1;
            eff[he.rank() as usize] += 1;
            comb[combine_labels(hi, he).rank() as usize] += 1;
        }
        let frac = |c: usize| c as f64 / n as f64;
        assert_abs_diff_eq!(frac(info[0]), 0.354, epsilon = 0.03);
        assert_abs_diff_eq!(frac(info[1]), 0.517, epsilon = 0.03);
        assert_abs_diff_eq!(frac(info[2]), 0.129, epsilon = 0.03);
        assert_abs_diff_eq!(frac(eff[0]), 0.234, epsilon = 0.03);
        assert_abs_diff_eq!(frac(eff[1]), 0.470, epsilon = 0.03);
        assert_abs_diff_eq!(frac(eff[2]), 0.296, epsilon = 0.03);
        assert_abs_diff_eq!(frac(comb[0]), 0.507, epsilon = 0.03);
        assert_abs_diff_eq!(frac(comb[1]), 0.458, epsilon = 0.03);
        assert_abs_diff_eq!(frac(comb[2]), 0.035, epsilon = 0.03);
    }

    fn base_params() -> HierParams {
        HierParams {
            mu_c: 10.0,
            sigma2_c: 2.0,
            p_f: 0.7,
            p_a: 0.9,
            mu: 0.2,
            sigma2_w: 1.0,
            rho: 0.05,
        }
    }

    #[test]
    fn simulate_structure_is_valid() {
        let mut rng = RngStream::new(23).rng();
        let data = simulate_trial(&base_params(), 6, &mut rng).unwrap();
        data.validate().unwrap();
        assert_eq!(data.clusters.len(), 12);
    }

    #[test]
    fn simulate_perfect_followup() {
        let mut rng = RngStream::new(24).rng();
        let mut params = base_params();
        params.p_f = 1.0;
        let data = simulate_trial(&params, 4, &mut rng).unwrap();
        assert_eq!(data.total_followed_up(), data.total_residents());
    }

    #[test]
    fn simulate_null_effect_outcome_variance() {
        // With mu = 0 and rho = 0 outcomes are iid Normal(0, sigma2_w).
        let mut rng = RngStream::new(25).rng();
        let mut params = base_params();
        params.mu = 0.0;
        params.rho = 0.0;
        params.sigma2_w = 1.7;
        params.p_f = 1.0;
        let mut all = Vec::new();
        while all.len() < 100_000 {
            let data = simulate_trial(&params, 10, &mut rng).unwrap();
            for c in &data.clusters {
                all.extend_from_slice(&c.outcomes);
            }
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.7).abs() / 1.7 < 0.02, "sample variance {var}");
    }

    #[test]
    fn simulate_followup_count_binomial_mean() {
        let mut rng = RngStream::new(26).rng();
        let params = base_params();
        let mut follow = 0u64;
        let mut residents = 0u64;
        for _ in 0..2000 {
            let data = simulate_trial(&params, 6, &mut rng).unwrap();
            follow += data.total_followed_up();
            residents += data.total_residents();
        }
        let rate = follow as f64 / residents as f64;
        assert_abs_diff_eq!(rate, 0.7, epsilon = 0.01);
    }

    #[test]
    fn simulate_empirical_icc_tracks_rho() {
        // One-way ANOVA ICC estimate over many clusters.
        for rho in [0.01, 0.5, 0.99] {
            let mut rng = RngStream::new(27).rng();
            let mut params = base_params();
            params.rho = rho;
            params.mu = 0.0;
            params.p_f = 1.0;
            let data = simulate_trial(&params, 1000, &mut rng).unwrap();
            let groups: Vec<&Vec<f64>> =
                data.clusters.iter().map(|c| &c.outcomes).filter(|o| o.len() > 1).collect();
            let grand_n: f64 = groups.iter().map(|g| g.len() as f64).sum();
            let grand_mean: f64 =
                groups.iter().flat_map(|g| g.iter()).sum::<f64>() / grand_n;
            let k = groups.len() as f64;
            let mut ss_between = 0.0;
            let mut ss_within = 0.0;
            for g in &groups {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                ss_between += g.len() as f64 * (m - grand_mean).powi(2);
                ss_within += g.iter().map(|y| (y - m).powi(2)).sum::<f64>();
            }
            let ms_between = ss_between / (k - 1.0);
            let ms_within = ss_within / (grand_n - k);
            let n_bar = grand_n / k;
            let icc = (ms_between - ms_within) / (ms_between + (n_bar - 1.0) * ms_within);
            assert_abs_diff_eq!(icc, rho, epsilon = 0.02);
        }
    }

    #[test]
    fn partition_validation_rejects_crossed_lines() {
        let mut p = HypothesisPartition::default();
        p.info_green.intercept = 19.0;
        assert!(p.validate().is_err());
    }
}
