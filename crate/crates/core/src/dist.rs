//! Distribution specifications and variate generation.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma, Normal as NormalDist};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parametric distribution, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Beta { alpha: f64, beta: f64 },
    Binomial { n: u64, p: f64 },
    Normal { mean: f64, sd: f64 },
    InverseGamma { shape: f64, rate: f64 },
    NormalInverseGamma { mu0: f64, nu0: f64, alpha0: f64, beta0: f64 },
}

/// A single variate. `NormalInverseGamma` yields the `(variance, mean)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Draw {
    Real(f64),
    Int(u64),
    Pair(f64, f64),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistSpec::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
            DistSpec::Binomial { n: _, p } => {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
                }
                Ok(())
            }
            DistSpec::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::Domain(format!("mean must be finite, got {mean}")));
                }
                positive("sd", sd)
            }
            DistSpec::InverseGamma { shape, rate } => {
                positive("shape", shape)?;
                positive("rate", rate)
            }
            DistSpec::NormalInverseGamma { mu0, nu0, alpha0, beta0 } => {
                if !mu0.is_finite() {
                    return Err(Error::Domain(format!("mu0 must be finite, got {mu0}")));
                }
                positive("nu0", nu0)?;
                positive("alpha0", alpha0)?;
                positive("beta0", beta0)
            }
        }
    }

    /// Draw one variate.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<Draw> {
        self.validate()?;
        Ok(match *self {
            DistSpec::Beta { alpha, beta } => Draw::Real(draw_beta(rng, alpha, beta)),
            DistSpec::Binomial { n, p } => Draw::Int(draw_binomial(rng, n, p)),
            DistSpec::Normal { mean, sd } => Draw::Real(draw_normal(rng, mean, sd)),
            DistSpec::InverseGamma { shape, rate } => Draw::Real(draw_inv_gamma(rng, shape, rate)),
            DistSpec::NormalInverseGamma { mu0, nu0, alpha0, beta0 } => {
                let (var, mean) = draw_nig(rng, mu0, nu0, alpha0, beta0);
                Draw::Pair(var, mean)
            }
        })
    }

    /// Beta shape parameters, if this is a beta spec.
    pub fn as_beta(&self) -> Result<(f64, f64)> {
        match *self {
            DistSpec::Beta { alpha, beta } => Ok((alpha, beta)),
            other => Err(Error::Validation(format!("expected a beta distribution, got {other:?}"))),
        }
    }
}

pub fn draw_beta<R: Rng>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    BetaDist::new(alpha, beta).expect("validated beta shapes").sample(rng)
}

/// Binomial variate. Inversion for small n; rand_distr's BTPE rejection
/// sampler otherwise.
pub fn draw_binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    if n <= 64 {
        let mut u: f64 = rng.gen();
        let ratio = p / (1.0 - p);
        let mut pmf = (1.0 - p).powi(n as i32);
        let mut k = 0u64;
        loop {
            if u <= pmf || k == n {
                return k;
            }
            u -= pmf;
            pmf *= ratio * (n - k) as f64 / (k + 1) as f64;
            k += 1;
        }
    }
    rand_distr::Binomial::new(n, p).expect("validated binomial parameters").sample(rng)
}

pub fn draw_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    NormalDist::new(mean, sd).expect("validated normal parameters").sample(rng)
}

/// Inv-Gamma(shape, rate): the reciprocal of a Gamma(shape, rate) variate.
pub fn draw_inv_gamma<R: Rng>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("validated gamma parameters").sample(rng);
    1.0 / g
}

/// Normal-inverse-gamma draw: sigma2 ~ Inv-Gamma(alpha0, beta0), then
/// mean ~ Normal(mu0, sigma2 / nu0). Returns (sigma2, mean).
pub fn draw_nig<R: Rng>(rng: &mut R, mu0: f64, nu0: f64, alpha0: f64, beta0: f64) -> (f64, f64) {
    let sigma2 = draw_inv_gamma(rng, alpha0, beta0);
    let mean = draw_normal(rng, mu0, (sigma2 / nu0).sqrt());
    (sigma2, mean)
}
