//! Cross-checks against an independent statistics library (statrs) and
//! hand-rolled numerical oracles.

use approx::assert_abs_diff_eq;
use rand::Rng;
use statrs::distribution::{Beta as StatrsBeta, Continuous, ContinuousCDF, Normal as StatrsNormal};

use pilot_core::conjugate::{self, ConjugateData, ConjugateScenario};
use pilot_core::dist::{draw_beta, draw_normal};
use pilot_core::elicit::LossParams;
use pilot_core::oc::{build_matrix, ocs_for_loss, Scenario};
use pilot_core::rng::RngStream;
use pilot_core::special::{beta_cdf, beta_ln_pdf, ln_gamma};

#[test]
fn beta_cdf_matches_reference_library() {
    let shapes = [0.5, 1.0, 2.0, 4.8, 11.2, 21.0, 41.0, 100.0];
    for &a in &shapes {
        for &b in &shapes {
            let reference = StatrsBeta::new(a, b).unwrap();
            for i in 1..20 {
                let x = i as f64 / 20.0;
                assert_abs_diff_eq!(
                    beta_cdf(x, a, b).unwrap(),
                    reference.cdf(x),
                    epsilon = 1e-10
                );
            }
        }
    }
}

#[test]
fn beta_pdf_matches_reference_library() {
    let reference = StatrsBeta::new(41.0, 21.0).unwrap();
    for i in 1..20 {
        let x = i as f64 / 20.0;
        assert_abs_diff_eq!(beta_ln_pdf(x, 41.0, 21.0), reference.pdf(x).ln(), epsilon = 1e-9);
    }
}

#[test]
fn ln_gamma_matches_reference_library() {
    for x in [0.1, 0.5, 1.0, 2.5, 10.0, 50.5, 171.0, 1000.0] {
        assert_abs_diff_eq!(
            ln_gamma(x),
            statrs::function::gamma::ln_gamma(x),
            epsilon = 1e-10 * ln_gamma(x).abs().max(1.0)
        );
    }
}

/// Adaptive Simpson quadrature of the beta density, an oracle that shares
/// no code with the continued-fraction implementation.
fn simpson_beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    fn f(t: f64, a: f64, b: f64) -> f64 {
        beta_ln_pdf(t, a, b).exp()
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(a_: f64, b_: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, sh: (f64, f64), depth: u32) -> f64 {
        let m = 0.5 * (a_ + b_);
        let (lm, rm) = (0.5 * (a_ + m), 0.5 * (m + b_));
        let (flm, frm) = (f(lm, sh.0, sh.1), f(rm, sh.0, sh.1));
        let left = (m - a_) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b_ - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(a_, m, fa, flm, fm, left, eps / 2.0, sh, depth - 1)
                + recurse(m, b_, fm, frm, fb, right, eps / 2.0, sh, depth - 1)
        }
    }
    let (fa, fb) = (f(1e-12, a, b), f(x, a, b));
    let m = 0.5 * (1e-12 + x);
    let fm = f(m, a, b);
    let whole = (x - 1e-12) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(1e-12, x, fa, fm, fb, whole, 1e-12, (a, b), 40)
}

#[test]
fn beta_cdf_matches_adaptive_quadrature() {
    for (x, a, b) in [(0.8, 41.0, 21.0), (0.7, 22.0, 10.0), (0.3, 2.0, 5.0), (0.5, 11.2, 4.8)] {
        assert_abs_diff_eq!(beta_cdf(x, a, b).unwrap(), simpson_beta_cdf(x, a, b), epsilon = 1e-8);
    }
}

fn ks_statistic(mut draws: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    draws.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let n = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn beta_sampler_passes_ks_against_reference_cdf() {
    let stream = RngStream::new(2024);
    let n = 100_000;
    for (tag, (a, b)) in [(40.0, 10.0), (1.6, 30.4), (1.0, 1.0)].into_iter().enumerate() {
        let mut rng = stream.substream(tag as u64).rng();
        let reference = StatrsBeta::new(a, b).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| draw_beta(&mut rng, a, b)).collect();
        let d = ks_statistic(draws, |x| reference.cdf(x));
        // 1% critical value for the one-sample KS statistic.
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS {d} exceeds {critical} for Beta({a},{b})");
    }
}

#[test]
fn normal_sampler_passes_ks_against_reference_cdf() {
    let mut rng = RngStream::new(2025).rng();
    let n = 100_000;
    let reference = StatrsNormal::new(0.2, 0.1).unwrap();
    let draws: Vec<f64> = (0..n).map(|_| draw_normal(&mut rng, 0.2, 0.1)).collect();
    let d = ks_statistic(draws, |x| reference.cdf(x));
    assert!(d < 1.628 / (n as f64).sqrt());
}

#[test]
fn exact_pg_is_product_of_reference_beta_tails() {
    let scenario = ConjugateScenario::case_study(30);
    let mut rng = RngStream::new(2026).rng();
    for _ in 0..50 {
        let data = ConjugateData {
            x_f: rng.gen_range(0..=scenario.n_followup()),
            x_a: rng.gen_range(0..=scenario.n_adherence()),
        };
        let post_f = StatrsBeta::new(
            1.0 + data.x_f as f64,
            1.0 + (scenario.n_followup() - data.x_f) as f64,
        )
        .unwrap();
        let post_a = StatrsBeta::new(
            1.0 + data.x_a as f64,
            1.0 + (scenario.n_adherence() - data.x_a) as f64,
        )
        .unwrap();
        let want = (1.0 - post_f.cdf(0.8)) * (1.0 - post_a.cdf(0.7));
        assert_abs_diff_eq!(conjugate::exact_pg(&data, &scenario).unwrap(), want, epsilon = 1e-10);
    }
}

#[test]
fn exact_ocs_agree_with_nested_monte_carlo() {
    let n_reps = 40_000;
    for (i, n) in [10u64, 30].into_iter().enumerate() {
        let scenario = ConjugateScenario::case_study(n);
        let matrix = build_matrix(
            &Scenario::Conjugate(scenario),
            n_reps,
            RngStream::new(3000 + i as u64),
        )
        .unwrap();
        for c1 in [0.2, 0.36, 0.5] {
            let exact = conjugate::exact_ocs(&scenario, c1, 128).unwrap();
            let mc = ocs_for_loss(&matrix, &LossParams::new(c1, 1.0 - c1, 0.0).unwrap());
            for (e, m, se) in [(exact.oc1, mc.oc1, mc.se1), (exact.oc2, mc.oc2, mc.se2)] {
                assert!(
                    (e - m).abs() <= 3.0 * se.max(1e-4),
                    "n={n} c1={c1}: exact {e} vs MC {m} (se {se})"
                );
            }
        }
    }
}
