//! Simulation engine for Bayesian design and analysis of external pilot
//! trials: loss elicitation, traffic-light decision rules, two pilot models
//! (a conjugate two-binomial design and a hierarchical cluster-randomized
//! design with a built-in Gibbs/Metropolis sampler), and nested Monte Carlo
//! operating characteristics with loss-simplex dominance search.

pub mod config;
pub mod conjugate;
pub mod decision;
pub mod dist;
pub mod elicit;
pub mod error;
pub mod hier;
pub mod oc;
pub mod rng;
pub mod special;

pub use config::RunConfig;
pub use decision::{
    decide, errors, expected_loss, loss, probs_from_labels, Decision, ErrorTriple,
    HypothesisLabel, HypothesisProbs,
};
pub use dist::DistSpec;
pub use elicit::{loss_from_indifference, IndifferencePair, LossParams};
pub use error::{Error, Result};
pub use oc::{
    analysis_invocations, build_matrix, load_matrix, matrix_builds, ocs_for_loss,
    pareto_front, sample_size_sweep, save_matrix, HierScenario, MatrixRow, OCReport,
    ParetoPoint, PosteriorProbMatrix, Scenario,
};
pub use rng::RngStream;
