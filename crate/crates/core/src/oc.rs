//! Nested Monte Carlo operating characteristics, loss-parameter simplex
//! search with dominance filtering, and sample-size sweeps.
//!
//! The expensive object is the posterior-probability matrix: one row per
//! outer replicate holding the true hypothesis and the posterior triple.
//! Every loss vector is then evaluated against the same matrix, so the
//! search over loss parameters costs no further analyses and candidate
//! comparisons share identical Monte Carlo noise.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conjugate::{self, ConjugateScenario};
use crate::decision::{decide, errors, loss, HypothesisLabel, HypothesisProbs};
use crate::elicit::LossParams;
use crate::error::{Error, Result};
use crate::hier::{
    self, AnalysisPrior, HierDesignPrior, HypothesisPartition, McmcConfig,
};
use crate::rng::RngStream;

/// Total number of per-replicate posterior analyses performed by this
/// process. Instrumentation for the matrix-reuse contract: evaluating any
/// number of loss vectors must not move this counter.
static ANALYSIS_INVOCATIONS: AtomicU64 = AtomicU64::new(0);

/// Total number of matrix constructions performed by this process.
static MATRIX_BUILDS: AtomicU64 = AtomicU64::new(0);

pub fn analysis_invocations() -> u64 {
    ANALYSIS_INVOCATIONS.load(Ordering::SeqCst)
}

pub fn matrix_builds() -> u64 {
    MATRIX_BUILDS.load(Ordering::SeqCst)
}

/// Cap on the total number of MCMC analyses a sweep may schedule.
pub const MAX_SWEEP_ANALYSES: u64 = 200_000;

/// Hierarchical scenario: design prior, partition, analysis prior, and
/// sampler settings for a given number of clusters per arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierScenario {
    pub clusters_per_arm: u64,
    pub design_prior: HierDesignPrior,
    pub partition: HypothesisPartition,
    pub analysis_prior: AnalysisPrior,
    pub mcmc: McmcConfig,
}

impl HierScenario {
    pub fn validate(&self) -> Result<()> {
        if self.clusters_per_arm == 0 {
            return Err(Error::Validation("clusters_per_arm must be at least 1".into()));
        }
        self.design_prior.validate()?;
        self.partition.validate()?;
        self.analysis_prior.validate()?;
        self.mcmc.validate()
    }
}

/// Either pilot model, as bound from a scenario configuration.
// The size gap between the variants is irrelevant: scenarios are tiny and
// constructed once per run, and boxing would cost `Copy`.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Scenario {
    Conjugate(ConjugateScenario),
    Hierarchical(HierScenario),
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Conjugate(s) => s.validate(),
            Scenario::Hierarchical(s) => s.validate(),
        }
    }

    /// Stable hash of the scenario definition.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Copy of this scenario with the per-arm sample size replaced.
    pub fn with_size(&self, size: u64) -> Scenario {
        match *self {
            Scenario::Conjugate(mut s) => {
                s.n_per_arm = size;
                Scenario::Conjugate(s)
            }
            Scenario::Hierarchical(mut s) => {
                s.clusters_per_arm = size;
                Scenario::Hierarchical(s)
            }
        }
    }

    /// One outer replicate: draw truth, simulate a dataset, analyse it.
    fn replicate(&self, stream: RngStream) -> Result<MatrixRow> {
        ANALYSIS_INVOCATIONS.fetch_add(1, Ordering::SeqCst);
        match self {
            Scenario::Conjugate(s) => {
                let mut rng = stream.rng();
                let params = conjugate::draw_design_prior(s, &mut rng)?;
                let true_label = conjugate::classify(&params, s);
                let data = conjugate::simulate(&params, s, &mut rng);
                let p_g = conjugate::exact_pg(&data, s)?;
                Ok(MatrixRow {
                    substream_id: stream.substream_id(),
                    true_label,
                    probs: HypothesisProbs { p_r: 1.0 - p_g, p_a: 0.0, p_g },
                    converged: true,
                })
            }
            Scenario::Hierarchical(s) => {
                let mut rng = stream.substream(0).rng();
                let params = s.design_prior.draw(&mut rng)?;
                let true_label = hier::classify(&params, &s.partition);
                let data = hier::simulate_trial(&params, s.clusters_per_arm, &mut rng)?;
                let (probs, draws) = hier::posterior_hypothesis_probs(
                    &data,
                    &s.analysis_prior,
                    &s.partition,
                    &s.mcmc,
                    stream.substream(1),
                )?;
                Ok(MatrixRow {
                    substream_id: stream.substream_id(),
                    true_label,
                    probs,
                    converged: draws.converged,
                })
            }
        }
    }
}

/// One outer replicate of the nested simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixRow {
    pub substream_id: u64,
    pub true_label: HypothesisLabel,
    pub probs: HypothesisProbs,
    pub converged: bool,
}

/// The cached product of the nested simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorProbMatrix {
    pub fingerprint: String,
    pub rows: Vec<MatrixRow>,
}

impl PosteriorProbMatrix {
    pub fn n_replicates(&self) -> usize {
        self.rows.len()
    }

    pub fn n_nonconverged(&self) -> usize {
        self.rows.iter().filter(|r| !r.converged).count()
    }

    /// Fraction of rows whose true parameters carry the given label.
    pub fn label_fraction(&self, label: HypothesisLabel) -> f64 {
        self.rows.iter().filter(|r| r.true_label == label).count() as f64
            / self.rows.len() as f64
    }
}

/// Operating characteristics with Monte Carlo standard errors. The exact
/// quadrature oracle reports zero standard errors and zero replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OCReport {
    pub oc1: f64,
    pub oc2: f64,
    pub oc3: f64,
    pub se1: f64,
    pub se2: f64,
    pub se3: f64,
    pub expected_loss: f64,
    pub n_replicates: u64,
    pub n_nonconverged: u64,
}

/// A loss vector together with the operating characteristics it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoPoint {
    pub c: LossParams,
    pub report: OCReport,
}

/// Build the posterior-probability matrix: `n` independent replicates, each
/// on its own substream so the result is invariant to thread count.
pub fn build_matrix(scenario: &Scenario, n: usize, stream: RngStream) -> Result<PosteriorProbMatrix> {
    scenario.validate()?;
    if n == 0 {
        return Err(Error::Validation("matrix must have at least one replicate".into()));
    }
    MATRIX_BUILDS.fetch_add(1, Ordering::SeqCst);
    let rows: Result<Vec<MatrixRow>> = (0..n as u64)
        .into_par_iter()
        .map(|k| scenario.replicate(stream.substream(k)))
        .collect();
    Ok(PosteriorProbMatrix { fingerprint: scenario.fingerprint(), rows: rows? })
}

/// Operating characteristics of the expected-loss rule under a fixed loss
/// vector, over a prebuilt matrix.
pub fn ocs_for_loss(matrix: &PosteriorProbMatrix, c: &LossParams) -> OCReport {
    let n = matrix.rows.len() as f64;
    let mut counts = [0u64; 3];
    let mut loss_sum = 0.0;
    for row in &matrix.rows {
        let d = decide(&row.probs, c);
        let e = errors(d, row.true_label);
        counts[0] += e.e1 as u64;
        counts[1] += e.e2 as u64;
        counts[2] += e.e3 as u64;
        loss_sum += loss(d, row.true_label, c);
    }
    let p = |k: u64| k as f64 / n;
    let se = |k: u64| (p(k) * (1.0 - p(k)) / n).sqrt();
    OCReport {
        oc1: p(counts[0]),
        oc2: p(counts[1]),
        oc3: p(counts[2]),
        se1: se(counts[0]),
        se2: se(counts[1]),
        se3: se(counts[2]),
        expected_loss: loss_sum / n,
        n_replicates: matrix.rows.len() as u64,
        n_nonconverged: matrix.n_nonconverged() as u64,
    }
}

fn dominates(a: &OCReport, b: &OCReport) -> bool {
    let le = a.oc1 <= b.oc1 && a.oc2 <= b.oc2 && a.oc3 <= b.oc3;
    let lt = a.oc1 < b.oc1 || a.oc2 < b.oc2 || a.oc3 < b.oc3;
    le && lt
}

/// Uniform draw from the loss simplex (symmetric Dirichlet).
pub fn sample_loss_simplex<R: rand::Rng>(rng: &mut R) -> LossParams {
    let e1 = -rng.gen::<f64>().ln();
    let e2 = -rng.gen::<f64>().ln();
    let e3 = -rng.gen::<f64>().ln();
    let s = e1 + e2 + e3;
    LossParams::new(e1 / s, e2 / s, e3 / s).expect("simplex draw is valid")
}

/// Evaluate uniformly sampled loss vectors against the matrix and discard
/// the dominated ones. Survivors are sorted by OC1 (then OC2, OC3).
pub fn pareto_front(
    matrix: &PosteriorProbMatrix,
    num_candidates: usize,
    stream: RngStream,
) -> Result<Vec<ParetoPoint>> {
    if num_candidates < 2 {
        return Err(Error::Validation("need at least two candidate loss vectors".into()));
    }
    let mut rng = stream.rng();
    let candidates: Vec<LossParams> =
        (0..num_candidates).map(|_| sample_loss_simplex(&mut rng)).collect();
    let points: Vec<ParetoPoint> = candidates
        .into_par_iter()
        .map(|c| ParetoPoint { report: ocs_for_loss(matrix, &c), c })
        .collect();
    let mut front: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(&q.report, &p.report)))
        .copied()
        .collect();
    front.sort_by(|a, b| {
        (a.report.oc1, a.report.oc2, a.report.oc3)
            .partial_cmp(&(b.report.oc1, b.report.oc2, b.report.oc3))
            .expect("finite operating characteristics")
    });
    Ok(front)
}

/// Dominance filter over precomputed points; exposed for order-invariance
/// checks and for callers with their own candidate sets.
pub fn dominance_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(&q.report, &p.report)))
        .copied()
        .collect()
}

/// Per-size operating characteristics under a fixed loss vector. Each size
/// gets an independent substream and a fresh matrix.
pub fn sample_size_sweep(
    template: &Scenario,
    sizes: &[u64],
    c: &LossParams,
    n: usize,
    stream: RngStream,
) -> Result<Vec<(u64, OCReport)>> {
    if sizes.is_empty() {
        return Err(Error::Validation("size list must be non-empty".into()));
    }
    if matches!(template, Scenario::Hierarchical(_)) {
        let total = sizes.len() as u64 * n as u64;
        if total > MAX_SWEEP_ANALYSES {
            return Err(Error::Capacity(format!(
                "sweep would run {total} MCMC analyses, above the {MAX_SWEEP_ANALYSES} cap"
            )));
        }
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let matrix = build_matrix(&template.with_size(size), n, stream.substream(i as u64))?;
            Ok((size, ocs_for_loss(&matrix, c)))
        })
        .collect()
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Header line carried by persisted matrices.
#[derive(Debug, Serialize, Deserialize)]
struct MatrixHeader {
    fingerprint: String,
    n_replicates: usize,
    engine_version: String,
}

const MATRIX_COLUMNS: &str = "replicate,true_label,p_r,p_a,p_g,converged";

/// Persist the matrix as CSV with a JSON header line.
pub fn write_matrix<W: Write>(matrix: &PosteriorProbMatrix, mut out: W) -> Result<()> {
    let header = MatrixHeader {
        fingerprint: matrix.fingerprint.clone(),
        n_replicates: matrix.rows.len(),
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    writeln!(out, "#{}", serde_json::to_string(&header)?)?;
    writeln!(out, "{MATRIX_COLUMNS}")?;
    for row in &matrix.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.substream_id,
            row.true_label,
            row.probs.p_r,
            row.probs.p_a,
            row.probs.p_g,
            row.converged
        )?;
    }
    Ok(())
}

pub fn save_matrix(matrix: &PosteriorProbMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix(matrix, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Load a persisted matrix, validating layout and probability sums.
pub fn load_matrix(path: &Path) -> Result<PosteriorProbMatrix> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("matrix file is empty".into()))??;
    let header: MatrixHeader = serde_json::from_str(
        header_line
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("matrix header must start with '#'".into()))?,
    )?;
    let columns = lines
        .next()
        .ok_or_else(|| Error::Format("matrix file has no column header".into()))??;
    if columns != MATRIX_COLUMNS {
        return Err(Error::Format(format!(
            "unexpected matrix columns {columns:?}, want {MATRIX_COLUMNS:?}"
        )));
    }
    let mut rows = Vec::with_capacity(header.n_replicates);
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!("bad matrix row {line:?}")));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|e| Error::Format(format!("bad float {s:?}: {e}")))
        };
        let probs = HypothesisProbs::new(parse_f(fields[2])?, parse_f(fields[3])?, parse_f(fields[4])?)?;
        rows.push(MatrixRow {
            substream_id: fields[0]
                .parse()
                .map_err(|e| Error::Format(format!("bad replicate id {:?}: {e}", fields[0])))?,
            true_label: fields[1].parse()?,
            probs,
            converged: fields[5]
                .parse()
                .map_err(|e| Error::Format(format!("bad converged flag {:?}: {e}", fields[5])))?,
        });
    }
    if rows.len() != header.n_replicates {
        return Err(Error::Format(format!(
            "header promises {} rows, found {}",
            header.n_replicates,
            rows.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Format("matrix has no rows".into()));
    }
    Ok(PosteriorProbMatrix { fingerprint: header.fingerprint, rows })
}
