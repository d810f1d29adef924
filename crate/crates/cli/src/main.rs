//! Batch front-end for the pilot trial design engine.
//!
//! Commands read a JSON scenario configuration and/or a previously built
//! posterior-probability matrix, and emit CSV files shaped for direct
//! plotting. Every output file is paired with a `<file>.manifest.json`
//! recording the configuration hash, engine version, and seed, so results
//! can be traced back to their inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use pilot_core::elicit::{loss_from_indifference, IndifferencePair, LossParams};
use pilot_core::oc::{
    build_matrix, load_matrix, ocs_for_loss, pareto_front, sample_size_sweep, save_matrix,
    OCReport, PosteriorProbMatrix,
};
use pilot_core::rng::RngStream;
use pilot_core::{Error, Result, RunConfig};

#[derive(Parser)]
#[command(name = "pilot", version, about = "Design and analysis engine for external pilot trials")]
struct Cli {
    /// JSON scenario configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Random seed; overrides the seed in the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; overrides the configuration file. Defaults to the
    /// available parallelism. Results do not depend on this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output file; commands print to stdout when omitted (matrix requires it).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert two indifference probabilities into loss parameters.
    Elicit {
        /// Probability of feasibility at which g and a are equally preferred.
        #[arg(long)]
        p1: f64,
        /// Probability of feasibility at which g and r are equally preferred.
        #[arg(long)]
        p2: f64,
    },
    /// Build and persist the posterior-probability matrix.
    Matrix {
        /// Fail (exit 4) when more than this fraction of replicates misses
        /// the convergence diagnostic.
        #[arg(long, default_value_t = 1.0)]
        max_nonconverged: f64,
    },
    /// Operating characteristics of one loss vector on a saved matrix.
    Ocs {
        /// Saved matrix file from the `matrix` command.
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        loss: LossArgs,
    },
    /// Sample the loss simplex and report the non-dominated vectors.
    Pareto {
        /// Saved matrix file from the `matrix` command.
        #[arg(long)]
        matrix: PathBuf,
        /// Number of candidate loss vectors to sample.
        #[arg(long, default_value_t = 254)]
        candidates: usize,
    },
    /// Operating characteristics across a list of per-arm sample sizes.
    Sweep {
        /// Comma-separated per-arm sample sizes, e.g. 10,20,30.
        #[arg(long)]
        sizes: String,
        #[command(flatten)]
        loss: LossArgs,
        /// Fail (exit 4) when more than this fraction of replicates misses
        /// the convergence diagnostic at any size.
        #[arg(long, default_value_t = 1.0)]
        max_nonconverged: f64,
    },
}

/// A loss vector, given directly, as a binary-edge weight, or elicited.
#[derive(clap::Args)]
struct LossArgs {
    /// Full loss vector as c1,c2,c3 (normalized to sum to 1).
    #[arg(long, conflicts_with_all = ["c1", "p1", "p2"])]
    c: Option<String>,
    /// Binary-edge shorthand: c = (c1, 1-c1, 0).
    #[arg(long, conflicts_with_all = ["p1", "p2"])]
    c1: Option<f64>,
    /// Elicited indifference probabilities (both required).
    #[arg(long, requires = "p2")]
    p1: Option<f64>,
    #[arg(long, requires = "p1")]
    p2: Option<f64>,
}

impl LossArgs {
    fn resolve(&self) -> Result<LossParams> {
        if let Some(spec) = &self.c {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Validation(format!("bad loss component {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if parts.len() != 3 {
                return Err(Error::Validation(format!(
                    "--c wants three comma-separated values, got {}",
                    parts.len()
                )));
            }
            return LossParams::new(parts[0], parts[1], parts[2]);
        }
        if let Some(c1) = self.c1 {
            if !(0.0..=1.0).contains(&c1) {
                return Err(Error::Validation(format!("--c1 must lie in [0, 1], got {c1}")));
            }
            return LossParams::new(c1, 1.0 - c1, 0.0);
        }
        if let (Some(p1), Some(p2)) = (self.p1, self.p2) {
            return loss_from_indifference(IndifferencePair::new(p1, p2)?);
        }
        Err(Error::Validation(
            "a loss vector is required: pass --c, --c1, or --p1/--p2".into(),
        ))
    }
}

/// Provenance sidecar written next to every output file.
#[derive(Serialize)]
struct RunManifest {
    config_hash: Option<String>,
    engine_version: String,
    seed: Option<u64>,
    started: String,
    finished: String,
    outputs: Vec<PathBuf>,
}

struct ManifestBuilder {
    config_hash: Option<String>,
    seed: Option<u64>,
    started: chrono::DateTime<chrono::Utc>,
}

impl ManifestBuilder {
    fn new(config_hash: Option<String>, seed: Option<u64>) -> Self {
        ManifestBuilder { config_hash, seed, started: chrono::Utc::now() }
    }

    /// Write `<out>.manifest.json` next to the output file, atomically.
    fn write(&self, out: &Path) -> Result<()> {
        let manifest = RunManifest {
            config_hash: self.config_hash.clone(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            outputs: vec![out.to_path_buf()],
        };
        let mut path = out.as_os_str().to_owned();
        path.push(".manifest.json");
        write_atomic(Path::new(&path), serde_json::to_string_pretty(&manifest)?.as_bytes())
    }
}

/// Write via a temporary file in the same directory, then rename, so
/// readers never observe a half-written output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str, manifest: &ManifestBuilder) -> Result<()> {
    match out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            manifest.write(path)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

const OC_COLUMNS: &str = "oc1,oc2,oc3,se1,se2,se3,expected_loss,n_replicates,n_nonconverged";

fn oc_row(r: &OCReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.oc1, r.oc2, r.oc3, r.se1, r.se2, r.se3, r.expected_loss, r.n_replicates, r.n_nonconverged
    )
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let path = path.ok_or_else(|| Error::Validation("this command requires --config".into()))?;
    RunConfig::from_path(path)
}

fn check_convergence(report_fraction: f64, max: f64) -> Result<()> {
    if report_fraction > max {
        return Err(Error::NonConvergence(format!(
            "{:.1}% of replicates failed the convergence diagnostic (limit {:.1}%)",
            100.0 * report_fraction,
            100.0 * max
        )));
    }
    Ok(())
}

fn matrix_nonconverged_fraction(matrix: &PosteriorProbMatrix) -> f64 {
    matrix.n_nonconverged() as f64 / matrix.n_replicates() as f64
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Elicit { p1, p2 } = cli.command {
        let c = loss_from_indifference(IndifferencePair::new(p1, p2)?)?;
        let text = format!("c1,c2,c3\n{},{},{}\n", c.c1, c.c2, c.c3);
        return emit(cli.out.as_deref(), &text, &ManifestBuilder::new(None, None));
    }

    // Configuration, seed, and thread pool for the simulation commands.
    let config = match &cli.command {
        Command::Matrix { .. } | Command::Sweep { .. } => Some(load_config(cli.config.as_deref())?),
        _ => None,
    };
    let seed = cli.seed.or(config.as_ref().and_then(|c| c.seed)).unwrap_or(0);
    let threads = cli.threads.or(config.as_ref().and_then(|c| c.threads));
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    let stream = RngStream::new(seed);

    match &cli.command {
        Command::Elicit { .. } => unreachable!("handled above"),
        Command::Matrix { max_nonconverged } => {
            let config = config.expect("loaded above");
            let out = cli
                .out
                .as_deref()
                .ok_or_else(|| Error::Validation("matrix requires --out".into()))?;
            let manifest = ManifestBuilder::new(Some(config.fingerprint()), Some(seed));
            let matrix = build_matrix(&config.scenario, config.replicates as usize, stream)?;
            check_convergence(matrix_nonconverged_fraction(&matrix), *max_nonconverged)?;
            save_matrix(&matrix, out)?;
            manifest.write(out)?;
        }
        Command::Ocs { matrix, loss } => {
            let c = loss.resolve()?;
            let manifest = ManifestBuilder::new(None, None);
            let matrix = load_matrix(matrix)?;
            let report = ocs_for_loss(&matrix, &c);
            let text = format!("{OC_COLUMNS}\n{}\n", oc_row(&report));
            emit(cli.out.as_deref(), &text, &manifest)?;
        }
        Command::Pareto { matrix, candidates } => {
            let manifest = ManifestBuilder::new(None, Some(seed));
            let matrix = load_matrix(matrix)?;
            let front = pareto_front(&matrix, *candidates, stream)?;
            let mut text = String::from("c1,c2,c3,oc1,oc2,oc3,expected_loss,se1,se2,se3\n");
            for p in &front {
                let r = &p.report;
                writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},{},{}",
                    p.c.c1, p.c.c2, p.c.c3, r.oc1, r.oc2, r.oc3, r.expected_loss, r.se1, r.se2, r.se3
                )
                .expect("string write");
            }
            emit(cli.out.as_deref(), &text, &manifest)?;
        }
        Command::Sweep { sizes, loss, max_nonconverged } => {
            let config = config.expect("loaded above");
            let c = loss.resolve()?;
            let sizes: Vec<u64> = sizes
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::Validation(format!("bad size {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let manifest = ManifestBuilder::new(Some(config.fingerprint()), Some(seed));
            let table = sample_size_sweep(
                &config.scenario,
                &sizes,
                &c,
                config.replicates as usize,
                stream,
            )?;
            for (_, report) in &table {
                check_convergence(
                    report.n_nonconverged as f64 / report.n_replicates as f64,
                    *max_nonconverged,
                )?;
            }
            let mut text = format!("size,{OC_COLUMNS}\n");
            for (size, report) in &table {
                writeln!(text, "{size},{}", oc_row(report)).expect("string write");
            }
            emit(cli.out.as_deref(), &text, &manifest)?;
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Capacity(_) => 3,
        Error::NonConvergence(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
