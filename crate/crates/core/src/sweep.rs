//! Privacy–accuracy sweeps.
//!
//! A sweep runs every selected mechanism at every privacy level for a number
//! of replicates and reports one [`ResultRow`] per run. Synthetic sweeps draw
//! fresh data per replicate and score against the generating parameters;
//! sweeps over a loaded response file score against the non-private spectral
//! estimate of that file.
//!
//! Rows are computed in parallel but always returned in canonical
//! (mechanism, ε, replicate) order. Each row has its own seed derived from the
//! master seed, so any single row can be recomputed in isolation.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::accounting::{MechanismKind, P0Preset, PrivacyBudget};
use crate::error::{Error, Result};
use crate::mechanisms::{run_mechanism, MechanismConfig};
use crate::metrics::{l2_error, linf_error, top_k_accuracy};
use crate::response::{
    generate_synthetic, load_item_params, load_responses, AbilityParams, ItemParams,
    ResponseMatrix, SamplingSpec,
};
use crate::rng::derive_seed;
use crate::spectral::{spectral_estimate, StationaryOptions};

/// Privacy levels used when none are given.
pub const DEFAULT_EPSILONS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
pub const DEFAULT_DELTA: f64 = 1e-4;

const DATA_TAG: u64 = 0xDA7A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMechanism {
    Gaussian,
    Laplace,
    Rr,
    RrShuffle,
    Nonprivate,
}

impl SweepMechanism {
    pub const ALL: [SweepMechanism; 5] = [
        SweepMechanism::Gaussian,
        SweepMechanism::Laplace,
        SweepMechanism::Rr,
        SweepMechanism::RrShuffle,
        SweepMechanism::Nonprivate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepMechanism::Gaussian => "gaussian",
            SweepMechanism::Laplace => "laplace",
            SweepMechanism::Rr => "rr",
            SweepMechanism::RrShuffle => "rr_shuffle",
            SweepMechanism::Nonprivate => "nonprivate",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for SweepMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown mechanism {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    Equispaced { lo: f64, hi: f64 },
    File(PathBuf),
    Values(Vec<f64>),
}

impl Default for BetaSpec {
    fn default() -> Self {
        BetaSpec::Equispaced { lo: -1.0, hi: 1.0 }
    }
}

impl BetaSpec {
    pub fn resolve(&self, m: usize) -> Result<ItemParams> {
        let beta = match self {
            BetaSpec::Equispaced { lo, hi } => ItemParams::equispaced(m, *lo, *hi)?,
            BetaSpec::File(path) => load_item_params(path)?,
            BetaSpec::Values(v) => ItemParams::new(v.clone())?,
        };
        if beta.len() != m {
            return Err(Error::DimensionMismatch {
                what: "item parameters",
                expected: m,
                actual: beta.len(),
            });
        }
        Ok(beta)
    }
}

fn default_m() -> usize {
    20
}
fn default_n() -> usize {
    200
}
fn default_p() -> f64 {
    1.0
}
fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_mechanisms() -> Vec<SweepMechanism> {
    SweepMechanism::ALL.to_vec()
}
fn default_lambda() -> f64 {
    1.0
}
fn default_replicates() -> usize {
    5
}
fn default_top_k() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Observation probability of each cell.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub beta: BetaSpec,
    /// Sweep a fixed response file instead of synthetic data.
    #[serde(default)]
    pub responses: Option<PathBuf>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<SweepMechanism>,
    #[serde(default)]
    pub p0: P0Preset,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub seed: u64,
    /// Fill `runtime_ms`. Off by default so output is reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m: default_m(),
            n: default_n(),
            p: default_p(),
            beta: BetaSpec::default(),
            responses: None,
            epsilons: default_epsilons(),
            delta: default_delta(),
            mechanisms: default_mechanisms(),
            p0: P0Preset::default(),
            lambda: default_lambda(),
            replicates: default_replicates(),
            top_k: default_top_k(),
            seed: 0,
            record_timing: false,
        }
    }
}

impl<'de> Deserialize<'de> for P0Preset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilon grid is empty".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::Config("no mechanisms selected".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        for &e in &self.epsilons {
            PrivacyBudget::new(e, self.delta)?;
        }
        Ok(())
    }

    /// Number of rows [`run_sweep`] will emit.
    pub fn row_count(&self) -> usize {
        self.mechanisms
            .iter()
            .map(|m| match m {
                SweepMechanism::Nonprivate => self.replicates,
                _ => self.replicates * self.epsilons.len(),
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Reducible,
    Disconnected,
    NonConverged,
    Failed,
}

impl RowStatus {
    fn of(err: &Error) -> Self {
        match err {
            Error::ReducibleChain { .. } => RowStatus::Reducible,
            Error::DisconnectedGraph { .. } => RowStatus::Disconnected,
            Error::NonConvergence { .. } => RowStatus::NonConverged,
            _ => RowStatus::Failed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Reducible => "reducible",
            RowStatus::Disconnected => "disconnected",
            RowStatus::NonConverged => "nonconverged",
            RowStatus::Failed => "error",
        }
    }
}

/// One sweep result. `None` fields are written as `na`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mechanism: SweepMechanism,
    pub epsilon_star: Option<f64>,
    pub delta: f64,
    pub p0: f64,
    pub replicate: usize,
    pub seed: u64,
    pub l2_error: Option<f64>,
    pub linf_error: Option<f64>,
    pub topk_accuracy: Option<f64>,
    pub k_queries: usize,
    pub runtime_ms: Option<f64>,
    pub status: RowStatus,
}

pub const RESULT_COLUMNS: [&str; 12] = [
    "mechanism",
    "epsilon_star",
    "delta",
    "p0",
    "replicate",
    "seed",
    "l2_error",
    "linf_error",
    "topk_accuracy",
    "k_queries",
    "runtime_ms",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |x| x.to_string())
}

impl ResultRow {
    fn fields(&self) -> [String; 12] {
        [
            self.mechanism.name().to_string(),
            opt(self.epsilon_star),
            self.delta.to_string(),
            self.p0.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
            opt(self.l2_error),
            opt(self.linf_error),
            opt(self.topk_accuracy),
            self.k_queries.to_string(),
            opt(self.runtime_ms),
            self.status.name().to_string(),
        ]
    }
}

/// Writes the header and all rows.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// A single unit of sweep work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowJob {
    pub mechanism: SweepMechanism,
    pub epsilon_index: Option<usize>,
    pub replicate: usize,
}

impl RowJob {
    pub fn seed(&self, master: u64) -> u64 {
        let eps = self.epsilon_index.map_or(u64::MAX, |i| i as u64);
        derive_seed(master, &[self.mechanism.tag(), eps, self.replicate as u64])
    }
}

/// All jobs in canonical output order.
pub fn sweep_jobs(config: &SweepConfig) -> Vec<RowJob> {
    let mut jobs = Vec::with_capacity(config.row_count());
    for &mechanism in &config.mechanisms {
        let eps: Vec<Option<usize>> = match mechanism {
            SweepMechanism::Nonprivate => vec![None],
            _ => (0..config.epsilons.len()).map(Some).collect(),
        };
        for epsilon_index in eps {
            for replicate in 0..config.replicates {
                jobs.push(RowJob {
                    mechanism,
                    epsilon_index,
                    replicate,
                });
            }
        }
    }
    jobs
}

enum Dataset {
    Synthetic { beta: ItemParams, m: usize, n: usize },
    Loaded { x: ResponseMatrix, reference: ItemParams },
}

impl Dataset {
    fn prepare(config: &SweepConfig) -> Result<Self> {
        match &config.responses {
            Some(path) => {
                let x = load_responses(path)?;
                let reference = spectral_estimate(&x, config.lambda)?;
                Ok(Dataset::Loaded { x, reference })
            }
            None => Ok(Dataset::Synthetic {
                beta: config.beta.resolve(config.m)?,
                m: config.m,
                n: config.n,
            }),
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            Dataset::Synthetic { m, n, .. } => (*m, *n),
            Dataset::Loaded { x, .. } => (x.n_items(), x.n_users()),
        }
    }
}

fn run_job(config: &SweepConfig, data: &Dataset, job: RowJob) -> ResultRow {
    let seed = job.seed(config.seed);
    let (m, n) = data.dims();
    let epsilon_star = job.epsilon_index.map(|i| config.epsilons[i]);
    let p0 = match job.mechanism {
        SweepMechanism::Gaussian | SweepMechanism::Laplace => config.p0.resolve(m, n),
        _ => 1.0,
    };
    let start = Instant::now();

    let outcome = (|| -> Result<(ItemParams, ItemParams, usize)> {
        let (x, truth) = match data {
            Dataset::Synthetic { beta, m, n } => {
                let spec = SamplingSpec {
                    m: *m,
                    n: *n,
                    p: config.p,
                    seed: derive_seed(config.seed, &[DATA_TAG, job.replicate as u64]),
                };
                let x = generate_synthetic(&spec, beta, &AbilityParams::zeros(*n))?;
                (std::borrow::Cow::Owned(x), beta)
            }
            Dataset::Loaded { x, reference } => (std::borrow::Cow::Borrowed(x), reference),
        };
        let (kind, shuffle) = match job.mechanism {
            SweepMechanism::Nonprivate => {
                let est = spectral_estimate(&x, config.lambda)?;
                return Ok((est, truth.clone(), 0));
            }
            SweepMechanism::Gaussian => (MechanismKind::Gaussian, false),
            SweepMechanism::Laplace => (MechanismKind::Laplace, false),
            SweepMechanism::Rr => (MechanismKind::RandomizedResponse, false),
            SweepMechanism::RrShuffle => (MechanismKind::RandomizedResponse, true),
        };
        let budget = PrivacyBudget::new(epsilon_star.expect("private row has epsilon"), config.delta)?;
        let mc = MechanismConfig {
            mechanism: kind,
            budget,
            p0,
            lambda: config.lambda,
            shuffle,
            seed,
            stationary: StationaryOptions::default(),
        };
        let est = run_mechanism(&x, &mc)?;
        Ok((est.beta, truth.clone(), est.k_queries))
    })();

    let runtime_ms = config
        .record_timing
        .then(|| start.elapsed().as_secs_f64() * 1e3);
    let mut row = ResultRow {
        mechanism: job.mechanism,
        epsilon_star,
        delta: config.delta,
        p0,
        replicate: job.replicate,
        seed,
        l2_error: None,
        linf_error: None,
        topk_accuracy: None,
        k_queries: 0,
        runtime_ms,
        status: RowStatus::Ok,
    };
    match outcome {
        Ok((est, truth, k)) => {
            let top_k = config.top_k.clamp(1, m - 1);
            row.l2_error = l2_error(&est, &truth).ok();
            row.linf_error = linf_error(&est, &truth).ok();
            row.topk_accuracy = top_k_accuracy(&est, &truth, top_k).ok();
            row.k_queries = k;
        }
        Err(e) => row.status = RowStatus::of(&e),
    }
    row
}

/// Runs a single job; reproduces the matching row of a full sweep.
pub fn run_sweep_row(config: &SweepConfig, job: RowJob) -> Result<ResultRow> {
    config.validate()?;
    let data = Dataset::prepare(config)?;
    Ok(run_job(config, &data, job))
}

/// Runs the whole sweep. Configuration problems are errors; estimator
/// failures are recorded in each row's status.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let data = Dataset::prepare(config)?;
    Ok(sweep_jobs(config)
        .into_par_iter()
        .map(|job| run_job(config, &data, job))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            m: 6,
            n: 150,
            epsilons: vec![0.5, 2.0, 8.0],
            mechanisms: vec![SweepMechanism::Gaussian, SweepMechanism::Rr],
            replicates: 5,
            top_k: 2,
            seed: 3,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn row_counts() {
        let mut cfg = small();
        assert_eq!(run_sweep(&cfg).unwrap().len(), 30);
        cfg.mechanisms.push(SweepMechanism::Nonprivate);
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 35);
        assert!(rows
            .iter()
            .filter(|r| r.mechanism == SweepMechanism::Nonprivate)
            .all(|r| r.epsilon_star.is_none()));
    }

    #[test]
    fn row_rerun_matches() {
        let cfg = small();
        let rows = run_sweep(&cfg).unwrap();
        let jobs = sweep_jobs(&cfg);
        for idx in [0, 7, 29] {
            assert_eq!(run_sweep_row(&cfg, jobs[idx]).unwrap(), rows[idx]);
        }
    }

    #[test]
    fn csv_header_and_na() {
        let cfg = SweepConfig {
            mechanisms: vec![SweepMechanism::Nonprivate],
            replicates: 1,
            m: 4,
            n: 50,
            ..SweepConfig::default()
        };
        let rows = run_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULT_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "nonprivate");
        assert_eq!(row[1], "na");
        assert_eq!(row[10], "na");
        assert_eq!(row[11], "ok");
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = small();
        cfg.epsilons.clear();
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = small();
        cfg.replicates = 0;
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = small();
        cfg.epsilons = vec![-1.0];
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn estimator_failure_becomes_status() {
        let cfg = SweepConfig {
            m: 5,
            n: 10,
            p: 0.0,
            mechanisms: vec![SweepMechanism::Nonprivate],
            replicates: 3,
            ..SweepConfig::default()
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.status == RowStatus::Reducible));
        assert!(rows
            .iter()
            .filter(|r| r.status != RowStatus::Ok)
            .all(|r| r.l2_error.is_none()));
    }

    #[test]
    fn toml_config() {
        let cfg = SweepConfig::from_toml(
            r#"
            m = 10
            n = 300
            epsilons = [0.1, 1.0]
            mechanisms = ["gaussian", "rr_shuffle", "nonprivate"]
            p0 = "logm"
            replicates = 2
            seed = 9
            beta = { equispaced = { lo = -2.0, hi = 2.0 } }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.m, 10);
        assert_eq!(cfg.p0, P0Preset::LogM);
        assert_eq!(cfg.delta, DEFAULT_DELTA);
        assert_eq!(cfg.beta, BetaSpec::Equispaced { lo: -2.0, hi: 2.0 });
        assert_eq!(cfg.row_count(), 2 * 2 + 2 * 2 + 2);
        assert!(SweepConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn default_grid() {
        let cfg = SweepConfig::default();
        assert_eq!(cfg.epsilons, vec![0.01, 0.1, 1.0, 10.0]);
        assert_eq!(cfg.delta, 1e-4);
    }
}
