//! Experiment grids: build a problem, solve its optimum, run every
//! (algorithm, multiplier, seed) combination, average over seeds and write
//! CSVs plus a manifest that reconstructs the whole experiment.
//!
//! Config schema (JSON, unknown fields rejected):
//!
//! ```json
//! {
//!   "problem": {"kind": "libsvm", "path": "phishing", "alpha": 5e-4},
//!   "clients": 12, "cohort": 3,
//!   "algorithms": ["rrcli", "nastya", "fedavg"],
//!   "regime": "thm1",
//!   "multipliers": [1, 2],
//!   "decay": false,
//!   "local_steps": 10,
//!   "batch_fraction": 0.1,
//!   "epochs": 100,
//!   "seeds": [0, 1, 2, 3, 4],
//!   "out_dir": "out"
//! }
//! ```
//!
//! `problem.kind` is one of `libsvm` (`path`, `alpha`), `phishing_surrogate`
//! (`seed`, `alpha`) or `quadratic` (`per_client`, `dim`, `spectrum`,
//! `heterogeneity`, `seed`). Optional fields: `partition_seed`, `shuffle`,
//! `steps` (explicit base steps), `nastya_gamma`, `optimum_tol`,
//! `optimum_cache`, `workers`, `record_wall_time`, `parallel_cohorts`.
//!
//! A run that diverges is excluded from the seed mean and counted in the
//! manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{self, SparseDataset};
use crate::error::{Error, Result};
use crate::optimizer::{self, AlgoConfig, Algorithm, RunTrace, StepSizes};
use crate::problem::{self, FederatedProblem, Heterogeneity, Optimum, Spectrum};
use crate::rng;
use crate::shuffling::ShuffleMode;
use crate::theory::{self, Regime, RegimeParams};
use crate::variance_lab;

/// Environment override for the run-level worker count.
pub const WORKERS_ENV: &str = "RRCLI_WORKERS";

/// FedAvg local steps when the config does not set `local_steps`.
pub const FEDAVG_DEFAULT_LOCAL_STEPS: usize = 10;

pub const RUNS_HEADER: &str = "algorithm,multiplier,seed,epoch,dist_sq,func_gap,grad_evals,wall_ms";
pub const MEAN_HEADER: &str = "algorithm,multiplier,aggregate,epoch,dist_sq_mean,func_gap_mean,n_runs";

fn default_alpha() -> f64 {
    5e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    PhishingSurrogate {
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Quadratic {
        per_client: usize,
        dim: usize,
        spectrum: Spectrum,
        heterogeneity: Heterogeneity,
        #[serde(default)]
        seed: u64,
    },
}

fn default_multipliers() -> Vec<f64> {
    vec![1.0]
}

fn default_fraction() -> f64 {
    0.1
}

fn default_tol() -> f64 {
    1e-12
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub clients: usize,
    pub cohort: usize,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub regime: Option<Regime>,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
    #[serde(default)]
    pub decay: bool,
    #[serde(default)]
    pub local_steps: Option<usize>,
    #[serde(default = "default_fraction")]
    pub batch_fraction: f64,
    pub epochs: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub partition_seed: u64,
    #[serde(default)]
    pub shuffle: ShuffleMode,
    #[serde(default)]
    pub steps: Option<StepSizes<f64>>,
    #[serde(default)]
    pub nastya_gamma: Option<f64>,
    #[serde(default = "default_tol")]
    pub optimum_tol: f64,
    #[serde(default)]
    pub optimum_cache: Option<PathBuf>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub parallel_cohorts: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return bad("algorithms must be distinct".into());
        }
        if self.multipliers.is_empty() || self.multipliers.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return bad("multipliers must be a nonempty list of positive numbers".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.cohort == 0 || self.cohort > self.clients || !self.clients.is_multiple_of(self.cohort) {
            return bad(format!("cohort {} must divide clients {}", self.cohort, self.clients));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return bad(format!("batch_fraction {} not in (0, 1]", self.batch_fraction));
        }
        if self.local_steps == Some(0) {
            return bad("local_steps must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if let Some(g) = self.nastya_gamma {
            if !(g.is_finite() && g > 0.0) {
                return bad("nastya_gamma must be positive".into());
            }
        }
        if let Some(s) = &self.steps {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    fn local_steps_for(&self, algo: Algorithm, n: usize) -> usize {
        match (algo, self.local_steps) {
            (_, Some(s)) => s,
            (Algorithm::FedAvg, None) => FEDAVG_DEFAULT_LOCAL_STEPS.min(n.max(1)),
            (_, None) => n,
        }
    }
}

/// Reads a config, or the config embedded in a manifest (any JSON object
/// with a `config` key).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = match value.get("config") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    Ok(cfg)
}

/// CLI flags that replace config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub multipliers: Option<Vec<f64>>,
    pub decay: Option<bool>,
    pub epochs: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.algorithms {
            cfg.algorithms = v.clone();
        }
        if let Some(v) = &self.multipliers {
            cfg.multipliers = v.clone();
        }
        if let Some(v) = self.decay {
            cfg.decay = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
    }
}

/// A built problem plus the hash of whatever it was built from.
pub struct BuiltProblem {
    pub problem: FederatedProblem<f64>,
    pub dataset_hash: String,
    cache_key: Option<String>,
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn logistic_from(ds: &SparseDataset, bytes: &[u8], clients: usize, seed: u64, alpha: f64) -> Result<BuiltProblem> {
    let part = dataset::partition(ds, clients, seed)?;
    Ok(BuiltProblem {
        problem: problem::logistic_problem(&part, ds, alpha)?,
        dataset_hash: sha_hex(bytes),
        cache_key: Some(problem::optimum_cache_key(bytes, clients, seed, alpha)),
    })
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    match &cfg.problem {
        ProblemSpec::Libsvm { path, alpha } => {
            let bytes = dataset::read_bytes(path)?;
            let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse {
                line: 0,
                msg: format!("not UTF-8: {e}"),
            })?;
            let ds = dataset::parse_libsvm(text)?;
            logistic_from(&ds, &bytes, cfg.clients, cfg.partition_seed, *alpha)
        }
        ProblemSpec::PhishingSurrogate { seed, alpha } => {
            let ds = dataset::phishing_surrogate(*seed);
            let bytes = ds.to_libsvm().into_bytes();
            logistic_from(&ds, &bytes, cfg.clients, cfg.partition_seed, *alpha)
        }
        ProblemSpec::Quadratic {
            per_client,
            dim,
            spectrum,
            heterogeneity,
            seed,
        } => {
            let problem = problem::quadratic_problem(cfg.clients, *per_client, *dim, *spectrum, *heterogeneity, *seed)?;
            let canonical = serde_json::to_vec(&(&cfg.problem, cfg.clients))?;
            Ok(BuiltProblem {
                problem,
                dataset_hash: sha_hex(&canonical),
                cache_key: None,
            })
        }
    }
}

/// Solves the optimum, reusing `<cache>/<key>.opt` when present.
pub fn resolve_optimum(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<Optimum<f64>> {
    let p = &built.problem;
    let cached = match (&cfg.optimum_cache, &built.cache_key) {
        (Some(dir), Some(key)) => Some(dir.join(format!("{key}.opt"))),
        _ => None,
    };
    if let Some(path) = &cached {
        if path.exists() {
            let (x, _) = problem::read_optimum(path)?;
            if x.len() == p.dim() {
                let g = p.full_gradient(&x)?;
                let grad_norm = crate::linalg::norm_sq(&g).sqrt();
                if grad_norm <= cfg.optimum_tol {
                    let f_star = p.objective_value(&x)?;
                    return Ok(Optimum {
                        x_star: x,
                        f_star,
                        grad_norm,
                    });
                }
            }
        }
    }
    let opt = problem::solve_optimum(p, cfg.optimum_tol)?;
    if let Some(path) = &cached {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        problem::write_optimum(path, &opt.x_star, opt.grad_norm)?;
    }
    Ok(opt)
}

/// Base (multiplier 1) steps of `algo`.
pub fn base_steps(
    cfg: &ExperimentConfig,
    algo: Algorithm,
    p: &FederatedProblem<f64>,
    params: &RegimeParams<f64>,
) -> Result<StepSizes<f64>> {
    let s = cfg.local_steps_for(algo, p.per_client());
    let r = (cfg.clients / cfg.cohort) as f64;
    if let Some(steps) = cfg.steps {
        return Ok(steps.with_decay(cfg.decay));
    }
    let mut rp = *params;
    rp.per_client = s;
    let steps = match algo {
        Algorithm::RrCli | Algorithm::RrCliWr => theory::theoretical_steps(&rp)?,
        Algorithm::Nastya => {
            rp.regime = Regime::Thm2;
            let gamma = match cfg.nastya_gamma {
                Some(g) => g,
                None => theory::theoretical_steps(&rp)?.gamma,
            };
            let eta = gamma * s as f64;
            StepSizes::new(gamma, eta, eta * r)?
        }
        Algorithm::FedAvg => {
            let gamma = theory::fedavg_step(p.smoothness() - p.alpha(), p.alpha());
            let eta = gamma * s as f64;
            StepSizes::new(gamma, eta, eta * r)?
        }
    };
    Ok(steps.with_decay(cfg.decay))
}

/// Scales all three steps by `multiplier`, re-deriving `eta = gamma S` and
/// `theta = eta R` exactly when the base steps satisfy them.
pub fn apply_multiplier(base: &StepSizes<f64>, multiplier: f64, local_steps: usize, rounds: usize) -> StepSizes<f64> {
    let s = local_steps as f64;
    let r = rounds as f64;
    let mut out = base.scaled(multiplier);
    if base.eta == base.gamma * s {
        out.eta = out.gamma * s;
    }
    if base.theta == base.eta * r {
        out.theta = out.eta * r;
    }
    out
}

/// Per-run seed; independent of which other algorithms or multipliers are
/// in the grid.
pub fn run_seed(master: u64, algo: Algorithm, multiplier: f64, replicate: usize) -> u64 {
    rng::derive_seed(
        master,
        &format!("run/{}", algo.name()),
        &[multiplier.to_bits(), replicate as u64],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub multiplier: f64,
    pub replicate: usize,
    pub seed: u64,
    pub run_seed: u64,
    pub steps: StepSizes<f64>,
    pub local_steps: usize,
    pub diverged: bool,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub averaging_residual: Option<f64>,
    #[serde(default)]
    pub global_collapse: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRow {
    pub algorithm: Algorithm,
    pub multiplier: f64,
    pub final_dist_sq_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub dataset_hash: String,
    pub optimum_hash: String,
    pub optimum_grad_norm: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub condition_number: f64,
    pub sigma_star_sq: f64,
    pub sigma_tilde_star_sq: f64,
    pub regime: Regime,
    pub runs: Vec<RunRecord>,
    pub diverged: BTreeMap<String, usize>,
    pub all_diverged: Vec<Algorithm>,
    pub best: Vec<BestRow>,
    pub exclusion_rule: String,
}

pub struct ExperimentOutput {
    pub manifest: RunManifest,
    pub files: Vec<PathBuf>,
    /// Traces in manifest run order; `None` for diverged runs.
    pub traces: Vec<Option<RunTrace<f64>>>,
}

/// Final mean distance of one multiplier; `None` if every seed diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierResult {
    pub multiplier: f64,
    pub final_mean: Option<f64>,
}

/// Smallest final mean distance wins; values within a relative `1e-15` tie
/// and the smaller multiplier is kept. Multipliers whose runs all diverged
/// are skipped.
pub fn select_best_multiplier(results: &[MultiplierResult]) -> Result<MultiplierResult> {
    let mut sorted: Vec<&MultiplierResult> = results.iter().filter(|r| r.final_mean.is_some()).collect();
    sorted.sort_by(|a, b| a.multiplier.total_cmp(&b.multiplier));
    let mut best: Option<&MultiplierResult> = None;
    for cand in sorted {
        let v = cand.final_mean.unwrap();
        match best {
            None => best = Some(cand),
            Some(b) => {
                let bv = b.final_mean.unwrap();
                let tol = 1e-15 * v.abs().max(bv.abs());
                if v < bv - tol {
                    best = Some(cand);
                }
            }
        }
    }
    best.copied()
        .ok_or_else(|| Error::AllDiverged("every multiplier".into()))
}

fn worker_count(cfg: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(cfg
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

struct Job {
    algorithm: Algorithm,
    multiplier: f64,
    replicate: usize,
    seed: u64,
    run_seed: u64,
    steps: StepSizes<f64>,
    local_steps: usize,
}

/// Runs the configured grid and writes `<algo>_runs.csv`, `<algo>_mean.csv`,
/// `best.csv` and `manifest.json` into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let built = build_problem(cfg)?;
    let p = &built.problem;
    let opt = resolve_optimum(cfg, &built)?;
    let (sigma_sq, sigma_tilde_sq) = variance_lab::star_variances(p, &opt.x_star)?;
    let regime = cfg.regime.unwrap_or_else(|| p.regime().into());
    let rounds = cfg.clients / cfg.cohort;
    let params = RegimeParams {
        regime,
        l: p.smoothness(),
        mu: p.strong_convexity(),
        clients: cfg.clients,
        per_client: p.per_client(),
        cohort: cfg.cohort,
        meta_epochs: cfg.epochs,
        sigma_star_sq: sigma_sq,
        sigma_tilde_star_sq: sigma_tilde_sq,
        init_dist_sq: crate::linalg::norm_sq(&opt.x_star),
    };

    let mut jobs = Vec::new();
    for &algorithm in &cfg.algorithms {
        let base = base_steps(cfg, algorithm, p, &params)?;
        let local_steps = cfg.local_steps_for(algorithm, p.per_client());
        for &multiplier in &cfg.multipliers {
            let steps = apply_multiplier(&base, multiplier, local_steps, rounds);
            for (replicate, &seed) in cfg.seeds.iter().enumerate() {
                jobs.push(Job {
                    algorithm,
                    multiplier,
                    replicate,
                    seed,
                    run_seed: run_seed(seed, algorithm, multiplier, replicate),
                    steps,
                    local_steps,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg)?)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RunTrace<f64>>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let mut ac = AlgoConfig::new(job.algorithm, cfg.cohort, cfg.epochs, job.steps);
                ac.shuffle = cfg.shuffle.clone();
                ac.local_steps = Some(job.local_steps);
                ac.batch_fraction = cfg.batch_fraction;
                ac.seed = job.run_seed;
                ac.parallel = cfg.parallel_cohorts;
                optimizer::run(p, &ac, &opt)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(jobs.len());
    let mut traces = Vec::with_capacity(jobs.len());
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let (trace, error) = match outcome {
            Ok(t) => (Some(t), None),
            Err(e @ Error::Divergence { .. }) => (None, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        records.push(RunRecord {
            algorithm: job.algorithm,
            multiplier: job.multiplier,
            replicate: job.replicate,
            seed: job.seed,
            run_seed: job.run_seed,
            steps: job.steps,
            local_steps: job.local_steps,
            diverged: trace.is_none(),
            error,
            averaging_residual: trace.as_ref().and_then(|t| t.averaging_residual),
            global_collapse: trace.as_ref().and_then(|t| t.global_collapse),
        });
        traces.push(trace);
    }

    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let mut best = Vec::new();
    let mut all_diverged = Vec::new();
    let mut diverged = BTreeMap::new();
    let mut best_csv = String::from("algorithm,multiplier,final_dist_sq_mean\n");

    for &algo in &cfg.algorithms {
        let mut runs_csv = format!("{RUNS_HEADER}\n");
        let mut mean_csv = format!("{MEAN_HEADER}\n");
        let mut per_mult = Vec::new();
        let mut n_diverged = 0;
        for &mult in &cfg.multipliers {
            let members: Vec<(&RunRecord, &RunTrace<f64>)> = records
                .iter()
                .zip(&traces)
                .filter(|(r, _)| r.algorithm == algo && r.multiplier.to_bits() == mult.to_bits())
                .filter_map(|(r, t)| {
                    if t.is_none() {
                        n_diverged += 1;
                    }
                    t.as_ref().map(|t| (r, t))
                })
                .collect();
            for (rec, t) in &members {
                for pt in &t.points {
                    let wall = if cfg.record_wall_time { pt.wall_ms } else { 0.0 };
                    writeln!(
                        runs_csv,
                        "{},{},{},{},{},{},{},{}",
                        algo.name(),
                        mult,
                        rec.seed,
                        pt.epoch,
                        pt.dist_sq,
                        pt.func_gap,
                        pt.grad_evals,
                        wall
                    )
                    .unwrap();
                }
            }
            let final_mean = if members.is_empty() {
                None
            } else {
                let n_points = members[0].1.points.len();
                let k = members.len() as f64;
                for i in 0..n_points {
                    let d = members.iter().map(|(_, t)| t.points[i].dist_sq).sum::<f64>() / k;
                    let f = members.iter().map(|(_, t)| t.points[i].func_gap).sum::<f64>() / k;
                    writeln!(
                        mean_csv,
                        "{},{},true,{},{},{},{}",
                        algo.name(),
                        mult,
                        members[0].1.points[i].epoch,
                        d,
                        f,
                        members.len()
                    )
                    .unwrap();
                }
                Some(members.iter().map(|(_, t)| t.last().dist_sq).sum::<f64>() / k)
            };
            per_mult.push(MultiplierResult {
                multiplier: mult,
                final_mean,
            });
        }
        diverged.insert(algo.name().to_string(), n_diverged);
        match select_best_multiplier(&per_mult) {
            Ok(b) => {
                let v = b.final_mean.unwrap();
                writeln!(best_csv, "{},{},{}", algo.name(), b.multiplier, v).unwrap();
                best.push(BestRow {
                    algorithm: algo,
                    multiplier: b.multiplier,
                    final_dist_sq_mean: v,
                });
            }
            Err(_) => all_diverged.push(algo),
        }
        for (name, body) in [
            (format!("{}_runs.csv", algo.name()), runs_csv),
            (format!("{}_mean.csv", algo.name()), mean_csv),
        ] {
            let path = out.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            files.push(path);
        }
    }
    let best_path = out.join("best.csv");
    std::fs::write(&best_path, best_csv).map_err(|e| Error::io(&best_path, e))?;
    files.push(best_path);

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        dataset_hash: built.dataset_hash.clone(),
        optimum_hash: sha_hex(&problem::encode_optimum(&opt.x_star, opt.grad_norm)),
        optimum_grad_norm: opt.grad_norm,
        smoothness: p.smoothness(),
        strong_convexity: p.strong_convexity(),
        condition_number: p.condition_number(),
        sigma_star_sq: sigma_sq,
        sigma_tilde_star_sq: sigma_tilde_sq,
        regime,
        runs: records,
        diverged,
        all_diverged,
        best,
        exclusion_rule: "diverged runs (non-finite iterate or norm above 1e12) are excluded from means and counted per algorithm".into(),
    };
    let manifest_path = out.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&manifest_path, e))?;
    files.push(manifest_path);

    Ok(ExperimentOutput {
        manifest,
        files,
        traces,
    })
}
