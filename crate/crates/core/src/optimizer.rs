//! RR-CLI and the baselines it is compared against.
//!
//! All four algorithms share one driver: a meta-epoch is `R = M / C`
//! communication rounds, each round broadcasts the server model to a cohort
//! of `C` clients, every cohort member runs a local update and returns the
//! pseudo-gradient `g_m = (x - x_m) / (gamma * S)` where `S` is its number of
//! local steps, and the server steps `x <- x - eta * mean(g_m)`. What differs
//! is how cohorts are drawn, what a local update is and whether a global step
//! closes the meta-epoch:
//!
//! | algorithm   | cohorts                         | local update        | global step |
//! |-------------|---------------------------------|---------------------|-------------|
//! | `RrCli`     | disjoint, cover `[M]` per epoch | shuffled local pass | yes         |
//! | `RrCliWr`   | independent uniform per round   | shuffled local pass | yes         |
//! | `Nastya`    | independent uniform per round   | shuffled local pass | no          |
//! | `FedAvg`    | independent uniform per round   | minibatch SGD       | no          |
//!
//! One recorded epoch is `M * N` component-gradient evaluations.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{FederatedProblem, Optimum};
use crate::rng::{self, Stream};
use crate::scalar::{count, lit, Scalar};
use crate::shuffling::{self, ShuffleMode};

/// Iterates with a coordinate beyond this norm count as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "rrcli")]
    RrCli,
    #[serde(rename = "rrcli_wr")]
    RrCliWr,
    Nastya,
    #[serde(rename = "fedavg")]
    FedAvg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RrCli => "rrcli",
            Algorithm::RrCliWr => "rrcli_wr",
            Algorithm::Nastya => "nastya",
            Algorithm::FedAvg => "fedavg",
        }
    }

    pub fn has_global_step(self) -> bool {
        matches!(self, Algorithm::RrCli | Algorithm::RrCliWr)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rrcli" | "rr_cli" => Ok(Algorithm::RrCli),
            "rrcli_wr" | "rr_cli_wr" => Ok(Algorithm::RrCliWr),
            "nastya" => Ok(Algorithm::Nastya),
            "fedavg" | "fed_avg" => Ok(Algorithm::FedAvg),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Client step `gamma`, server step `eta`, global step `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes<S> {
    pub gamma: S,
    pub eta: S,
    pub theta: S,
    #[serde(default)]
    pub decay: bool,
}

impl<S: Scalar> StepSizes<S> {
    pub fn new(gamma: S, eta: S, theta: S) -> Result<Self> {
        let s = Self {
            gamma,
            eta,
            theta,
            decay: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: S| v > S::zero() && v.is_finite();
        if ok(self.gamma) && ok(self.eta) && ok(self.theta) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "step sizes must be positive and finite: {self:?}"
            )))
        }
    }

    pub fn with_decay(mut self, decay: bool) -> Self {
        self.decay = decay;
        self
    }

    /// Multiplies the client step and keeps `eta / gamma` and `theta / eta`.
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            gamma: self.gamma * factor,
            eta: self.eta * factor,
            theta: self.theta * factor,
            decay: self.decay,
        }
    }
}

/// All three step sizes divided by `1 + epochs_passed`; the ratios between
/// them, and hence any regime ordering, are preserved.
pub fn apply_decay<S: Scalar>(s: &StepSizes<S>, epochs_passed: usize) -> StepSizes<S> {
    if epochs_passed == 0 {
        return *s;
    }
    s.scaled(S::one() / count::<S>(1 + epochs_passed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig<S> {
    pub algorithm: Algorithm,
    pub cohort_size: usize,
    pub meta_epochs: usize,
    pub shuffle: ShuffleMode,
    pub steps: StepSizes<S>,
    /// Local steps per participation; `None` means one component per step
    /// (`S = N`). Local passes split the shuffled data into this many
    /// contiguous minibatches.
    pub local_steps: Option<usize>,
    /// FedAvg minibatch size as a fraction of `N`.
    pub batch_fraction: f64,
    pub seed: u64,
    pub x0: Option<Vec<S>>,
    /// Run cohort members on the rayon pool.
    pub parallel: bool,
}

impl<S: Scalar> AlgoConfig<S> {
    pub fn new(algorithm: Algorithm, cohort_size: usize, meta_epochs: usize, steps: StepSizes<S>) -> Self {
        Self {
            algorithm,
            cohort_size,
            meta_epochs,
            shuffle: ShuffleMode::reshuffling(),
            steps,
            local_steps: None,
            batch_fraction: 0.1,
            seed: 0,
            x0: None,
            parallel: false,
        }
    }

    pub fn local_steps_for(&self, n: usize) -> usize {
        self.local_steps.unwrap_or(n)
    }

    fn validate(&self, p: &FederatedProblem<S>) -> Result<()> {
        self.steps.validate()?;
        shuffling::rounds_per_epoch(p.clients(), self.cohort_size)?;
        let s = self.local_steps_for(p.per_client());
        if s == 0 {
            return Err(Error::InvalidArgument("local steps must be positive".into()));
        }
        if self.algorithm != Algorithm::FedAvg && s > p.per_client() {
            return Err(Error::InvalidArgument(format!(
                "{s} local steps exceed the {} local samples of a pass",
                p.per_client()
            )));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "batch fraction must be in (0, 1], got {}",
                self.batch_fraction
            )));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != p.dim() {
                return Err(Error::InvalidArgument("x0 has the wrong dimension".into()));
            }
        }
        if let shuffling::ClientMode::Fixed(s) = &self.shuffle.client {
            s.validate(p.clients(), self.cohort_size)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint<S> {
    /// Equivalent full-gradient passes so far.
    pub epoch: f64,
    pub meta_epoch: usize,
    pub dist_sq: S,
    pub func_gap: S,
    pub grad_evals: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<S> {
    pub algorithm: Algorithm,
    pub points: Vec<TracePoint<S>>,
    pub final_x: Vec<S>,
    /// Client ids that ran a local update, per meta-epoch, in round order.
    pub participation: Vec<Vec<usize>>,
    /// Largest `|x^{r+1} - mean of cohort endpoints|_inf / max(1, |x^r|_inf)`
    /// over all rounds; only tracked when `eta == gamma * S`.
    pub averaging_residual: Option<S>,
    /// Whether every global step collapsed to `x_{t+1} = x_t^R`; only tracked
    /// when `theta == eta * R`.
    pub global_collapse: Option<bool>,
}

impl<S: Scalar> RunTrace<S> {
    pub fn last(&self) -> &TracePoint<S> {
        self.points.last().expect("trace has the initial point")
    }
}

fn check_iterate<S: Scalar>(x: &[S], context: impl FnOnce() -> String) -> Result<()> {
    let limit: S = lit(DIVERGENCE_NORM * DIVERGENCE_NORM);
    if !linalg::is_finite(x) || linalg::norm_sq(x) > limit {
        return Err(Error::Divergence { context: context() });
    }
    Ok(())
}

/// Sizes of `steps` contiguous blocks covering `total` items, larger first.
fn block_sizes(total: usize, steps: usize) -> impl Iterator<Item = usize> {
    let base = total / steps;
    let extra = total % steps;
    (0..steps).map(move |s| base + usize::from(s < extra))
}

/// One pass over client `m`'s data in the order `perm`, one component per
/// step: returns the endpoint and `g_m = (x_start - x_end) / (gamma * N)`.
pub fn local_pass<S: Scalar>(
    p: &FederatedProblem<S>,
    m: usize,
    x_start: &[S],
    gamma: S,
    perm: &[usize],
) -> Result<(Vec<S>, Vec<S>)> {
    local_pass_minibatch(p, m, x_start, gamma, perm, p.per_client())
}

/// Same pass with the permuted data cut into `steps` contiguous minibatches;
/// each step uses the minibatch-mean gradient. `g_m` is normalized by
/// `gamma * steps`.
pub fn local_pass_minibatch<S: Scalar>(
    p: &FederatedProblem<S>,
    m: usize,
    x_start: &[S],
    gamma: S,
    perm: &[usize],
    steps: usize,
) -> Result<(Vec<S>, Vec<S>)> {
    let n = p.per_client();
    if m >= p.clients() {
        return Err(Error::IndexOutOfRange {
            what: "client",
            index: m,
            bound: p.clients(),
        });
    }
    if !shuffling::is_permutation(perm, n) {
        return Err(Error::InvalidArgument(format!("not a permutation of 0..{n}")));
    }
    if steps == 0 || steps > n {
        return Err(Error::InvalidArgument(format!("{steps} local steps for {n} samples")));
    }
    let mut x = x_start.to_vec();
    let mut grad = vec![S::zero(); x.len()];
    let mut pos = 0;
    for size in block_sizes(n, steps) {
        grad.iter_mut().for_each(|g| *g = S::zero());
        let w = S::one() / count(size);
        for &j in &perm[pos..pos + size] {
            p.add_gradient_unchecked(m, j, &x, w, &mut grad);
        }
        linalg::axpy(-gamma, &grad, &mut x);
        check_iterate(&x, || format!("client {m}, local sample {}", perm[pos]))?;
        pos += size;
    }
    let g = pseudo_gradient(x_start, &x, gamma * count(steps));
    Ok((x, g))
}

/// FedAvg local work: `batches.len()` steps, each on a fresh minibatch drawn
/// without replacement from the client's `N` samples.
fn fedavg_local<S: Scalar>(
    p: &FederatedProblem<S>,
    m: usize,
    x_start: &[S],
    gamma: S,
    batches: &[usize],
    stream: &mut Stream,
) -> Result<(Vec<S>, Vec<S>)> {
    let n = p.per_client();
    let mut x = x_start.to_vec();
    let mut grad = vec![S::zero(); x.len()];
    let mut pool: Vec<usize> = (0..n).collect();
    for &b in batches {
        // partial Fisher-Yates: the first b entries become the sample
        for i in 0..b {
            let k = i + rng::below(stream, n - i);
            pool.swap(i, k);
        }
        grad.iter_mut().for_each(|g| *g = S::zero());
        let w = S::one() / count(b);
        for &j in &pool[..b] {
            p.add_gradient_unchecked(m, j, &x, w, &mut grad);
        }
        linalg::axpy(-gamma, &grad, &mut x);
        check_iterate(&x, || format!("client {m}, fedavg step"))?;
    }
    let g = pseudo_gradient(x_start, &x, gamma * count(batches.len()));
    Ok((x, g))
}

fn pseudo_gradient<S: Scalar>(start: &[S], end: &[S], denom: S) -> Vec<S> {
    start.iter().zip(end).map(|(&a, &b)| (a - b) / denom).collect()
}

/// `C` distinct clients, uniform, drawn independently for every round.
pub fn sample_cohort(clients: usize, cohort: usize, seed: u64, round: u64) -> Vec<usize> {
    let mut stream = rng::derive_stream(seed, "cohort", &[round]);
    let mut pool: Vec<usize> = (0..clients).collect();
    for i in 0..cohort {
        let k = i + rng::below(&mut stream, clients - i);
        pool.swap(i, k);
    }
    pool.truncate(cohort);
    pool
}

/// Where the cohort of round `r` in meta-epoch `t` comes from.
pub trait CohortSource {
    fn cohort(&mut self, t: usize, r: usize) -> Result<Vec<usize>>;
}

impl<F: FnMut(usize, usize) -> Result<Vec<usize>>> CohortSource for F {
    fn cohort(&mut self, t: usize, r: usize) -> Result<Vec<usize>> {
        self(t, r)
    }
}

/// Disjoint cohorts from the meta-epoch schedule.
struct Reshuffled<'a> {
    clients: usize,
    cohort: usize,
    mode: &'a shuffling::ClientMode,
    seed: u64,
    cached: Option<(usize, shuffling::CohortSchedule)>,
}

impl CohortSource for Reshuffled<'_> {
    fn cohort(&mut self, t: usize, r: usize) -> Result<Vec<usize>> {
        if self.cached.as_ref().map(|(e, _)| *e) != Some(t) {
            let s = shuffling::build_cohort_schedule(self.clients, self.cohort, self.mode, t, self.seed)?;
            self.cached = Some((t, s));
        }
        Ok(self.cached.as_ref().unwrap().1.cohorts[r].clone())
    }
}

struct Independent {
    clients: usize,
    cohort: usize,
    rounds: usize,
    seed: u64,
}

impl CohortSource for Independent {
    fn cohort(&mut self, t: usize, r: usize) -> Result<Vec<usize>> {
        Ok(sample_cohort(self.clients, self.cohort, self.seed, (t * self.rounds + r) as u64))
    }
}

pub fn run_rrcli<S: Scalar>(
    p: &FederatedProblem<S>,
    cfg: &AlgoConfig<S>,
    optimum: &Optimum<S>,
) -> Result<RunTrace<S>> {
    expect(cfg, &[Algorithm::RrCli])?;
    run(p, cfg, optimum)
}

pub fn run_nastya<S: Scalar>(
    p: &FederatedProblem<S>,
    cfg: &AlgoConfig<S>,
    optimum: &Optimum<S>,
) -> Result<RunTrace<S>> {
    expect(cfg, &[Algorithm::Nastya])?;
    run(p, cfg, optimum)
}

pub fn run_fedavg<S: Scalar>(
    p: &FederatedProblem<S>,
    cfg: &AlgoConfig<S>,
    optimum: &Optimum<S>,
) -> Result<RunTrace<S>> {
    expect(cfg, &[Algorithm::FedAvg])?;
    run(p, cfg, optimum)
}

fn expect<S>(cfg: &AlgoConfig<S>, allowed: &[Algorithm]) -> Result<()> {
    if allowed.contains(&cfg.algorithm) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "configured algorithm {:?} is not {allowed:?}",
            cfg.algorithm
        )))
    }
}

/// Runs `cfg.algorithm` with its own cohort sampling.
pub fn run<S: Scalar>(p: &FederatedProblem<S>, cfg: &AlgoConfig<S>, optimum: &Optimum<S>) -> Result<RunTrace<S>> {
    cfg.validate(p)?;
    let rounds = p.clients() / cfg.cohort_size;
    match cfg.algorithm {
        Algorithm::RrCli => {
            let mut src = Reshuffled {
                clients: p.clients(),
                cohort: cfg.cohort_size,
                mode: &cfg.shuffle.client,
                seed: cfg.seed,
                cached: None,
            };
            run_with_cohorts(p, cfg, optimum, &mut src)
        }
        _ => {
            let mut src = Independent {
                clients: p.clients(),
                cohort: cfg.cohort_size,
                rounds,
                seed: cfg.seed,
            };
            run_with_cohorts(p, cfg, optimum, &mut src)
        }
    }
}

/// The shared driver with an explicit cohort source.
pub fn run_with_cohorts<S: Scalar>(
    p: &FederatedProblem<S>,
    cfg: &AlgoConfig<S>,
    optimum: &Optimum<S>,
    cohorts: &mut dyn CohortSource,
) -> Result<RunTrace<S>> {
    cfg.validate(p)?;
    if optimum.x_star.len() != p.dim() {
        return Err(Error::InvalidArgument("optimum has the wrong dimension".into()));
    }
    let started = Instant::now();
    let m_total = p.clients();
    let n = p.per_client();
    let c = cfg.cohort_size;
    let rounds = m_total / c;
    let local_steps = cfg.local_steps_for(n);
    let fedavg_batches: Vec<usize> = if cfg.algorithm == Algorithm::FedAvg {
        let per_step = ((cfg.batch_fraction * n as f64).round() as usize).clamp(1, n);
        let budget = per_step * local_steps;
        block_sizes(budget, local_steps).map(|b| b.clamp(1, n)).collect()
    } else {
        Vec::new()
    };
    let evals_per_client: u64 = if cfg.algorithm == Algorithm::FedAvg {
        fedavg_batches.iter().sum::<usize>() as u64
    } else {
        n as u64
    };
    let epoch_cost = (m_total * n) as f64;
    let normalizer: S = count(local_steps);

    let mut x = cfg.x0.clone().unwrap_or_else(|| vec![S::zero(); p.dim()]);
    let mut grad_evals = 0u64;
    let metrics = |x: &[S]| -> (S, S) {
        (
            linalg::dist_sq(x, &optimum.x_star),
            p.objective_unchecked(x) - optimum.f_star,
        )
    };
    let (d0, f0) = metrics(&x);
    let mut points = vec![TracePoint {
        epoch: 0.0,
        meta_epoch: 0,
        dist_sq: d0,
        func_gap: f0,
        grad_evals: 0,
        wall_ms: 0.0,
    }];
    let mut participation = Vec::with_capacity(cfg.meta_epochs);
    let mut averaging_residual: Option<S> = None;
    let mut global_collapse: Option<bool> = None;

    for t in 0..cfg.meta_epochs {
        let steps = if cfg.steps.decay {
            apply_decay(&cfg.steps, t)
        } else {
            cfg.steps
        };
        let x_epoch_start = x.clone();
        let mut visited: Vec<usize> = Vec::with_capacity(m_total);
        let mut seen_this_epoch = vec![0u64; m_total];

        for r in 0..rounds {
            let mut cohort = cohorts.cohort(t, r)?;
            if cohort.len() != c || cohort.iter().any(|&m| m >= m_total) {
                return Err(Error::InvalidArgument(format!(
                    "cohort for epoch {t} round {r} is not {c} valid client ids"
                )));
            }
            visited.extend_from_slice(&cohort);
            // fixed client-id order keeps the aggregate bit-reproducible
            cohort.sort_unstable();

            let jobs: Vec<(usize, u64)> = cohort
                .iter()
                .map(|&m| {
                    let k = seen_this_epoch[m];
                    seen_this_epoch[m] += 1;
                    (m, k)
                })
                .collect();
            let x_round = &x;
            let update = |&(m, k): &(usize, u64)| -> Result<(Vec<S>, Vec<S>)> {
                match cfg.algorithm {
                    Algorithm::FedAvg => {
                        let round = (t * rounds + r) as u64;
                        let mut stream = rng::derive_stream(cfg.seed, "fedavg_batch", &[round, m as u64]);
                        fedavg_local(p, m, x_round, steps.gamma, &fedavg_batches, &mut stream)
                    }
                    _ => {
                        let perm = participation_perm(n, m, k, cfg, t);
                        local_pass_minibatch(p, m, x_round, steps.gamma, &perm, local_steps)
                    }
                }
            };
            let results: Vec<Result<(Vec<S>, Vec<S>)>> = if cfg.parallel && c > 1 {
                jobs.par_iter().map(update).collect()
            } else {
                jobs.iter().map(update).collect()
            };
            let mut g_sum = vec![S::zero(); p.dim()];
            let mut end_sum = vec![S::zero(); p.dim()];
            for res in results {
                let (x_end, g) = res.map_err(|e| match e {
                    Error::Divergence { context } => Error::Divergence {
                        context: format!("meta-epoch {t}, round {r}, {context}"),
                    },
                    other => other,
                })?;
                linalg::axpy(S::one(), &g, &mut g_sum);
                linalg::axpy(S::one(), &x_end, &mut end_sum);
            }
            let inv_c = S::one() / count(c);
            let mut x_next = x.clone();
            linalg::axpy(-steps.eta * inv_c, &g_sum, &mut x_next);

            if steps.eta == steps.gamma * normalizer {
                linalg::scale(inv_c, &mut end_sum);
                let scale = x.iter().fold(S::one(), |a, v| a.max(v.abs()));
                let res = linalg::max_abs_diff(&x_next, &end_sum) / scale;
                averaging_residual = Some(averaging_residual.map_or(res, |a| a.max(res)));
            }
            x = x_next;
            grad_evals += evals_per_client * c as u64;
            check_iterate(&x, || format!("meta-epoch {t}, round {r}, server step"))?;
        }

        if cfg.algorithm.has_global_step() {
            let ratio = steps.theta / (steps.eta * count(rounds));
            if ratio == S::one() {
                // x_t - (x_t - x_t^R) = x_t^R
                global_collapse.get_or_insert(true);
            } else {
                let mut next = x_epoch_start.clone();
                for (v, &xr) in next.iter_mut().zip(&x) {
                    *v -= ratio * (*v - xr);
                }
                if steps.theta == steps.eta * count(rounds) {
                    global_collapse = Some(next == x && global_collapse.unwrap_or(true));
                }
                x = next;
                check_iterate(&x, || format!("meta-epoch {t}, global step"))?;
            }
        }

        participation.push(visited);
        let (dist, gap) = metrics(&x);
        points.push(TracePoint {
            epoch: grad_evals as f64 / epoch_cost,
            meta_epoch: t + 1,
            dist_sq: dist,
            func_gap: gap,
            grad_evals,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(RunTrace {
        algorithm: cfg.algorithm,
        points,
        final_x: x,
        participation,
        averaging_residual,
        global_collapse,
    })
}

/// Local data order for the `k`-th participation of client `m` in
/// meta-epoch `t`. The first participation uses the shared per-(epoch,
/// client) stream; repeat participations (possible under independent cohort
/// sampling) draw fresh orders when reshuffling.
fn participation_perm<S>(n: usize, m: usize, k: u64, cfg: &AlgoConfig<S>, t: usize) -> Vec<usize> {
    match (cfg.shuffle.data, k) {
        (_, 0) | (shuffling::DataMode::ShuffleOnce, _) => {
            shuffling::data_permutation(n, m, cfg.shuffle.data, t, cfg.seed)
        }
        (shuffling::DataMode::Reshuffling, k) => {
            let mut s = rng::derive_stream(cfg.seed, "data_perm_repeat", &[t as u64, m as u64, k]);
            shuffling::fisher_yates(n, &mut s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::{quadratic_problem, solve_optimum, HessianMode, Heterogeneity, Spectrum};

    fn scalar_quadratic(centers: Vec<f64>, clients: usize) -> FederatedProblem<f64> {
        let n = centers.len() / clients;
        FederatedProblem::from_quadratics(
            clients,
            n,
            vec![Matrix::identity(1); centers.len()],
            centers.into_iter().map(|c| vec![c]).collect(),
            Spectrum { mu: 1.0, l: 1.0 },
        )
        .unwrap()
    }

    fn hetero(seed: u64) -> (FederatedProblem<f64>, Optimum<f64>) {
        let het = Heterogeneity {
            client_spread: 1.0,
            component_spread: 0.5,
            hessians: HessianMode::Random,
        };
        let p = quadratic_problem(6, 4, 3, Spectrum { mu: 0.5, l: 2.0 }, het, seed).unwrap();
        let o = solve_optimum(&p, 1e-13).unwrap();
        (p, o)
    }

    #[test]
    fn zero_gradients_leave_point_unchanged() {
        let p = scalar_quadratic(vec![2.0, 2.0], 1);
        let (x, g) = local_pass(&p, 0, &[2.0], 0.3, &[1, 0]).unwrap();
        assert_eq!(x, vec![2.0]);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn single_sample_pass_is_one_gradient() {
        let p = scalar_quadratic(vec![1.0, -1.0], 2);
        let (_, g) = local_pass(&p, 1, &[0.5], 0.25, &[0]).unwrap();
        assert_eq!(g, p.component_gradient(1, 0, &[0.5]).unwrap());
    }

    #[test]
    fn two_step_recursion() {
        let p = scalar_quadratic(vec![0.0, 0.0], 1);
        let (x, g) = local_pass(&p, 0, &[1.0], 0.1, &[0, 1]).unwrap();
        assert!((x[0] - 0.81).abs() < 1e-15);
        assert!((g[0] - 0.95).abs() < 1e-14);
    }

    #[test]
    fn local_pass_rejects_bad_inputs() {
        let p = scalar_quadratic(vec![0.0, 0.0], 1);
        assert!(local_pass(&p, 0, &[1.0], 0.1, &[0, 0]).is_err());
        assert!(local_pass(&p, 1, &[1.0], 0.1, &[0, 1]).is_err());
        assert!(local_pass_minibatch(&p, 0, &[1.0], 0.1, &[0, 1], 3).is_err());
    }

    #[test]
    fn divergence_is_reported_with_location() {
        let p = scalar_quadratic(vec![0.0, 0.0], 1);
        match local_pass(&p, 0, &[1e11], 1e3, &[0, 1]) {
            Err(Error::Divergence { context }) => assert!(context.contains("client 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minibatch_blocks_cover_data() {
        let sizes: Vec<usize> = block_sizes(921, 10).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 921);
        assert_eq!(sizes[0], 93);
        assert_eq!(sizes[9], 92);
    }

    #[test]
    fn decay_schedule() {
        let s = StepSizes::new(1.0f64, 2.0, 6.0).unwrap().with_decay(true);
        assert_eq!(apply_decay(&s, 0), s);
        let h = apply_decay(&s, 1);
        assert_eq!((h.gamma, h.eta, h.theta), (0.5, 1.0, 3.0));
        let t = apply_decay(&s, 9);
        assert!((t.gamma - 0.1).abs() < 1e-16 && (t.eta - 0.2).abs() < 1e-16);
        assert!(StepSizes::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn full_participation_single_sample_is_gradient_descent() {
        let p = {
            let het = Heterogeneity {
                client_spread: 1.0,
                component_spread: 0.0,
                hessians: HessianMode::Random,
            };
            quadratic_problem::<f64>(4, 1, 3, Spectrum { mu: 0.5, l: 2.0 }, het, 2).unwrap()
        };
        let opt = solve_optimum(&p, 1e-13).unwrap();
        let gamma = 0.3;
        let mut cfg = AlgoConfig::new(Algorithm::RrCli, 4, 1, StepSizes::new(gamma, gamma, gamma).unwrap());
        cfg.x0 = Some(vec![1.0, -2.0, 0.5]);
        let trace = run_rrcli(&p, &cfg, &opt).unwrap();
        let x0 = cfg.x0.clone().unwrap();
        let g = p.full_gradient(&x0).unwrap();
        let expect: Vec<f64> = x0.iter().zip(&g).map(|(a, b)| a - gamma * b).collect();
        assert!(linalg::max_abs_diff(&trace.final_x, &expect) < 1e-14);
    }

    #[test]
    fn rrcli_collapse_identities_hold() {
        let (p, opt) = hetero(3);
        let gamma = 0.1;
        let steps = StepSizes::new(gamma, gamma * 4.0, gamma * 4.0 * 3.0).unwrap();
        let cfg = AlgoConfig::new(Algorithm::RrCli, 2, 10, steps);
        let trace = run_rrcli(&p, &cfg, &opt).unwrap();
        assert!(trace.averaging_residual.unwrap() <= 1e-12);
        assert_eq!(trace.global_collapse, Some(true));
    }

    #[test]
    fn general_global_step() {
        let (p, opt) = hetero(3);
        let steps = StepSizes::new(0.1, 0.4, 0.6).unwrap();
        let cfg = AlgoConfig::new(Algorithm::RrCli, 2, 1, steps);
        let trace = run_rrcli(&p, &cfg, &opt).unwrap();
        assert_eq!(trace.global_collapse, None);
        // x1 = x0 - theta (x0 - x^R)/(eta R) with x0 = 0 -> x1 = (0.5) x^R
        let full = run_rrcli(&p, &AlgoConfig::new(Algorithm::RrCli, 2, 1, StepSizes::new(0.1, 0.4, 1.2).unwrap()), &opt).unwrap();
        for (a, b) in trace.final_x.iter().zip(&full.final_x) {
            assert!((a - 0.5 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn every_client_once_per_meta_epoch() {
        let (p, opt) = hetero(5);
        let cfg = AlgoConfig::new(Algorithm::RrCli, 3, 7, StepSizes::new(0.05, 0.2, 0.4).unwrap());
        let trace = run_rrcli(&p, &cfg, &opt).unwrap();
        for epoch in &trace.participation {
            assert!(shuffling::is_permutation(epoch, 6));
        }
    }

    #[test]
    fn runs_are_bit_reproducible_and_parallel_safe() {
        let (p, opt) = hetero(8);
        let mut cfg = AlgoConfig::new(Algorithm::RrCli, 3, 5, StepSizes::new(0.05, 0.2, 0.4).unwrap());
        cfg.seed = 77;
        let a = run_rrcli(&p, &cfg, &opt).unwrap();
        cfg.parallel = true;
        let b = run_rrcli(&p, &cfg, &opt).unwrap();
        assert_eq!(a.final_x, b.final_x);
        let da: Vec<f64> = a.points.iter().map(|q| q.dist_sq).collect();
        let db: Vec<f64> = b.points.iter().map(|q| q.dist_sq).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn nastya_equals_rrcli_under_full_participation() {
        let (p, opt) = hetero(9);
        let steps = StepSizes::new(0.05, 0.2, 0.2).unwrap();
        let mut a = AlgoConfig::new(Algorithm::RrCli, 6, 6, steps);
        a.seed = 4;
        let mut b = a.clone();
        b.algorithm = Algorithm::Nastya;
        let ta = run_rrcli(&p, &a, &opt).unwrap();
        let tb = run_nastya(&p, &b, &opt).unwrap();
        let da: Vec<f64> = ta.points.iter().map(|q| q.dist_sq).collect();
        let db: Vec<f64> = tb.points.iter().map(|q| q.dist_sq).collect();
        assert_eq!(da, db);
        assert_eq!(ta.final_x, tb.final_x);
    }

    #[test]
    fn nastya_coupled_to_rrcli_cohorts() {
        let (p, opt) = hetero(10);
        let steps = StepSizes::new(0.05, 0.2, 0.6).unwrap();
        let mut a = AlgoConfig::new(Algorithm::RrCli, 2, 4, steps);
        a.seed = 12;
        let mut b = a.clone();
        b.algorithm = Algorithm::Nastya;
        let mode = a.shuffle.client.clone();
        let mut forced = |t: usize, r: usize| -> Result<Vec<usize>> {
            Ok(shuffling::build_cohort_schedule(6, 2, &mode, t, 12)?.cohorts[r].clone())
        };
        let ta = run_rrcli(&p, &a, &opt).unwrap();
        let tb = run_with_cohorts(&p, &b, &opt, &mut forced).unwrap();
        assert_eq!(ta.final_x, tb.final_x);
    }

    #[test]
    fn fedavg_full_batch_one_step_is_gradient_descent() {
        let (p, opt) = hetero(2);
        let gamma = 0.2;
        let mut cfg = AlgoConfig::new(Algorithm::FedAvg, 6, 3, StepSizes::new(gamma, gamma, gamma).unwrap());
        cfg.local_steps = Some(1);
        cfg.batch_fraction = 1.0;
        cfg.x0 = Some(vec![0.3, 0.1, -0.2]);
        let trace = run_fedavg(&p, &cfg, &opt).unwrap();
        let mut x = cfg.x0.clone().unwrap();
        for _ in 0..3 {
            let g = p.full_gradient(&x).unwrap();
            linalg::axpy(-gamma, &g, &mut x);
        }
        assert!(linalg::max_abs_diff(&trace.final_x, &x) < 1e-14);
        assert_eq!(trace.last().grad_evals, 3 * 24);
    }

    #[test]
    fn fedavg_fixed_point_on_homogeneous_problem() {
        let het = Heterogeneity {
            client_spread: 0.0,
            component_spread: 0.0,
            hessians: HessianMode::Random,
        };
        let p: FederatedProblem<f64> = quadratic_problem(4, 10, 3, Spectrum { mu: 0.5, l: 2.0 }, het, 1).unwrap();
        let opt = solve_optimum(&p, 1e-13).unwrap();
        let mut cfg = AlgoConfig::new(Algorithm::FedAvg, 2, 5, StepSizes::new(0.3, 3.0, 3.0).unwrap());
        cfg.local_steps = Some(10);
        cfg.x0 = Some(opt.x_star.clone());
        let trace = run_fedavg(&p, &cfg, &opt).unwrap();
        assert!(trace.points.iter().all(|q| q.dist_sq < 1e-24));
    }

    #[test]
    fn epoch_accounting_matches_across_algorithms() {
        let (p, opt) = hetero(4);
        let steps = StepSizes::new(0.05, 0.2, 0.6).unwrap();
        let mut epochs = Vec::new();
        for alg in [Algorithm::RrCli, Algorithm::Nastya, Algorithm::FedAvg] {
            let mut cfg = AlgoConfig::new(alg, 2, 3, steps);
            cfg.local_steps = Some(2);
            cfg.batch_fraction = 0.5;
            let t = run(&p, &cfg, &opt).unwrap();
            epochs.push(t.points.iter().map(|q| q.epoch).collect::<Vec<_>>());
        }
        assert_eq!(epochs[0], vec![0.0, 1.0, 2.0, 3.0]);
        assert!(epochs.iter().all(|e| e == &epochs[0]));
    }

    #[test]
    fn wrong_algorithm_is_rejected() {
        let (p, opt) = hetero(4);
        let cfg = AlgoConfig::new(Algorithm::FedAvg, 2, 1, StepSizes::new(0.1, 0.1, 0.1).unwrap());
        assert!(run_rrcli(&p, &cfg, &opt).is_err());
        let bad = AlgoConfig::new(Algorithm::RrCli, 4, 1, StepSizes::new(0.1, 0.1, 0.1).unwrap());
        assert!(run_rrcli(&p, &bad, &opt).is_err());
    }

    #[test]
    fn algorithm_names_parse() {
        for a in [Algorithm::RrCli, Algorithm::RrCliWr, Algorithm::Nastya, Algorithm::FedAvg] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sgd".parse::<Algorithm>().is_err());
    }
}
