//! The finite-sum objective `f(x) = (1/M) sum_m (1/N) sum_j f_m^j(x)`.
//!
//! Two component families are provided: L2-regularized logistic loss over a
//! partitioned [`SparseDataset`], and synthetic strongly convex quadratics
//! `f_m^j(x) = 1/2 (x - c)^T A (x - c)` with a closed-form minimizer.

use std::io::Write as _;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{FederatedPartition, SparseDataset};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;
use crate::scalar::{compensated_sum, count, lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityRegime {
    /// every `f_m^j` is `mu`-strongly convex
    ComponentStronglyConvex,
    /// every `f_m` is `mu`-strongly convex, components only convex
    ClientStronglyConvex,
    /// only `f` is `mu`-strongly convex
    GlobalStronglyConvex,
}

#[derive(Debug, Clone)]
struct LogisticRow<S> {
    indices: Vec<usize>,
    values: Vec<S>,
    label: S,
}

impl<S: Scalar> LogisticRow<S> {
    fn margin(&self, x: &[S]) -> S {
        self.indices
            .iter()
            .zip(&self.values)
            .fold(S::zero(), |acc, (&i, &v)| acc + v * x[i])
    }
}

#[derive(Debug, Clone)]
enum Components<S> {
    Logistic(Vec<LogisticRow<S>>),
    Quadratic {
        hessians: Vec<Matrix<S>>,
        centers: Vec<Vec<S>>,
    },
}

/// `M` clients with `N` components each, flattened as `m * N + j`.
#[derive(Debug, Clone)]
pub struct FederatedProblem<S> {
    clients: usize,
    per_client: usize,
    dim: usize,
    alpha: S,
    smoothness: S,
    strong_convexity: S,
    regime: ConvexityRegime,
    components: Components<S>,
}

/// `log(1 + exp(t))` without overflow.
fn softplus<S: Scalar>(t: S) -> S {
    if t > S::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid<S: Scalar>(t: S) -> S {
    if t >= S::zero() {
        S::one() / (S::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (S::one() + e)
    }
}

/// Builds the L2-regularized logistic problem: component `(m, j)` is row
/// `partition.assignment[m][j]` of `dataset`.
pub fn logistic_problem<S: Scalar>(
    partition: &FederatedPartition,
    dataset: &SparseDataset,
    alpha: f64,
) -> Result<FederatedProblem<S>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if partition.clients == 0 || partition.per_client == 0 {
        return Err(Error::InvalidArgument("empty partition".into()));
    }
    let mut rows = Vec::with_capacity(partition.clients * partition.per_client);
    let mut max_norm = 0.0f64;
    for client in &partition.assignment {
        for &r in client {
            let row = dataset.rows.get(r).ok_or(Error::IndexOutOfRange {
                what: "dataset row",
                index: r,
                bound: dataset.count(),
            })?;
            max_norm = max_norm.max(row.norm_sq());
            rows.push(LogisticRow {
                indices: row.indices.clone(),
                values: row.values.iter().map(|&v| lit(v)).collect(),
                label: lit(dataset.labels[r]),
            });
        }
    }
    Ok(FederatedProblem {
        clients: partition.clients,
        per_client: partition.per_client,
        dim: dataset.dim,
        alpha: lit(alpha),
        smoothness: lit(max_norm / 4.0 + alpha),
        strong_convexity: lit(alpha),
        regime: ConvexityRegime::ComponentStronglyConvex,
        components: Components::Logistic(rows),
    })
}

/// Eigenvalue range of the synthetic component Hessians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub mu: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    /// one random Hessian shared by every component
    Shared,
    /// an independent random Hessian per component
    #[default]
    Random,
}

/// How far component minimizers `c_m^j` spread: each client draws an offset
/// `client_spread * z_m`, each component adds `component_spread * z_mj`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heterogeneity {
    pub client_spread: f64,
    pub component_spread: f64,
    #[serde(default)]
    pub hessians: HessianMode,
}

fn random_spd<S: Scalar>(d: usize, spectrum: Spectrum, stream: &mut rng::Stream) -> Matrix<S> {
    use rand::Rng;
    // Gram-Schmidt on Gaussian vectors gives a Haar-ish orthonormal basis.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(stream)).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    let mut a = vec![0.0f64; d * d];
    for (k, q) in basis.iter().enumerate() {
        let lambda = if spectrum.l > spectrum.mu {
            match k {
                0 => spectrum.l,
                1 => spectrum.mu,
                _ => stream.random_range(spectrum.mu..spectrum.l),
            }
        } else {
            spectrum.l
        };
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] += lambda * q[i] * q[j];
            }
        }
    }
    // Symmetrize against rounding.
    for i in 0..d {
        for j in 0..i {
            let s = 0.5 * (a[i * d + j] + a[j * d + i]);
            a[i * d + j] = s;
            a[j * d + i] = s;
        }
    }
    Matrix {
        n: d,
        data: a.into_iter().map(lit).collect(),
    }
}

/// Random strongly convex quadratic instance; eigenvalues of every component
/// Hessian lie in `[mu, L]` (the extremes are attained when `d >= 2`).
pub fn quadratic_problem<S: Scalar>(
    clients: usize,
    per_client: usize,
    dim: usize,
    spectrum: Spectrum,
    heterogeneity: Heterogeneity,
    seed: u64,
) -> Result<FederatedProblem<S>> {
    if !(spectrum.mu > 0.0) || spectrum.mu > spectrum.l {
        return Err(Error::InvalidArgument(format!(
            "need 0 < mu <= L, got mu={} L={}",
            spectrum.mu, spectrum.l
        )));
    }
    if clients == 0 || per_client == 0 || dim == 0 {
        return Err(Error::InvalidArgument("empty quadratic problem".into()));
    }
    let mut stream = rng::derive_stream(seed, "quadratic", &[]);
    let total = clients * per_client;
    let hessians: Vec<Matrix<S>> = match heterogeneity.hessians {
        HessianMode::Shared => {
            let a = random_spd(dim, spectrum, &mut stream);
            vec![a; total]
        }
        HessianMode::Random => (0..total)
            .map(|_| random_spd(dim, spectrum, &mut stream))
            .collect(),
    };
    let mut centers = Vec::with_capacity(total);
    for _ in 0..clients {
        let offset: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut stream);
                heterogeneity.client_spread * z
            })
            .collect();
        for _ in 0..per_client {
            centers.push(
                offset
                    .iter()
                    .map(|&o| {
                        let z: f64 = StandardNormal.sample(&mut stream);
                        lit(o + heterogeneity.component_spread * z)
                    })
                    .collect(),
            );
        }
    }
    FederatedProblem::from_quadratics(clients, per_client, hessians, centers, spectrum)
}

impl<S: Scalar> FederatedProblem<S> {
    /// Quadratic problem from explicit parts, components laid out `m * N + j`.
    pub fn from_quadratics(
        clients: usize,
        per_client: usize,
        hessians: Vec<Matrix<S>>,
        centers: Vec<Vec<S>>,
        spectrum: Spectrum,
    ) -> Result<Self> {
        let total = clients * per_client;
        if total == 0 || hessians.len() != total || centers.len() != total {
            return Err(Error::InvalidArgument(format!(
                "expected {total} hessians and centers, got {} and {}",
                hessians.len(),
                centers.len()
            )));
        }
        let dim = centers[0].len();
        if hessians.iter().any(|h| h.n != dim) || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidArgument("inconsistent quadratic dimensions".into()));
        }
        if !(spectrum.mu >= 0.0) || spectrum.mu > spectrum.l {
            return Err(Error::InvalidArgument("need 0 <= mu <= L".into()));
        }
        Ok(Self {
            clients,
            per_client,
            dim,
            alpha: S::zero(),
            smoothness: lit(spectrum.l),
            strong_convexity: lit(spectrum.mu),
            regime: ConvexityRegime::ComponentStronglyConvex,
            components: Components::Quadratic { hessians, centers },
        })
    }

    pub fn clients(&self) -> usize {
        self.clients
    }

    pub fn per_client(&self) -> usize {
        self.per_client
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.clients * self.per_client
    }

    /// Regularization weight (zero for quadratics).
    pub fn alpha(&self) -> S {
        self.alpha
    }

    /// Smoothness constant `L` (max over components).
    pub fn smoothness(&self) -> S {
        self.smoothness
    }

    /// Strong convexity constant `mu`.
    pub fn strong_convexity(&self) -> S {
        self.strong_convexity
    }

    pub fn condition_number(&self) -> S {
        self.smoothness / self.strong_convexity
    }

    pub fn regime(&self) -> ConvexityRegime {
        self.regime
    }

    /// Overrides the declared regime, for problems built to weaker
    /// assumptions than their construction guarantees.
    pub fn with_regime(mut self, regime: ConvexityRegime) -> Self {
        self.regime = regime;
        self
    }

    fn check(&self, m: usize, j: usize) -> Result<()> {
        if m >= self.clients {
            return Err(Error::IndexOutOfRange {
                what: "client",
                index: m,
                bound: self.clients,
            });
        }
        if j >= self.per_client {
            return Err(Error::IndexOutOfRange {
                what: "component",
                index: j,
                bound: self.per_client,
            });
        }
        Ok(())
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `f_m^j(x)`; indices are assumed in range.
    pub(crate) fn loss_unchecked(&self, m: usize, j: usize, x: &[S]) -> S {
        let k = m * self.per_client + j;
        match &self.components {
            Components::Logistic(rows) => {
                let row = &rows[k];
                softplus(-row.label * row.margin(x))
                    + self.alpha * lit(0.5) * linalg::norm_sq(x)
            }
            Components::Quadratic { hessians, centers } => {
                let diff: Vec<S> = x.iter().zip(&centers[k]).map(|(&a, &b)| a - b).collect();
                lit::<S>(0.5) * hessians[k].quad_form(&diff)
            }
        }
    }

    /// `out += scale * grad f_m^j(x)`; indices are assumed in range.
    pub(crate) fn add_gradient_unchecked(&self, m: usize, j: usize, x: &[S], scale: S, out: &mut [S]) {
        let k = m * self.per_client + j;
        match &self.components {
            Components::Logistic(rows) => {
                let row = &rows[k];
                let coef = -row.label * sigmoid(-row.label * row.margin(x)) * scale;
                for (&i, &v) in row.indices.iter().zip(&row.values) {
                    out[i] += coef * v;
                }
                linalg::axpy(scale * self.alpha, x, out);
            }
            Components::Quadratic { hessians, centers } => {
                let diff: Vec<S> = x.iter().zip(&centers[k]).map(|(&a, &b)| a - b).collect();
                hessians[k].mul_vec_add(scale, &diff, out);
            }
        }
    }

    pub fn component_loss(&self, m: usize, j: usize, x: &[S]) -> Result<S> {
        self.check(m, j)?;
        self.check_dim(x)?;
        Ok(self.loss_unchecked(m, j, x))
    }

    pub fn component_gradient(&self, m: usize, j: usize, x: &[S]) -> Result<Vec<S>> {
        self.check(m, j)?;
        self.check_dim(x)?;
        let mut g = vec![S::zero(); self.dim];
        self.add_gradient_unchecked(m, j, x, S::one(), &mut g);
        Ok(g)
    }

    /// Bregman divergence `D(x, y) = h(x) - h(y) - <grad h(y), x - y>` of
    /// component `h = f_m^j`, evaluated without cancellation where possible.
    pub fn component_bregman(&self, m: usize, j: usize, x: &[S], y: &[S]) -> Result<S> {
        self.check(m, j)?;
        self.check_dim(x)?;
        self.check_dim(y)?;
        let k = m * self.per_client + j;
        let diff: Vec<S> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
        Ok(match &self.components {
            Components::Quadratic { hessians, .. } => lit::<S>(0.5) * hessians[k].quad_form(&diff),
            Components::Logistic(rows) => {
                let row = &rows[k];
                let z0 = -row.label * row.margin(y);
                let dz = -row.label * row.margin(&diff);
                let reg = self.alpha * lit(0.5) * linalg::norm_sq(&diff);
                let s = sigmoid(z0);
                let data = if dz.abs() < lit(1e-3) {
                    // softplus'' = s(1-s), softplus''' = s(1-s)(1-2s)
                    let h2 = s * (S::one() - s);
                    let h3 = h2 * (S::one() - lit::<S>(2.0) * s);
                    let h4 = h2 * (S::one() - lit::<S>(6.0) * h2);
                    dz * dz * (h2 / lit(2.0) + dz * (h3 / lit(6.0) + dz * h4 / lit(24.0)))
                } else {
                    softplus(z0 + dz) - softplus(z0) - s * dz
                };
                data.max(S::zero()) + reg
            }
        })
    }

    /// Bregman divergence of the client function `f_m`.
    pub fn client_bregman(&self, m: usize, x: &[S], y: &[S]) -> Result<S> {
        let terms = (0..self.per_client)
            .map(|j| self.component_bregman(m, j, x, y))
            .collect::<Result<Vec<S>>>()?;
        Ok(compensated_sum(terms) / count(self.per_client))
    }

    pub fn client_gradient(&self, m: usize, x: &[S]) -> Result<Vec<S>> {
        self.check(m, 0)?;
        self.check_dim(x)?;
        let mut g = vec![S::zero(); self.dim];
        let w = S::one() / count(self.per_client);
        for j in 0..self.per_client {
            self.add_gradient_unchecked(m, j, x, w, &mut g);
        }
        Ok(g)
    }

    pub fn full_gradient(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x)?;
        Ok(self.full_gradient_unchecked(x))
    }

    pub(crate) fn full_gradient_unchecked(&self, x: &[S]) -> Vec<S> {
        let mut g = vec![S::zero(); self.dim];
        let w = S::one() / count(self.components());
        for m in 0..self.clients {
            for j in 0..self.per_client {
                self.add_gradient_unchecked(m, j, x, w, &mut g);
            }
        }
        g
    }

    pub fn objective_value(&self, x: &[S]) -> Result<S> {
        self.check_dim(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[S]) -> S {
        let terms = (0..self.clients)
            .flat_map(|m| (0..self.per_client).map(move |j| (m, j)))
            .map(|(m, j)| self.loss_unchecked(m, j, x));
        compensated_sum(terms) / count(self.components())
    }

    /// Closed-form minimizer `(sum A)^-1 sum A c` of a quadratic problem.
    pub fn quadratic_minimizer(&self) -> Option<Vec<S>> {
        let Components::Quadratic { hessians, centers } = &self.components else {
            return None;
        };
        let mut a = Matrix::zeros(self.dim);
        let mut b = vec![S::zero(); self.dim];
        for (h, c) in hessians.iter().zip(centers) {
            a.add_assign(h);
            h.mul_vec_add(S::one(), c, &mut b);
        }
        a.cholesky_solve(&b)
    }
}

/// Numerically solved minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum<S> {
    pub x_star: Vec<S>,
    pub f_star: S,
    pub grad_norm: S,
}

pub const SOLVER_ITERATION_CAP: u64 = 10_000_000;
const PLAIN_GD_ITERATIONS: u64 = 1000;

/// Full-gradient descent with step `1/L`; if the tolerance is not met after
/// 1000 iterations it switches to Nesterov's constant-momentum scheme for
/// strongly convex functions with gradient-based restarts.
pub fn solve_optimum<S: Scalar>(p: &FederatedProblem<S>, tol: S) -> Result<Optimum<S>> {
    solve_optimum_from(p, tol, &vec![S::zero(); p.dim()])
}

pub fn solve_optimum_from<S: Scalar>(
    p: &FederatedProblem<S>,
    tol: S,
    x0: &[S],
) -> Result<Optimum<S>> {
    if !(tol > S::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if !(p.strong_convexity() > S::zero()) {
        return Err(Error::InvalidArgument("optimum solver needs mu > 0".into()));
    }
    p.check_dim(x0)?;
    let step = S::one() / p.smoothness();
    let mut x = x0.to_vec();
    let mut g = p.full_gradient_unchecked(&x);
    let mut gnorm = linalg::norm_sq(&g).sqrt();
    let mut it = 0u64;

    while gnorm > tol && it < PLAIN_GD_ITERATIONS {
        linalg::axpy(-step, &g, &mut x);
        g = p.full_gradient_unchecked(&x);
        gnorm = linalg::norm_sq(&g).sqrt();
        it += 1;
    }

    if gnorm > tol {
        let root = p.condition_number().sqrt();
        let beta = (root - S::one()) / (root + S::one());
        let mut x_prev = x.clone();
        let mut y = x.clone();
        let mut gy = g.clone();
        while it < SOLVER_ITERATION_CAP {
            let mut x_next = y.clone();
            linalg::axpy(-step, &gy, &mut x_next);
            // Restart when the step opposes the momentum direction.
            let mut restart = S::zero();
            for i in 0..x.len() {
                restart += gy[i] * (x_next[i] - x[i]);
            }
            x_prev.clone_from(&x);
            x = x_next;
            it += 1;
            g = p.full_gradient_unchecked(&x);
            gnorm = linalg::norm_sq(&g).sqrt();
            if gnorm <= tol {
                break;
            }
            if restart > S::zero() {
                y.clone_from(&x);
                gy.clone_from(&g);
            } else {
                for i in 0..x.len() {
                    y[i] = x[i] + beta * (x[i] - x_prev[i]);
                }
                gy = p.full_gradient_unchecked(&y);
            }
        }
    }

    if !(gnorm <= tol) {
        return Err(Error::NotConverged {
            iterations: it,
            grad_norm: gnorm.to_f64().unwrap_or(f64::NAN),
        });
    }
    let f_star = p.objective_unchecked(&x);
    Ok(Optimum {
        x_star: x,
        f_star,
        grad_norm: gnorm,
    })
}

const SIDECAR_MAGIC: &[u8; 8] = b"RRCLIOPT";

/// Cache key for a solved optimum: SHA-256 over the dataset bytes, the
/// client count, the partition seed and `alpha`.
pub fn optimum_cache_key(dataset_bytes: &[u8], clients: usize, seed: u64, alpha: f64) -> String {
    let mut h = Sha256::new();
    h.update((dataset_bytes.len() as u64).to_le_bytes());
    h.update(dataset_bytes);
    h.update((clients as u64).to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update(alpha.to_le_bytes());
    hex::encode(h.finalize())
}

/// Sidecar layout: magic `RRCLIOPT`, `d` as u64, `x*` as `d` f64, the
/// gradient norm as f64; all little endian.
pub fn encode_optimum(x_star: &[f64], grad_norm: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 + 8 * x_star.len() + 8);
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&(x_star.len() as u64).to_le_bytes());
    for v in x_star {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&grad_norm.to_le_bytes());
    out
}

pub fn decode_optimum(bytes: &[u8]) -> Result<(Vec<f64>, f64)> {
    let bad = |m: &str| Error::Sidecar(m.to_string());
    if bytes.len() < 24 || &bytes[..8] != SIDECAR_MAGIC {
        return Err(bad("missing magic"));
    }
    let d = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if bytes.len() != 16 + 8 * d + 8 {
        return Err(bad("length does not match dimension"));
    }
    let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let x = (0..d).map(|k| f(16 + 8 * k)).collect();
    Ok((x, f(16 + 8 * d)))
}

pub fn write_optimum(path: &Path, x_star: &[f64], grad_norm: f64) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&encode_optimum(x_star, grad_norm))
        .map_err(|e| Error::io(path, e))
}

pub fn read_optimum(path: &Path) -> Result<(Vec<f64>, f64)> {
    decode_optimum(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
