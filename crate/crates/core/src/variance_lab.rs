//! Variances of double-shuffled sample averages: closed forms, the matching
//! upper bound, exhaustive enumeration oracles and the star-sequence
//! simulator.
//!
//! Closed forms and enumeration are generic over [`Field`] so the same code
//! runs in `f64` and in exact rational arithmetic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::FederatedProblem;
use crate::rng;
use crate::scalar::{compensated_sum, count, Field, Scalar};
use crate::shuffling::{self, ClientMode, DataMode};

/// Enumeration guard for the brute-force oracles.
pub const MAX_OUTCOMES: u128 = 10_000_000;

/// `M x N` vectors `zeta_m^j` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceInputs<T> {
    zeta: Vec<Vec<Vec<T>>>,
    dim: usize,
}

impl<T: Field> VarianceInputs<T> {
    pub fn new(zeta: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let n = zeta.first().map_or(0, Vec::len);
        let dim = zeta.first().and_then(|c| c.first()).map_or(0, Vec::len);
        if zeta.is_empty() || n == 0 || dim == 0 {
            return Err(Error::InvalidArgument("variance inputs must be nonempty".into()));
        }
        if zeta.iter().any(|c| c.len() != n || c.iter().any(|v| v.len() != dim)) {
            return Err(Error::InvalidArgument("variance inputs must be M x N x d".into()));
        }
        Ok(Self { zeta, dim })
    }

    /// One-dimensional inputs, `values[m][j]`.
    pub fn from_scalars(values: Vec<Vec<T>>) -> Result<Self> {
        Self::new(
            values
                .into_iter()
                .map(|c| c.into_iter().map(|v| vec![v]).collect())
                .collect(),
        )
    }

    pub fn clients(&self) -> usize {
        self.zeta.len()
    }

    pub fn per_client(&self) -> usize {
        self.zeta[0].len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, m: usize, j: usize) -> &[T] {
        &self.zeta[m][j]
    }

    fn mean_of<'a>(&self, vs: impl Iterator<Item = &'a Vec<T>> + Clone, len: usize) -> Vec<T>
    where
        T: 'a,
    {
        let inv = T::one() / count::<T>(len);
        (0..self.dim)
            .map(|i| compensated_sum(vs.clone().map(|v| v[i].clone())) * inv.clone())
            .collect()
    }

    pub fn grand_mean(&self) -> Vec<T> {
        self.mean_of(self.zeta.iter().flatten(), self.clients() * self.per_client())
    }

    pub fn client_means(&self) -> Vec<Vec<T>> {
        self.zeta
            .iter()
            .map(|c| self.mean_of(c.iter(), self.per_client()))
            .collect()
    }

    /// `(1/MN) sum_{m,j} |zeta_m^j - mean|^2`.
    pub fn sigma_sq(&self) -> T {
        let g = self.grand_mean();
        let total = compensated_sum(self.zeta.iter().flatten().map(|v| sq_dist(v, &g)));
        total / count::<T>(self.clients() * self.per_client())
    }

    /// `(1/M) sum_m |mean_m - mean|^2`.
    pub fn sigma_tilde_sq(&self) -> T {
        let g = self.grand_mean();
        let total = compensated_sum(self.client_means().iter().map(|v| sq_dist(v, &g)));
        total / count::<T>(self.clients())
    }
}

fn sq_dist<T: Field>(a: &[T], b: &[T]) -> T {
    compensated_sum(a.iter().zip(b).map(|(x, y)| {
        let d = x.clone() - y.clone();
        d.clone() * d
    }))
}

fn frac<T: Field>(num: usize, den: usize) -> T {
    count::<T>(num) / count::<T>(den)
}

/// Variance of the average of the first `k` items of a double-shuffled
/// sweep over `M` clients with `N` items each.
pub fn closed_form_variance<T: Field>(k: usize, clients: usize, n: usize, sigma_sq: T, sigma_tilde_sq: T) -> Result<T> {
    let total = clients * n;
    if k == 0 || k > total {
        return Err(Error::InvalidArgument(format!("prefix length {k} not in 1..={total}")));
    }
    if clients == 1 && n == 1 {
        return Ok(T::zero());
    }
    if n == 1 {
        return Ok(sigma_tilde_sq * frac::<T>(clients - k, k * (clients - 1)));
    }
    if clients == 1 {
        return Ok(sigma_sq * frac::<T>(k * (n - k), k * k * (n - 1)));
    }
    let m_k = k / n;
    let j_k = k - m_k * n;
    let a: T = frac(j_k * (n - j_k), k * k * (n - 1));
    let b = frac::<T>((m_k * n * n + j_k * j_k) * (total - 1), k * k * (n - 1) * (clients - 1))
        - frac::<T>(n, k * (n - 1))
        - frac::<T>(1, clients - 1);
    Ok(a * sigma_sq + b * sigma_tilde_sq)
}

/// Variance of the cohort-averaged prefix of length `k <= N R` when the `M`
/// clients are dealt into `C` groups of `R`: complete rounds are averaged
/// over all groups, the partial round comes from one group.
///
/// The cross term is `-2 k_N (k - k_N) / (k^2 (M - 1)) * sigma_tilde^2`, as
/// confirmed by [`brute_force_variance`].
pub fn closed_form_minibatch_variance<T: Field>(
    k: usize,
    clients: usize,
    n: usize,
    cohort: usize,
    sigma_sq: T,
    sigma_tilde_sq: T,
) -> Result<T> {
    let rounds = shuffling::rounds_per_epoch(clients, cohort)?;
    if k == 0 || k > n * rounds {
        return Err(Error::InvalidArgument(format!(
            "prefix length {k} not in 1..={}",
            n * rounds
        )));
    }
    let k_n = k / n * n;
    let rest = k - k_n;
    let mut v = T::zero();
    if k_n > 0 {
        let w: T = frac(k_n, k);
        v = v + w.clone() * w * closed_form_variance(k_n * cohort, clients, n, sigma_sq.clone(), sigma_tilde_sq.clone())?;
    }
    if rest > 0 {
        let w: T = frac(rest, k);
        v = v + w.clone() * w * closed_form_variance(rest, clients, n, sigma_sq.clone(), sigma_tilde_sq.clone())?;
    }
    if k_n > 0 && rest > 0 {
        v = v - frac::<T>(2 * k_n * rest, k * k * (clients - 1)) * sigma_tilde_sq;
    }
    Ok(v)
}

/// Bound on `k^2` times the minibatch variance, uniform in `k`.
pub fn upper_bound_check<T: Field>(clients: usize, n: usize, cohort: usize, sigma_sq: T, sigma_tilde_sq: T) -> T {
    let n2: T = count(n * n);
    let lead = frac::<T>(clients, 2 * cohort * cohort) + count::<T>(2);
    lead * n2 * sigma_tilde_sq + frac::<T>(n, 2) * sigma_sq
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Number of equally likely outcomes the enumeration visits.
pub fn enumeration_size(clients: usize, n: usize) -> Option<u128> {
    let local = factorial(n);
    (0..clients).try_fold(factorial(clients), |acc, _| acc.checked_mul(local))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumerated<T> {
    pub mean: Vec<T>,
    pub variance: T,
    pub outcomes: u64,
}

/// Exact mean and variance of the prefix average over every client
/// permutation and every tuple of local permutations. The round grid of a
/// client permutation fixes the `C` groups, so equisized group assignments
/// are covered uniformly.
pub fn brute_force_variance<T: Field + Send + Sync>(inputs: &VarianceInputs<T>, k: usize, cohort: usize) -> Result<Enumerated<T>> {
    let clients = inputs.clients();
    let n = inputs.per_client();
    let rounds = shuffling::rounds_per_epoch(clients, cohort)?;
    if k == 0 || k > n * rounds {
        return Err(Error::InvalidArgument(format!("prefix length {k} not in 1..={}", n * rounds)));
    }
    let outcomes = enumeration_size(clients, n).unwrap_or(u128::MAX);
    if outcomes > MAX_OUTCOMES {
        return Err(Error::EnumerationTooLarge {
            outcomes,
            limit: MAX_OUTCOMES,
        });
    }
    let client_perms = all_permutations(clients);
    let local_perms = all_permutations(n);
    let grand = inputs.grand_mean();
    let d = inputs.dim();

    let partials: Vec<(Vec<T>, T)> = client_perms
        .par_iter()
        .map(|cp| {
            let mut digits = vec![0usize; clients];
            let mut sum_avg = vec![T::zero(); d];
            let mut sum_sq = T::zero();
            loop {
                let avg = prefix_average(inputs, cp, &digits, &local_perms, k, cohort);
                sum_sq = sum_sq + sq_dist(&avg, &grand);
                for (s, a) in sum_avg.iter_mut().zip(avg) {
                    *s = s.clone() + a;
                }
                // mixed-radix increment over the local permutation tuple
                let mut i = 0;
                while i < clients {
                    digits[i] += 1;
                    if digits[i] < local_perms.len() {
                        break;
                    }
                    digits[i] = 0;
                    i += 1;
                }
                if i == clients {
                    break;
                }
            }
            (sum_avg, sum_sq)
        })
        .collect();

    let total: T = T::from_u128(outcomes).expect("outcome count representable");
    let mean = (0..d)
        .map(|i| compensated_sum(partials.iter().map(|(s, _)| s[i].clone())) / total.clone())
        .collect();
    let variance = compensated_sum(partials.iter().map(|(_, q)| q.clone())) / total;
    Ok(Enumerated {
        mean,
        variance,
        outcomes: outcomes as u64,
    })
}

fn prefix_average<T: Field>(
    inputs: &VarianceInputs<T>,
    client_perm: &[usize],
    digits: &[usize],
    local_perms: &[Vec<usize>],
    k: usize,
    cohort: usize,
) -> Vec<T> {
    let n = inputs.per_client();
    let item = |group: usize, i: usize| -> &[T] {
        let m = client_perm[(i / n) * cohort + group];
        inputs.get(m, local_perms[digits[m]][i % n])
    };
    let k_n = k / n * n;
    let d = inputs.dim();
    let mut full = vec![T::zero(); d];
    for i in 0..k_n {
        for g in 0..cohort {
            for (f, v) in full.iter_mut().zip(item(g, i)) {
                *f = f.clone() + v.clone();
            }
        }
    }
    let inv_c = T::one() / count::<T>(cohort);
    let inv_k = T::one() / count::<T>(k);
    let mut out: Vec<T> = full.into_iter().map(|f| f * inv_c.clone()).collect();
    for i in k_n..k {
        for (o, v) in out.iter_mut().zip(item(0, i)) {
            *o = o.clone() + v.clone();
        }
    }
    out.into_iter().map(|v| v * inv_k.clone()).collect()
}

/// `E <zeta_{pi_a} - mean, zeta_{pi_b} - mean>` for two positions of a
/// double-shuffled sweep that fall in different client blocks, by
/// enumerating the joint law of the two draws (every ordered pair of
/// distinct clients and every pair of their items).
pub fn brute_force_cross_covariance<T: Field>(inputs: &VarianceInputs<T>) -> Result<T> {
    let clients = inputs.clients();
    let n = inputs.per_client();
    if clients < 2 {
        return Err(Error::InvalidArgument("cross-client covariance needs M >= 2".into()));
    }
    let grand = inputs.grand_mean();
    let centered = |m: usize, j: usize| -> Vec<T> {
        inputs.get(m, j).iter().zip(&grand).map(|(a, b)| a.clone() - b.clone()).collect()
    };
    let mut terms = Vec::with_capacity(clients * (clients - 1) * n * n);
    for a in 0..clients {
        for b in (0..clients).filter(|&b| b != a) {
            for j in 0..n {
                let u = centered(a, j);
                for l in 0..n {
                    let v = centered(b, l);
                    terms.push(compensated_sum(u.iter().zip(&v).map(|(x, y)| x.clone() * y.clone())));
                }
            }
        }
    }
    let len = terms.len();
    Ok(compensated_sum(terms) / count::<T>(len))
}

/// `sigma*^2 = (1/MN) sum |grad f_m^j(x*)|^2` and
/// `sigma~*^2 = (1/M) sum |grad f_m(x*)|^2`.
pub fn star_variances<S: Scalar>(p: &FederatedProblem<S>, x_star: &[S]) -> Result<(S, S)> {
    let mut comp = Vec::with_capacity(p.components());
    let mut client = Vec::with_capacity(p.clients());
    for m in 0..p.clients() {
        for j in 0..p.per_client() {
            comp.push(linalg::norm_sq(&p.component_gradient(m, j, x_star)?));
        }
        client.push(linalg::norm_sq(&p.client_gradient(m, x_star)?));
    }
    let sigma = compensated_sum(comp) / count::<S>(p.components());
    let sigma_tilde = compensated_sum(client) / count::<S>(p.clients());
    Ok((sigma, sigma_tilde))
}

/// The star-gradient vectors `grad f_m^j(x*)` as variance inputs.
pub fn star_gradient_inputs<S: Scalar>(p: &FederatedProblem<S>, x_star: &[S]) -> Result<VarianceInputs<S>> {
    let zeta = (0..p.clients())
        .map(|m| (0..p.per_client()).map(|j| p.component_gradient(m, j, x_star)).collect())
        .collect::<Result<Vec<Vec<Vec<S>>>>>()?;
    VarianceInputs::new(zeta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub k: usize,
    pub closed_form: f64,
    pub brute_force: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub clients: usize,
    pub per_client: usize,
    pub cohort: usize,
    pub rows: Vec<VarianceRow>,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Agreement rule between closed form and enumeration: relative error at
/// most `1e-10`, or absolute error at most `1e-12` for values below `1e-2`.
pub fn agrees(closed: f64, brute: f64) -> bool {
    let abs = (closed - brute).abs();
    let scale = closed.abs().max(brute.abs());
    if scale < 1e-2 {
        abs <= 1e-12 || abs <= 1e-10 * scale
    } else {
        abs <= 1e-10 * scale
    }
}

/// Closed form against enumeration for every prefix length `1..=N R`.
pub fn variance_report<T: Field + Send + Sync>(inputs: &VarianceInputs<T>, cohort: usize) -> Result<VarianceReport> {
    let clients = inputs.clients();
    let n = inputs.per_client();
    let rounds = shuffling::rounds_per_epoch(clients, cohort)?;
    let (s, st) = (inputs.sigma_sq(), inputs.sigma_tilde_sq());
    let mut rows = Vec::with_capacity(n * rounds);
    let mut max_rel = 0.0f64;
    let mut passed = true;
    for k in 1..=n * rounds {
        let closed = closed_form_minibatch_variance(k, clients, n, cohort, s.clone(), st.clone())?;
        let brute = brute_force_variance(inputs, k, cohort)?.variance;
        let (c, b) = (to_f64(&closed), to_f64(&brute));
        let abs_err = to_f64(&(closed - brute).abs());
        let rel_err = if b.abs() > 0.0 { abs_err / b.abs() } else { abs_err };
        max_rel = max_rel.max(rel_err);
        passed &= agrees(c, b);
        rows.push(VarianceRow {
            k,
            closed_form: c,
            brute_force: b,
            abs_err,
            rel_err,
        });
    }
    Ok(VarianceReport {
        clients,
        per_client: n,
        cohort,
        rows,
        max_rel_err: max_rel,
        passed,
    })
}

fn to_f64<T: Field>(v: &T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Reports for every `(M, N, C)` with `M N <= max_size` and `C | M`, on
/// random `d = 2` inputs drawn from `seed`.
pub fn verify_all(max_size: usize, seed: u64) -> Result<Vec<VarianceReport>> {
    let mut out = Vec::new();
    for clients in 1..=max_size {
        for n in 1..=max_size / clients {
            for cohort in (1..=clients).filter(|c| clients % c == 0) {
                let mut stream = rng::derive_stream(seed, "verify_variance", &[clients as u64, n as u64, cohort as u64]);
                let zeta = (0..clients)
                    .map(|_| {
                        (0..n)
                            .map(|_| (0..2).map(|_| rng::below(&mut stream, 21) as f64 / 4.0 - 2.5).collect())
                            .collect()
                    })
                    .collect();
                out.push(variance_report(&VarianceInputs::new(zeta)?, cohort)?);
            }
        }
    }
    Ok(out)
}

/// Monte-Carlo statistics of the star sequence: the algorithm run from `x*`
/// with every local gradient evaluated at `x*`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarDeviation<S> {
    pub rounds: usize,
    pub cohort: usize,
    pub per_client: usize,
    pub samples: usize,
    /// Mean `|x^{r,j+1}_{m,*} - x*|^2`, indexed by [`StarDeviation::index`].
    pub dist_sq: Vec<S>,
    /// Mean `D_{f_m^{pi_j}}(x^{r,j}_{m,*}, x*) / gamma^2`, same indexing.
    pub ds: Vec<S>,
    /// Mean `D_{f_m}(x^r_*, x*) / eta^2` with `eta = gamma N`, indexed
    /// `r * M + m` over all clients.
    pub cs: Vec<S>,
}

impl<S: Scalar> StarDeviation<S> {
    /// Position of round `r`, local step `j` and cohort slot `slot`.
    pub fn index(&self, r: usize, j: usize, slot: usize) -> usize {
        (r * self.per_client + j) * self.cohort + slot
    }

    pub fn max_dist_sq(&self) -> S {
        self.dist_sq.iter().fold(S::zero(), |a, &b| a.max(b))
    }

    pub fn max_ds(&self) -> S {
        self.ds.iter().fold(S::zero(), |a, &b| a.max(b))
    }

    pub fn max_cs(&self) -> S {
        self.cs.iter().fold(S::zero(), |a, &b| a.max(b))
    }
}

/// Averages the star sequence over `samples` independent reshuffled
/// schedules (client order and local orders redrawn per sample).
pub fn star_sequence_deviation<S: Scalar>(
    p: &FederatedProblem<S>,
    x_star: &[S],
    gamma: S,
    cohort: usize,
    samples: usize,
    seed: u64,
) -> Result<StarDeviation<S>> {
    let clients = p.clients();
    let n = p.per_client();
    let rounds = shuffling::rounds_per_epoch(clients, cohort)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let d = p.dim();
    let star_grads: Vec<Vec<Vec<S>>> = (0..clients)
        .map(|m| (0..n).map(|j| p.component_gradient(m, j, x_star)).collect())
        .collect::<Result<_>>()?;
    let eta = gamma * count::<S>(n);
    let g2 = gamma * gamma;

    let per_sample: Vec<(Vec<S>, Vec<S>, Vec<S>)> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<_> {
            let sched = shuffling::build_cohort_schedule(clients, cohort, &ClientMode::Reshuffling, s, seed)?;
            let perms = shuffling::draw_data_permutations(clients, n, DataMode::Reshuffling, s, seed);
            let mut dist = vec![S::zero(); rounds * n * cohort];
            let mut ds = vec![S::zero(); rounds * n * cohort];
            let mut cs = vec![S::zero(); rounds * clients];
            let mut server = x_star.to_vec();
            for (r, members) in sched.cohorts.iter().enumerate() {
                for m in 0..clients {
                    cs[r * clients + m] = p.client_bregman(m, &server, x_star)? / (eta * eta);
                }
                let mut next = vec![S::zero(); d];
                for (slot, &m) in members.iter().enumerate() {
                    let mut x = server.clone();
                    for (j, &item) in perms[m].iter().enumerate() {
                        let at = (r * n + j) * cohort + slot;
                        ds[at] = p.component_bregman(m, item, &x, x_star)? / g2;
                        linalg::axpy(-gamma, &star_grads[m][item], &mut x);
                        dist[at] = linalg::dist_sq(&x, x_star);
                    }
                    linalg::axpy(S::one(), &x, &mut next);
                }
                linalg::scale(S::one() / count::<S>(cohort), &mut next);
                server = next;
            }
            Ok((dist, ds, cs))
        })
        .collect::<Result<_>>()?;

    let inv = S::one() / count::<S>(samples);
    let mean = |pick: fn(&(Vec<S>, Vec<S>, Vec<S>)) -> &Vec<S>| -> Vec<S> {
        let len = pick(&per_sample[0]).len();
        (0..len)
            .map(|i| compensated_sum(per_sample.iter().map(|t| pick(t)[i])) * inv)
            .collect()
    };
    Ok(StarDeviation {
        rounds,
        cohort,
        per_client: n,
        samples,
        dist_sq: mean(|t| &t.0),
        ds: mean(|t| &t.1),
        cs: mean(|t| &t.2),
    })
}

/// Right-hand side of the star-sequence distance bound.
pub fn star_distance_bound<S: Scalar>(gamma: S, clients: usize, n: usize, cohort: usize, sigma_tilde_sq: S, sigma_sq: S) -> S {
    gamma * gamma * upper_bound_check(clients, n, cohort, sigma_sq, sigma_tilde_sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(values: &[&[f64]]) -> VarianceInputs<f64> {
        VarianceInputs::from_scalars(values.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn permutations_enumerated() {
        assert_eq!(all_permutations(3).len(), 6);
        assert_eq!(all_permutations(1), vec![vec![0]]);
        assert_eq!(all_permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(enumeration_size(2, 3), Some(72));
    }

    #[test]
    fn full_prefix_has_zero_variance() {
        for (m, n) in [(1, 3), (2, 2), (3, 1), (4, 3)] {
            assert_eq!(closed_form_variance(m * n, m, n, 1.7, 0.4).unwrap(), 0.0);
        }
        assert!(closed_form_minibatch_variance(4, 4, 2, 2, 1.0f64, 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn single_client_formula() {
        for k in 1..=5 {
            let v = closed_form_variance(k, 1, 5, 2.0, 0.0).unwrap();
            let expect = (k * (5 - k)) as f64 / ((k * k * 4) as f64) * 2.0;
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_prefix_lengths() {
        assert!(closed_form_variance(0, 2, 2, 1.0, 1.0).is_err());
        assert!(closed_form_variance(5, 2, 2, 1.0, 1.0).is_err());
        assert!(closed_form_minibatch_variance(1, 5, 2, 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn two_clients_zero_one() {
        let inputs = scalar(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let closed = closed_form_variance(2, 2, 2, inputs.sigma_sq(), inputs.sigma_tilde_sq()).unwrap();
        let brute = brute_force_variance(&inputs, 2, 1).unwrap();
        assert!((closed - brute.variance).abs() < 1e-12);
        assert!((brute.variance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn single_client_enumeration() {
        let inputs = scalar(&[&[0.0, 1.0, 2.0]]);
        let e = brute_force_variance(&inputs, 1, 1).unwrap();
        assert!((e.variance - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.outcomes, 6);
    }

    #[test]
    fn equal_inputs_have_no_variance() {
        let inputs = scalar(&[&[3.0, 3.0], &[3.0, 3.0], &[3.0, 3.0], &[3.0, 3.0]]);
        for k in 1..=4 {
            assert_eq!(brute_force_variance(&inputs, k, 2).unwrap().variance, 0.0);
        }
    }

    #[test]
    fn minibatch_example() {
        let inputs = scalar(&[&[0.3, -1.2], &[2.0, 0.7], &[-0.4, 1.1], &[0.9, -2.5]]);
        let (s, st) = (inputs.sigma_sq(), inputs.sigma_tilde_sq());
        let closed = closed_form_minibatch_variance(3, 4, 2, 2, s, st).unwrap();
        let brute = brute_force_variance(&inputs, 3, 2).unwrap().variance;
        assert!((closed - brute).abs() <= 1e-10 * brute.abs());
    }

    #[test]
    fn enumeration_guard() {
        let inputs = VarianceInputs::from_scalars(vec![vec![0.0; 4]; 5]).unwrap();
        assert!(matches!(
            brute_force_variance(&inputs, 1, 1),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn shape_is_validated() {
        assert!(VarianceInputs::<f64>::new(vec![]).is_err());
        assert!(VarianceInputs::from_scalars(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn verify_all_small_sizes() {
        let reports = verify_all(6, 3).unwrap();
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
        assert!(reports.iter().any(|r| r.cohort > 1 && r.per_client > 1));
    }

    #[test]
    fn report_is_json() {
        let r = &verify_all(2, 1).unwrap()[0];
        let s = serde_json::to_string(r).unwrap();
        let back: VarianceReport = serde_json::from_str(&s).unwrap();
        assert_eq!(&back, r);
    }
}
