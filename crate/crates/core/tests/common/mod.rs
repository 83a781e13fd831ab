#![allow(dead_code)]

use rand_distr::{Distribution, StandardNormal};
use rrcli::linalg;
use rrcli::problem::{self, HessianMode, Heterogeneity, Spectrum};
use rrcli::rng;
use rrcli::{Inputs, Optimum, Problem};

pub const SPECTRUM: Spectrum = Spectrum { mu: 0.5, l: 2.0 };

pub fn heterogeneity(client_spread: f64, component_spread: f64) -> Heterogeneity {
    Heterogeneity {
        client_spread,
        component_spread,
        hessians: HessianMode::Random,
    }
}

/// Random quadratic with its exact optimum.
pub fn quadratic(clients: usize, n: usize, d: usize, het: Heterogeneity, seed: u64) -> (Problem, Optimum) {
    let p: Problem = problem::quadratic_problem(clients, n, d, SPECTRUM, het, seed).unwrap();
    let x_star = p.quadratic_minimizer().unwrap();
    let f_star = p.objective_value(&x_star).unwrap();
    let grad_norm = linalg::norm_sq(&p.full_gradient(&x_star).unwrap()).sqrt();
    (
        p,
        Optimum {
            x_star,
            f_star,
            grad_norm,
        },
    )
}

/// Standard normal vectors `clients x n x d`.
pub fn gaussian_inputs(clients: usize, n: usize, d: usize, seed: u64) -> Inputs {
    let mut s = rng::derive_stream(seed, "test_inputs", &[clients as u64, n as u64, d as u64]);
    let zeta = (0..clients)
        .map(|_| {
            (0..n)
                .map(|_| (0..d).map(|_| StandardNormal.sample(&mut s)).collect())
                .collect()
        })
        .collect();
    Inputs::new(zeta).unwrap()
}

/// Divisors of `m`.
pub fn divisors(m: usize) -> Vec<usize> {
    (1..=m).filter(|c| m.is_multiple_of(*c)).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
