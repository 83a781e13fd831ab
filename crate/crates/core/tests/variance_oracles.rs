mod common;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rrcli::variance_lab::{self as vl, VarianceInputs};

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn scalar_inputs(values: &[&[i64]]) -> VarianceInputs<BigRational> {
    VarianceInputs::from_scalars(values.iter().map(|c| c.iter().map(|&v| q(v, 1)).collect()).collect()).unwrap()
}

#[test]
fn two_by_two_zero_one_matches_closed_form_exactly() {
    let inputs = scalar_inputs(&[&[0, 0], &[1, 1]]);
    let (s2, st2) = (inputs.sigma_sq(), inputs.sigma_tilde_sq());
    assert_eq!(s2, q(1, 4));
    assert_eq!(st2, q(1, 4));
    let brute = vl::brute_force_variance(&inputs, 2, 1).unwrap();
    assert_eq!(brute.variance, vl::closed_form_variance(2, 2, 2, s2, st2).unwrap());
    assert_eq!(brute.variance, q(1, 4));
}

#[test]
fn single_client_of_three_values() {
    let inputs = scalar_inputs(&[&[0, 1, 2]]);
    let brute = vl::brute_force_variance(&inputs, 1, 1).unwrap();
    assert_eq!(brute.variance, q(2, 3));
    assert_eq!(brute.outcomes, 6);
}

#[test]
fn minibatch_example_exact() {
    let inputs = scalar_inputs(&[&[3, -1], &[0, 2], &[5, 5], &[-4, 1]]);
    let (s2, st2) = (inputs.sigma_sq(), inputs.sigma_tilde_sq());
    let brute = vl::brute_force_variance(&inputs, 3, 2).unwrap().variance;
    assert_eq!(brute, vl::closed_form_minibatch_variance(3, 4, 2, 2, s2, st2).unwrap());
}

#[test]
fn prefix_average_is_unbiased() {
    let inputs = scalar_inputs(&[&[3, -1, 4], &[0, 2, 7], &[5, 5, -6]]);
    let grand = inputs.grand_mean();
    for c in [1, 3] {
        for k in 1..=3 * 3 / c {
            assert_eq!(vl::brute_force_variance(&inputs, k, c).unwrap().mean, grand, "k={k} C={c}");
        }
    }
}

#[test]
fn cross_client_covariance_is_minus_sigma_tilde_over_m_minus_one() {
    for (m, n, seed) in [(2, 1, 0u64), (2, 3, 1), (3, 2, 2), (4, 2, 3), (5, 1, 4)] {
        let inputs = common::gaussian_inputs(m, n, 2, seed);
        let cov = vl::brute_force_cross_covariance(&inputs).unwrap();
        let expected = -inputs.sigma_tilde_sq() / (m - 1) as f64;
        assert!((cov - expected).abs() <= 1e-12 * expected.abs().max(1.0), "M={m} N={n}: {cov} vs {expected}");
    }
}

#[test]
fn minibatch_with_one_cohort_member_is_the_plain_variance() {
    for (m, n) in [(2, 3), (3, 2), (5, 1), (1, 5)] {
        for k in 1..=m * n {
            let a = vl::closed_form_minibatch_variance(k, m, n, 1, 1.3f64, 0.7).unwrap();
            let b = vl::closed_form_variance(k, m, n, 1.3, 0.7).unwrap();
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0), "k={k}: {a} vs {b}");
        }
    }
}

#[test]
fn star_sequence_scales_with_gamma_squared() {
    let (p, opt) = common::quadratic(4, 3, 2, common::heterogeneity(1.0, 0.5), 4);
    let a = vl::star_sequence_deviation(&p, &opt.x_star, 0.125, 2, 64, 9).unwrap();
    let b = vl::star_sequence_deviation(&p, &opt.x_star, 0.25, 2, 64, 9).unwrap();
    for (x, y) in a.dist_sq.iter().zip(&b.dist_sq) {
        assert!((4.0 * x - y).abs() <= 1e-12 * y.abs());
    }
}

#[test]
fn star_sequence_vanishes_on_homogeneous_zero_gradients() {
    let (p, opt) = common::quadratic(4, 3, 2, common::heterogeneity(0.0, 0.0), 4);
    let dev = vl::star_sequence_deviation(&p, &opt.x_star, 0.3, 2, 16, 1).unwrap();
    assert!(dev.max_dist_sq() <= 1e-28);
    assert!(dev.max_ds() <= 1e-24);
    assert!(dev.max_cs() <= 1e-24);
}

/// `k^2` times the variance of `r` cohort-averaged rounds followed by the
/// first `rest` items of one further client, unaveraged.
fn star_prefix(r: usize, rest: usize, m: usize, n: usize, c: usize, s2: f64, st2: f64) -> f64 {
    let full = r * n;
    let mut v = 0.0;
    if full > 0 {
        v += (full * full) as f64 * vl::closed_form_variance(full * c, m, n, s2, st2).unwrap();
        v -= (2 * full * rest) as f64 / (m - 1) as f64 * st2;
    }
    v + (rest * rest) as f64 * vl::closed_form_variance(rest, m, n, s2, st2).unwrap()
}

#[test]
fn star_sequence_mean_tracks_exact_expectation() {
    let (p, opt) = common::quadratic(4, 3, 2, common::heterogeneity(1.0, 1.0), 8);
    let (s2, st2) = vl::star_variances(&p, &opt.x_star).unwrap();
    let gamma = 0.1;
    let (m, n, c) = (4usize, 3usize, 2usize);
    let dev = vl::star_sequence_deviation(&p, &opt.x_star, gamma, c, 40_000, 3).unwrap();
    let bound = vl::star_distance_bound(gamma, m, n, c, st2, s2);
    for r in 0..m / c {
        for j in 0..n {
            let exact = gamma * gamma * star_prefix(r, j + 1, m, n, c, s2, st2);
            if j + 1 < n {
                let k = r * n + j + 1;
                let mb = gamma * gamma * (k * k) as f64 * vl::closed_form_minibatch_variance(k, m, n, c, s2, st2).unwrap();
                assert!((mb - exact).abs() <= 1e-12 * exact);
            }
            let mean: f64 = (0..c).map(|s| dev.dist_sq[dev.index(r, j, s)]).sum::<f64>() / c as f64;
            assert!((mean - exact).abs() <= 0.05 * exact, "r={r} j={j}: {mean} vs {exact}");
            assert!(exact <= bound);
        }
    }
}

proptest! {
    #[test]
    fn closed_forms_are_nonnegative_and_bounded(
        m in 1usize..10, n in 1usize..8, c_pick in 0usize..10, s2 in 0.0f64..5.0, st2 in 0.0f64..5.0,
    ) {
        let divs = common::divisors(m);
        let c = divs[c_pick % divs.len()];
        let bound = vl::upper_bound_check(m, n, c, s2, st2);
        for k in 1..=n * (m / c) {
            let v = vl::closed_form_minibatch_variance(k, m, n, c, s2, st2).unwrap();
            prop_assert!(v >= -1e-12 * (s2 + st2).max(1.0));
            prop_assert!((k * k) as f64 * v <= bound + 1e-12);
        }
        let last = vl::closed_form_minibatch_variance(n * (m / c), m, n, c, s2, st2).unwrap();
        prop_assert!(last.abs() <= 1e-12 * (s2 + st2).max(1.0));
    }

    #[test]
    fn enumeration_agrees_on_random_small_inputs(m in 1usize..4, n in 1usize..4, seed in any::<u64>()) {
        let inputs = common::gaussian_inputs(m, n, 2, seed);
        let report = vl::variance_report(&inputs, 1).unwrap();
        prop_assert!(report.passed, "{report:?}");
    }

    #[test]
    fn population_sums_match_definitions(m in 1usize..5, n in 1usize..5, seed in any::<u64>()) {
        let inputs = common::gaussian_inputs(m, n, 3, seed);
        let g = inputs.grand_mean();
        let mut s2 = 0.0;
        for a in 0..m {
            for j in 0..n {
                s2 += inputs.get(a, j).iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
            }
        }
        s2 /= (m * n) as f64;
        let st2 = inputs
            .client_means()
            .iter()
            .map(|c| c.iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .sum::<f64>()
            / m as f64;
        prop_assert!((inputs.sigma_sq() - s2).abs() <= 1e-14 * s2.max(1.0));
        prop_assert!((inputs.sigma_tilde_sq() - st2).abs() <= 1e-14 * st2.max(1.0));
        prop_assert!(inputs.sigma_tilde_sq() <= inputs.sigma_sq() + 1e-14);
    }
}
