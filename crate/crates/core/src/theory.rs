//! Theoretical step sizes and the right-hand sides of the three convergence
//! theorems, with the per-round Bregman variances replaced by their
//! closed-form upper bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::StepSizes;
use crate::problem::ConvexityRegime;
use crate::scalar::{count, lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Every component strongly convex.
    Thm1,
    /// Client functions strongly convex, components convex.
    Thm2,
    /// Only the global objective strongly convex.
    Thm3,
}

impl From<ConvexityRegime> for Regime {
    fn from(c: ConvexityRegime) -> Self {
        match c {
            ConvexityRegime::ComponentStronglyConvex => Regime::Thm1,
            ConvexityRegime::ClientStronglyConvex => Regime::Thm2,
            ConvexityRegime::GlobalStronglyConvex => Regime::Thm3,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "thm1" | "1" => Ok(Regime::Thm1),
            "thm2" | "2" => Ok(Regime::Thm2),
            "thm3" | "3" => Ok(Regime::Thm3),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams<S> {
    pub regime: Regime,
    pub l: S,
    pub mu: S,
    pub clients: usize,
    /// Local steps per pass (the per-client sample count for a plain pass).
    pub per_client: usize,
    pub cohort: usize,
    pub meta_epochs: usize,
    pub sigma_star_sq: S,
    pub sigma_tilde_star_sq: S,
    pub init_dist_sq: S,
}

impl<S: Scalar> RegimeParams<S> {
    pub fn kappa(&self) -> S {
        self.l / self.mu
    }

    pub fn rounds(&self) -> usize {
        self.clients / self.cohort
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.mu > S::zero() && self.l >= self.mu && self.l.is_finite()) {
            return bad("need 0 < mu <= L");
        }
        if self.cohort == 0 || self.per_client == 0 || !self.clients.is_multiple_of(self.cohort) {
            return bad("need N >= 1 and C dividing M");
        }
        if self.sigma_star_sq < S::zero() || self.sigma_tilde_star_sq < S::zero() || self.init_dist_sq < S::zero() {
            return bad("variances and initial distance must be nonnegative");
        }
        Ok(())
    }
}

/// The largest constant steps each theorem admits.
pub fn theoretical_steps<S: Scalar>(rp: &RegimeParams<S>) -> Result<StepSizes<S>> {
    rp.validate()?;
    let n: S = count(rp.per_client);
    let r: S = count(rp.rounds());
    let l = rp.l;
    let (gamma, eta, theta) = match rp.regime {
        Regime::Thm1 => {
            let g = S::one() / l;
            (g, g * n, g * n * r)
        }
        Regime::Thm2 => {
            let e = S::one() / (lit::<S>(4.0) * l);
            let g = (S::one() / (lit::<S>(8.0) * n * l * rp.kappa().sqrt())).min(e / n);
            (g, e, e * r)
        }
        Regime::Thm3 => {
            let th = S::one() / (lit::<S>(16.0) * l);
            let e = th / r;
            (e / n, e, th)
        }
    };
    StepSizes::new(gamma, eta, theta)
}

/// Whether `steps` satisfies the theorem's step-size conditions, with a
/// relative slack of `1e-12` on the equalities.
pub fn satisfies_regime<S: Scalar>(rp: &RegimeParams<S>, steps: &StepSizes<S>) -> bool {
    let n: S = count(rp.per_client);
    let r: S = count(rp.rounds());
    let tol: S = lit(1e-12);
    let le = |a: S, b: S| a <= b * (S::one() + tol);
    let eq = |a: S, b: S| (a - b).abs() <= tol * a.abs().max(b.abs());
    let l = rp.l;
    match rp.regime {
        Regime::Thm1 => le(steps.gamma, S::one() / l) && eq(steps.eta, steps.gamma * n) && eq(steps.theta, steps.eta * r),
        Regime::Thm2 => {
            le(steps.eta, S::one() / (lit::<S>(4.0) * l))
                && le(steps.gamma, S::one() / (lit::<S>(8.0) * n * l * rp.kappa().sqrt()))
        }
        Regime::Thm3 => {
            le(steps.gamma * n * r, steps.eta * r)
                && le(steps.eta * r, steps.theta)
                && le(steps.theta, S::one() / (lit::<S>(16.0) * l))
        }
    }
}

/// Upper bound on the data-shuffling variance `max_m sigma^2_{m,DS}`.
pub fn sigma_ds_upper<S: Scalar>(l: S, clients: usize, n: usize, cohort: usize, sigma_tilde_sq: S, sigma_sq: S) -> S {
    let m: S = count(clients);
    let n: S = count(n);
    let c: S = count(cohort);
    let two: S = lit(2.0);
    l * (m * n * n / (two * c * c) + two * n * n) * sigma_tilde_sq + l * n / two * sigma_sq
}

/// Upper bound on the client-shuffling variance `max_m sigma^2_{m,CS}`.
pub fn sigma_cs_upper<S: Scalar>(l: S, clients: usize, cohort: usize, sigma_tilde_sq: S) -> S {
    let c: S = count(cohort);
    l * count::<S>(clients) / (lit::<S>(2.0) * c * c) * sigma_tilde_sq
}

/// Contraction factor per meta-epoch and the statistical (T-independent) term.
pub fn bound_terms<S: Scalar>(rp: &RegimeParams<S>, steps: &StepSizes<S>) -> Result<(S, S)> {
    rp.validate()?;
    let (g, e, th) = (steps.gamma, steps.eta, steps.theta);
    let n: S = count(rp.per_client);
    let r: S = count(rp.rounds());
    let m: S = count(rp.clients);
    let c: S = count(rp.cohort);
    let k = rp.kappa();
    let mu = rp.mu;
    let (st, s) = (rp.sigma_tilde_star_sq, rp.sigma_star_sq);
    let base_pow = |b: S, p: S| -> Result<S> {
        if b < S::zero() {
            return Err(Error::InvalidArgument("step sizes too large for the bound".into()));
        }
        Ok(b.powf(p))
    };
    Ok(match rp.regime {
        Regime::Thm1 => {
            let rho = base_pow(S::one() - g * mu, n * r)?;
            let stat = lit::<S>(2.0) * g * g / mu * sigma_ds_upper(rp.l, rp.clients, rp.per_client, rp.cohort, st, s);
            (rho, stat)
        }
        Regime::Thm2 => {
            let rho = base_pow(S::one() - e * mu, r)?;
            let twelve: S = lit(12.0);
            let stat = lit::<S>(4.0) / mu * e * e * sigma_cs_upper(rp.l, rp.clients, rp.cohort, st)
                + twelve * k * k * g * g * n * n * st
                + twelve * k * k * g * g * n * s;
            (rho, stat)
        }
        Regime::Thm3 => {
            let rho = base_pow(S::one() - th * mu / lit(2.0), S::one())?;
            let sixteen: S = lit(16.0);
            let sampling = if rp.clients == 1 {
                S::zero()
            } else {
                (m - c) / ((m - S::one()) * c)
            };
            let stat = sixteen * g * g * k * n * n * st
                + sixteen * g * g * k * n * s
                + sixteen * e * e * k / (n * n * r) * sampling * st;
            (rho, stat)
        }
    })
}

/// Right-hand side of the regime's theorem after `t` meta-epochs.
pub fn bound_rhs<S: Scalar>(rp: &RegimeParams<S>, steps: &StepSizes<S>, t: usize) -> Result<S> {
    let (rho, stat) = bound_terms(rp, steps)?;
    Ok(rho.powi(t as i32) * rp.init_dist_sq + stat)
}

/// FedAvg's theoretical local step `1 / (L_data + alpha)`.
pub fn fedavg_step<S: Scalar>(l_data: S, alpha: S) -> S {
    S::one() / (l_data + alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(regime: Regime) -> RegimeParams<f64> {
        RegimeParams {
            regime,
            l: 1.0,
            mu: 1.0,
            clients: 3,
            per_client: 2,
            cohort: 1,
            meta_epochs: 1,
            sigma_star_sq: 0.0,
            sigma_tilde_star_sq: 0.0,
            init_dist_sq: 1.0,
        }
    }

    #[test]
    fn thm1_steps() {
        let s = theoretical_steps(&params(Regime::Thm1)).unwrap();
        assert_eq!((s.gamma, s.eta, s.theta), (1.0, 2.0, 6.0));
    }

    #[test]
    fn thm2_steps() {
        let mut rp = params(Regime::Thm2);
        rp.mu = 1e-4;
        rp.per_client = 10;
        let s = theoretical_steps(&rp).unwrap();
        // 1 / (8 * 10 * 1 * 100)
        assert!((s.gamma - 1.25e-4).abs() < 1e-18);
        assert_eq!(s.eta, 0.25);
        assert!(satisfies_regime(&rp, &s));
    }

    #[test]
    fn thm3_steps() {
        let mut rp = params(Regime::Thm3);
        rp.clients = 4;
        rp.per_client = 5;
        let s = theoretical_steps(&rp).unwrap();
        assert_eq!((s.gamma, s.eta, s.theta), (1.0 / 320.0, 1.0 / 64.0, 1.0 / 16.0));
        assert!(satisfies_regime(&rp, &s));
    }

    #[test]
    fn regime_checks_reject_oversized_steps() {
        let rp = params(Regime::Thm3);
        let s = StepSizes::new(1.0, 1.0, 1.0).unwrap();
        assert!(!satisfies_regime(&rp, &s));
        let rp1 = params(Regime::Thm1);
        assert!(!satisfies_regime(&rp1, &StepSizes::new(0.5, 1.5, 3.0).unwrap()));
    }

    #[test]
    fn variance_bounds() {
        assert_eq!(sigma_ds_upper(1.0, 4, 2, 2, 0.0, 0.0), 0.0);
        assert_eq!(sigma_cs_upper(1.0, 4, 2, 0.0), 0.0);
        assert_eq!(sigma_ds_upper(1.0, 4, 2, 2, 1.0, 1.0), 11.0);
        assert_eq!(sigma_cs_upper(2.0, 4, 2, 1.0), 1.0);
    }

    #[test]
    fn homogeneous_rhs_is_contraction_only() {
        for regime in [Regime::Thm1, Regime::Thm2, Regime::Thm3] {
            let mut rp = params(regime);
            rp.mu = 0.5;
            let s = theoretical_steps(&rp).unwrap();
            let (rho, stat) = bound_terms(&rp, &s).unwrap();
            assert_eq!(stat, 0.0);
            assert!((bound_rhs(&rp, &s, 3).unwrap() - rho.powi(3)).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_thm1_by_hand() {
        // M=2, N=1, C=1, L=2, mu=1, gamma=0.25, sigma~^2 = 1, sigma^2 = 3, d0 = 4
        let rp = RegimeParams {
            regime: Regime::Thm1,
            l: 2.0,
            mu: 1.0,
            clients: 2,
            per_client: 1,
            cohort: 1,
            meta_epochs: 5,
            sigma_star_sq: 3.0,
            sigma_tilde_star_sq: 1.0,
            init_dist_sq: 4.0,
        };
        let s = StepSizes::new(0.25, 0.25, 0.5).unwrap();
        // ds bound = 2 (2/2 + 2) + 2/2 * 3 = 9; stat = 2/16 * 9 = 1.125
        // contraction (3/4)^(1*2*5) * 4
        let expect = 0.75f64.powi(10) * 4.0 + 1.125;
        assert!((bound_rhs(&rp, &s, 5).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn scalar_thm3_by_hand() {
        let rp = RegimeParams {
            regime: Regime::Thm3,
            l: 1.0,
            mu: 0.5,
            clients: 2,
            per_client: 1,
            cohort: 1,
            meta_epochs: 1,
            sigma_star_sq: 1.0,
            sigma_tilde_star_sq: 1.0,
            init_dist_sq: 1.0,
        };
        let s = StepSizes::new(0.01, 0.02, 0.05).unwrap();
        // 16 g^2 k (N^2 + N) + 16 e^2 k/(N^2 R) (M-C)/((M-1)C)
        let stat = 16.0 * 1e-4 * 2.0 * 2.0 + 16.0 * 4e-4 * 2.0 / 2.0;
        let expect = (1.0 - 0.0125f64).powi(2) + stat;
        assert!((bound_rhs(&rp, &s, 2).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn rhs_monotone_in_t_and_variances() {
        for regime in [Regime::Thm1, Regime::Thm2, Regime::Thm3] {
            let mut rp = params(regime);
            rp.mu = 0.2;
            rp.sigma_star_sq = 0.5;
            rp.sigma_tilde_star_sq = 0.3;
            let s = theoretical_steps(&rp).unwrap();
            let mut prev = f64::INFINITY;
            for t in 0..50 {
                let v = bound_rhs(&rp, &s, t).unwrap();
                assert!(v <= prev);
                prev = v;
            }
            let (_, stat) = bound_terms(&rp, &s).unwrap();
            assert!((bound_rhs(&rp, &s, 100_000).unwrap() - stat).abs() < 1e-12);
            let base = bound_rhs(&rp, &s, 3).unwrap();
            let mut more = rp;
            more.sigma_star_sq *= 2.0;
            assert!(bound_rhs(&more, &s, 3).unwrap() >= base);
            let mut more = rp;
            more.sigma_tilde_star_sq *= 2.0;
            assert!(bound_rhs(&more, &s, 3).unwrap() >= base);
        }
    }

    #[test]
    fn full_participation_thm3_has_no_sampling_term() {
        let mut rp = params(Regime::Thm3);
        rp.clients = 1;
        rp.sigma_tilde_star_sq = 1.0;
        let s = theoretical_steps(&rp).unwrap();
        let (_, stat) = bound_terms(&rp, &s).unwrap();
        let g = s.gamma;
        assert!((stat - 16.0 * g * g * 4.0).abs() < 1e-15);
    }
}
