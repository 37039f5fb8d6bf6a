//! Small-ball probabilities of processes with exponentially decaying spectra.
//!
//! For eigenvalues `log theta_j ~ -B j^beta` and standardized scores whose
//! law satisfies `P(|eta| <= u) ~ u^b`, the probability that the process lies
//! in an L2 ball of radius `u` about zero behaves like `pi(u)^{1 + o(1)}` with
//!
//! ```text
//! pi(u) = exp{ -(b beta / (beta + 1)) (2 / B)^{1/beta} |log u|^{(beta + 1)/beta} }.
//! ```
//!
//! The Monte Carlo side draws `sum_j theta_j eta_j^2` with standard Gaussian
//! `eta_j` and counts how often it falls below `u^2`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Draws per independent Monte Carlo partition.
const PARTITION: usize = 1 << 16;

/// Spectrum decay `B`, decay exponent `beta` and small-ball index `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallParams {
    #[serde(rename = "B")]
    pub decay: f64,
    pub beta: f64,
    pub b: f64,
}

impl SmallBallParams {
    pub fn new(decay: f64, beta: f64, b: f64) -> Result<Self> {
        for (name, v) in [("B", decay), ("beta", beta), ("b", b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(SmallBallParams { decay, beta, b })
    }
}

/// `log pi(u)`.
pub fn log_pi_u(u: f64, p: &SmallBallParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidArgument(format!("u must lie in (0, 1), got {u}")));
    }
    let lead = p.b * p.beta / (p.beta + 1.0) * (2.0 / p.decay).powf(1.0 / p.beta);
    Ok(-lead * u.ln().abs().powf((p.beta + 1.0) / p.beta))
}

pub fn pi_u(u: f64, p: &SmallBallParams) -> Result<f64> {
    log_pi_u(u, p).map(f64::exp)
}

/// Monte Carlo estimates of `P(sum_j theta_j eta_j^2 <= u^2)` for every radius
/// in `radii`, all from the same `n_mc` draws.
///
/// Draws are split into fixed-size partitions, each with its own stream
/// derived from `(seed, partition index)`, so the result does not depend on
/// the number of worker threads.
pub fn mc_small_ball_many(eigenvalues: &[f64], n_mc: usize, radii: &[f64], seed: u64) -> Vec<f64> {
    assert!(n_mc >= 1, "n_mc must be at least 1");
    assert!(
        eigenvalues.iter().all(|&t| t > 0.0 && t.is_finite()),
        "eigenvalues must be positive"
    );
    let thresholds: Vec<f64> = radii.iter().map(|&u| if u > 0.0 { u * u } else { -1.0 }).collect();
    let partitions = n_mc.div_ceil(PARTITION);
    let counts = (0..partitions)
        .into_par_iter()
        .map(|part| {
            let mut rng = rng::stream(seed, rng::TAG_SMALL_BALL, part as u64);
            let draws = PARTITION.min(n_mc - part * PARTITION);
            let mut local = vec![0u64; thresholds.len()];
            for _ in 0..draws {
                let mut s = 0.0;
                for &theta in eigenvalues {
                    let eta: f64 = StandardNormal.sample(&mut rng);
                    s += theta * eta * eta;
                }
                for (c, &thr) in local.iter_mut().zip(&thresholds) {
                    if s <= thr {
                        *c += 1;
                    }
                }
            }
            local
        })
        .reduce(
            || vec![0u64; thresholds.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    counts.iter().map(|&c| c as f64 / n_mc as f64).collect()
}

/// Monte Carlo estimate of `P(|X| <= u)` for a centred Gaussian process with
/// the given Karhunen–Loève eigenvalues.
pub fn mc_small_ball(eigenvalues: &[f64], n_mc: usize, u: f64, seed: u64) -> f64 {
    mc_small_ball_many(eigenvalues, n_mc, &[u], seed)[0]
}

/// Exponent of the mean-square rate `h^{2 alpha}` written in terms of `log n`,
/// with the `o(1)` correction dropped.
pub fn log_rate_bound(log_n: f64, alpha: f64, p: &SmallBallParams) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if log_n.is_nan() || log_n <= 0.0 {
        return Err(Error::InvalidArgument(format!("log n must be positive, got {log_n}")));
    }
    let r = p.beta / (p.beta + 1.0);
    let lead = 2.0 * alpha * ((p.beta + 1.0) / (p.b * p.beta)).powf(r) * (p.decay / 2.0).powf(1.0 / (p.beta + 1.0));
    Ok(-lead * log_n.powf(r))
}

/// Mean-square convergence rate of the kernel regression estimator at sample
/// size `n` under the small-ball regime.
pub fn rate_bound(n: u64, alpha: f64, p: &SmallBallParams) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    log_rate_bound((n as f64).ln(), alpha, p).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(decay: f64, beta: f64, b: f64) -> SmallBallParams {
        SmallBallParams::new(decay, beta, b).unwrap()
    }

    #[test]
    fn pi_examples() {
        let v = pi_u((-1.0f64).exp(), &p(2.0, 1.0, 1.0)).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-12);
        assert!((v - 0.60653).abs() < 1e-5);
        for params in [p(2.0, 1.0, 1.0), p(0.5, 2.5, 3.0)] {
            assert!(pi_u(1.0 - 1e-9, &params).unwrap() > 1.0 - 1e-6);
        }
        let u = 0.2;
        let l1 = log_pi_u(u, &p(2.0, 1.5, 1.0)).unwrap();
        let l2 = log_pi_u(u, &p(2.0, 1.5, 2.0)).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        assert!(pi_u(0.0, &params_default()).is_err());
        assert!(pi_u(1.0, &params_default()).is_err());
    }

    fn params_default() -> SmallBallParams {
        p(2.0, 1.0, 1.0)
    }

    #[test]
    fn pi_decreases_with_radius() {
        let params = p(1.3, 0.7, 1.0);
        let mut prev = 1.0;
        for k in 1..100 {
            let u = 1.0 - k as f64 / 100.0;
            let v = pi_u(u, &params).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn mc_trivial_events() {
        let theta: Vec<f64> = (1..=5).map(|j| (-(j as f64)).exp()).collect();
        let total: f64 = theta.iter().sum();
        let big = (1e4 * total).sqrt() * 1.01;
        assert_eq!(mc_small_ball(&theta, 10_000, big, 3), 1.0);
        assert_eq!(mc_small_ball(&theta, 10_000, 0.0, 3), 0.0);
    }

    #[test]
    fn mc_is_deterministic_and_monotone() {
        let theta: Vec<f64> = (1..=10).map(|j| (-2.0 * j as f64).exp()).collect();
        let radii = [0.05, 0.1, 0.2, 0.3, 0.5];
        let a = mc_small_ball_many(&theta, 100_000, &radii, 11);
        let b = mc_small_ball_many(&theta, 100_000, &radii, 11);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a[1], mc_small_ball(&theta, 100_000, 0.1, 11));
    }

    #[test]
    fn rate_exponent_hand_value() {
        // alpha = b = beta = 1, B = 2, log n = 100: -2 * sqrt(2) * sqrt(100).
        let e = log_rate_bound(100.0, 1.0, &params_default()).unwrap();
        assert!((e + 20.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rate_decreases_in_n() {
        for params in [params_default(), p(0.5, 2.0, 1.0), p(3.0, 0.5, 2.0)] {
            let r: Vec<f64> = [100u64, 10_000, 1_000_000]
                .iter()
                .map(|&n| rate_bound(n, 0.7, &params).unwrap())
                .collect();
            assert!(r[0] > r[1] && r[1] > r[2]);
        }
        assert!(rate_bound(1, 1.0, &params_default()).is_err());
    }

    #[test]
    fn rate_is_slower_than_any_power() {
        // log(rate * n^eps) = eps log n + log rate, tracked on log scale since
        // the crossover for B = 2 and eps = 0.1 only happens near log n = 200.
        let params = params_default();
        for eps in [0.1, 0.5] {
            let v: Vec<f64> = [1e2, 1e4, 1e8]
                .iter()
                .map(|&log_n| eps * log_n + log_rate_bound(log_n, 1.0, &params).unwrap())
                .collect();
            assert!(v[0] < v[1] && v[1] < v[2], "eps {eps}: {v:?}");
            assert!(v[2] > 1e6);
        }
    }
}
