//! Nadaraya–Watson regression of a scalar response on a curve, with compactly
//! supported kernels of the L2 distance and leave-one-out bandwidth selection.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::Sample;
use crate::function_space::{same_grid, Curve};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Uniform,
    Triangular,
    Quadratic,
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(KernelFamily::Uniform),
            "triangular" => Ok(KernelFamily::Triangular),
            "quadratic" => Ok(KernelFamily::Quadratic),
            other => Err(Error::InvalidArgument(format!("unknown kernel family '{other}'"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelFamily::Uniform => "uniform",
            KernelFamily::Triangular => "triangular",
            KernelFamily::Quadratic => "quadratic",
        };
        f.write_str(s)
    }
}

/// A nonincreasing kernel on `[0, c]`, zero beyond `c`, with `K(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub support_c: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::Quadratic,
            support_c: 1.0,
        }
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, support_c: f64) -> Result<Self> {
        if !(support_c > 0.0 && support_c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel support must be positive, got {support_c}"
            )));
        }
        Ok(KernelSpec { family, support_c })
    }

    /// Kernel value for a nonnegative argument; callers guarantee `u >= 0`.
    #[inline]
    pub(crate) fn weight(&self, u: f64) -> f64 {
        let c = self.support_c;
        match self.family {
            KernelFamily::Uniform => {
                if u <= c {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Triangular => (1.0 - u / c).max(0.0),
            KernelFamily::Quadratic => {
                let r = u / c;
                (1.0 - r * r).max(0.0)
            }
        }
    }
}

pub fn kernel_eval(kernel: &KernelSpec, u: f64) -> Result<f64> {
    if u < 0.0 || u.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "kernel argument must be nonnegative, got {u}"
        )));
    }
    Ok(kernel.weight(u))
}

/// A sample with responses, a kernel and a bandwidth.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub sample: Sample,
    pub responses: Vec<f64>,
    pub kernel: KernelSpec,
    pub bandwidth: f64,
}

impl RegressionFit {
    pub fn new(sample: Sample, responses: Vec<f64>, kernel: KernelSpec, bandwidth: f64) -> Result<Self> {
        check_responses(&sample, &responses)?;
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(RegressionFit {
            sample,
            responses,
            kernel,
            bandwidth,
        })
    }
}

pub(crate) fn check_responses(sample: &Sample, responses: &[f64]) -> Result<()> {
    if responses.len() != sample.len() {
        return Err(Error::InvalidArgument(format!(
            "{} responses for {} curves",
            responses.len(),
            sample.len()
        )));
    }
    if responses.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("responses must be finite".into()));
    }
    Ok(())
}

/// Kernel-weighted average of the responses around `x`.
pub fn nw_estimate(fit: &RegressionFit, x: &Curve) -> Result<f64> {
    if !same_grid(fit.sample.grid(), x.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = fit.sample.grid();
    let mut num = 0.0;
    let mut den = 0.0;
    for (curve, y) in fit.sample.curves().iter().zip(&fit.responses) {
        let d = grid.dist_sq(x.values(), curve.values()).max(0.0).sqrt();
        let w = fit.kernel.weight(d / fit.bandwidth);
        if w > 0.0 {
            num += w * y;
            den += w;
        }
    }
    if den <= 0.0 {
        return Err(Error::EmptyNeighborhood);
    }
    Ok(num / den)
}

/// Leave-one-out squared prediction error for one bandwidth.
///
/// `distances` is the row-major `n x n` distance matrix of the sample. Curves
/// with an empty leave-one-out neighborhood contribute `penalty`.
pub fn cv_score(distances: &[f64], responses: &[f64], kernel: &KernelSpec, h: f64, penalty: f64) -> f64 {
    let n = responses.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = &distances[i * n..(i + 1) * n];
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, (&d, &y)) in row.iter().zip(responses).enumerate() {
            if k == i {
                continue;
            }
            let w = kernel.weight(d / h);
            if w > 0.0 {
                num += w * y;
                den += w;
            }
        }
        total += if den > 0.0 {
            let r = responses[i] - num / den;
            r * r
        } else {
            penalty
        };
    }
    total
}

/// Candidate bandwidth minimising the leave-one-out error; ties go to the
/// smaller bandwidth.
pub fn cv_bandwidth(sample: &Sample, responses: &[f64], kernel: &KernelSpec, candidates: &[f64]) -> Result<f64> {
    check_responses(sample, responses)?;
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate bandwidths".into()));
    }
    if candidates.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("candidate bandwidths must be positive".into()));
    }
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let distances = stats::pairwise_distances(sample);
    let penalty = stats::variance(responses);
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scores: Vec<f64> = sorted
        .par_iter()
        .map(|&h| cv_score(&distances, responses, kernel, h, penalty))
        .collect();
    let mut best = 0;
    for (k, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = k;
        }
    }
    Ok(sorted[best])
}

/// Ten log-spaced bandwidths between the 1st and 50th percentiles of the
/// pairwise curve distances.
pub fn default_candidates(sample: &Sample) -> Result<Vec<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let distances = stats::pairwise_distances(sample);
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in i + 1..n {
            upper.push(distances[i * n + k]);
        }
    }
    let positive: Vec<f64> = upper.iter().copied().filter(|&d| d > 0.0).collect();
    let Some(&min_positive) = positive.iter().min_by(|a, b| a.total_cmp(b)) else {
        return Err(Error::InvalidArgument("all curves coincide".into()));
    };
    let lo = stats::quantile(&upper, 0.01).unwrap().max(min_positive);
    let hi = stats::quantile(&upper, 0.5).unwrap().max(lo);
    Ok(log_spaced(lo, hi, 10))
}

pub(crate) fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 || hi <= lo {
        return vec![lo; 1];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}
