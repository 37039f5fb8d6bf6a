//! Small numeric helpers shared by the estimators.

use rayon::prelude::*;

use crate::fpca::Sample;

/// Linear-interpolation quantile of unsorted data, `q` in [0, 1].
///
/// Returns `None` for empty input.
pub fn quantile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let q = q.clamp(0.0, 1.0);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + frac * (v[hi] - v[lo]))
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Population variance (divisor `n`).
pub fn variance(data: &[f64]) -> f64 {
    let mu = mean(data);
    data.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / data.len() as f64
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5).unwrap_or(f64::NAN)
}

/// Symmetric `n x n` matrix of L2 distances between sample curves, row-major.
pub fn pairwise_distances(sample: &Sample) -> Vec<f64> {
    let n = sample.len();
    let grid = sample.grid();
    let curves = sample.curves();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|k| grid.dist_sq(curves[i].values(), curves[k].values()).max(0.0).sqrt())
                .collect()
        })
        .collect();
    let mut out = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (off, &d) in row.iter().enumerate() {
            let k = i + 1 + off;
            out[i * n + k] = d;
            out[k * n + i] = d;
        }
    }
    out
}
