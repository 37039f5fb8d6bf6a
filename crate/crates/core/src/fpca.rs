//! Functional principal component analysis on a common grid.
//!
//! The covariance surface is estimated with divisor `n`. Its integral operator
//! is discretised with the grid's trapezoid weights `W` and diagonalised through
//! the symmetric matrix `W^{1/2} V W^{1/2}`; eigenvectors are mapped back with
//! `W^{-1/2}`, so the returned eigenfunctions are orthonormal in L2 rather than
//! in Euclidean coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::function_space::{same_grid, Curve, Grid};

/// Eigenvalues in `(-EIGEN_CLAMP * scale, 0)` are treated as rounding noise.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// `|integral of psi|` at or below this uses the max-abs sign fallback.
pub const SIGN_INTEGRAL_TOL: f64 = 1e-10;
pub const DEFAULT_FVE: f64 = 0.995;

/// Curves observed on one shared grid.
#[derive(Debug, Clone)]
pub struct Sample {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
    ids: Option<Vec<String>>,
    time_range: Option<(f64, f64)>,
}

impl Sample {
    pub fn new(grid: Arc<Grid>, curves: Vec<Curve>) -> Result<Self> {
        if curves.iter().any(|c| !same_grid(&grid, c.grid())) {
            return Err(Error::GridMismatch);
        }
        Ok(Sample {
            grid,
            curves,
            ids: None,
            time_range: None,
        })
    }

    /// Builds curves from raw value rows, one row per curve.
    pub fn from_rows(grid: Arc<Grid>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let curves = rows
            .into_iter()
            .map(|r| Curve::new(Arc::clone(&grid), r))
            .collect::<Result<Vec<_>>>()?;
        Sample::new(grid, curves)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.curves.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ids for {} curves",
                ids.len(),
                self.curves.len()
            )));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    /// Records the original time range that was mapped onto the grid's [0, 1].
    pub fn with_time_range(mut self, range: (f64, f64)) -> Self {
        self.time_range = Some(range);
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Label of curve `i`: its id when present, else its 1-based index.
    pub fn label(&self, i: usize) -> String {
        match &self.ids {
            Some(ids) => ids[i].clone(),
            None => (i + 1).to_string(),
        }
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        self.time_range
    }
}

/// Eigenvalues and L2-orthonormal eigenfunctions of a covariance operator.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Curve>,
    /// Sum of all (clamped) eigenvalues, i.e. the operator trace.
    pub total_variance: f64,
}

/// Mean, spectrum, eigenfunctions and scores of a sample.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub mean: Curve,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Curve>,
    /// `scores[i][j]` is the score of curve `i` on component `j`.
    pub scores: Vec<Vec<f64>>,
    /// Cumulative fraction of variance explained by the first `j + 1` components.
    pub fve: Vec<f64>,
    pub total_variance: f64,
}

impl EigenSystem {
    pub fn components(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.mean.grid()
    }

    /// Keeps the leading `k` components.
    pub fn truncate(&mut self, k: usize) {
        let k = k.min(self.components());
        self.eigenvalues.truncate(k);
        self.eigenfunctions.truncate(k);
        self.fve.truncate(k);
        for row in &mut self.scores {
            row.truncate(k);
        }
    }

    /// Negates eigenfunction `j` and its score column.
    pub fn flip_sign(&mut self, j: usize) {
        self.eigenfunctions[j] = self.eigenfunctions[j].scale(-1.0);
        for row in &mut self.scores {
            row[j] = -row[j];
        }
    }
}

/// How many components an FPCA fit keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentRule {
    /// Smallest count reaching this cumulative fraction of variance.
    Fve(f64),
    Fixed(usize),
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::Fve(DEFAULT_FVE)
    }
}

pub fn mean_function(sample: &Sample) -> Result<Curve> {
    let n = sample.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let m = sample.grid.len();
    let mut acc = vec![0.0; m];
    for c in &sample.curves {
        for (a, v) in acc.iter_mut().zip(c.values()) {
            *a += v;
        }
    }
    let inv = 1.0 / n as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Curve::new(Arc::clone(&sample.grid), acc)
}

/// Covariance surface on the grid, divisor `n`.
pub fn empirical_covariance(sample: &Sample) -> Result<DMatrix<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let mean = mean_function(sample)?;
    let m = sample.grid.len();
    let centered = DMatrix::from_fn(n, m, |i, k| sample.curves[i].values()[k] - mean.values()[k]);
    let mut cov = centered.transpose() * &centered;
    cov /= n as f64;
    // Exact symmetry regardless of summation order inside the product.
    for k in 0..m {
        for l in 0..k {
            let v = 0.5 * (cov[(k, l)] + cov[(l, k)]);
            cov[(k, l)] = v;
            cov[(l, k)] = v;
        }
    }
    Ok(cov)
}

/// Orients `values` so its integral is positive, falling back to a positive
/// largest-magnitude entry when the integral is numerically zero.
fn orient(grid: &Grid, values: &mut [f64]) {
    let integral = grid.integrate(values);
    let flip = if integral.abs() > SIGN_INTEGRAL_TOL {
        integral < 0.0
    } else {
        let mut best = 0usize;
        for (k, v) in values.iter().enumerate() {
            if v.abs() > values[best].abs() {
                best = k;
            }
        }
        values[best] < 0.0
    };
    if flip {
        values.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Eigendecomposition of the integral operator with kernel `cov` under the
/// grid quadrature, keeping at most `max_components` leading pairs.
pub fn eigendecompose(cov: &DMatrix<f64>, grid: &Arc<Grid>, max_components: usize) -> Result<EigenPairs> {
    let m = grid.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(Error::InvalidArgument(format!(
            "covariance is {}x{}, grid has {m} points",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if max_components > m {
        return Err(Error::InvalidArgument(format!(
            "max_components {max_components} exceeds grid size {m}"
        )));
    }
    let scale = cov.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut asym = 0.0f64;
    for k in 0..m {
        for l in 0..k {
            asym = asym.max((cov[(k, l)] - cov[(l, k)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::AsymmetricMatrix(asym));
    }

    let sqrt_w: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let sym = DMatrix::from_fn(m, m, |k, l| 0.5 * (cov[(k, l)] + cov[(l, k)]) * sqrt_w[k] * sqrt_w[l]);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].abs().max(1.0);
    let mut all = Vec::with_capacity(m);
    for &idx in &order {
        let lambda = eig.eigenvalues[idx];
        if lambda < -EIGEN_CLAMP * top {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        all.push(lambda.max(0.0));
    }
    let total_variance: f64 = all.iter().sum();

    let mut eigenfunctions = Vec::with_capacity(max_components);
    for &idx in order.iter().take(max_components) {
        let col = eig.eigenvectors.column(idx);
        let mut values: Vec<f64> = col.iter().zip(&sqrt_w).map(|(v, s)| v / s).collect();
        orient(grid, &mut values);
        eigenfunctions.push(Curve::new(Arc::clone(grid), values)?);
    }
    all.truncate(max_components);
    Ok(EigenPairs {
        eigenvalues: all,
        eigenfunctions,
        total_variance,
    })
}

/// Scores of each centred curve on each eigenfunction, as an `n x K` table.
pub fn scores(sample: &Sample, mean: &Curve, eigenfunctions: &[Curve]) -> Result<Vec<Vec<f64>>> {
    if !same_grid(sample.grid(), mean.grid()) {
        return Err(Error::GridMismatch);
    }
    for psi in eigenfunctions {
        if !same_grid(sample.grid(), psi.grid()) {
            return Err(Error::GridMismatch);
        }
    }
    let grid = sample.grid();
    let mut centered = vec![0.0; grid.len()];
    Ok(sample
        .curves()
        .iter()
        .map(|c| {
            for ((dst, x), mu) in centered.iter_mut().zip(c.values()).zip(mean.values()) {
                *dst = x - mu;
            }
            eigenfunctions
                .iter()
                .map(|psi| grid.dot(&centered, psi.values()))
                .collect()
        })
        .collect())
}

/// Smallest `K` whose cumulative eigenvalue share reaches `threshold`.
pub fn select_components(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "FVE threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "eigenvalues must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let mut cum = 0.0;
    for (k, v) in eigenvalues.iter().enumerate() {
        cum += v;
        // Absorb rounding in the running sum, e.g. 78.9 + 17 + 3.6 vs 99.5.
        if cum / total >= threshold - 1e-12 {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

fn cumulative_fve(eigenvalues: &[f64], total: f64) -> Vec<f64> {
    let mut cum = 0.0;
    eigenvalues
        .iter()
        .map(|v| {
            cum += v;
            if total > 0.0 {
                (cum / total).min(1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Full FPCA: mean, covariance, spectrum, component selection and scores.
pub fn fit(sample: &Sample, rule: ComponentRule) -> Result<EigenSystem> {
    let mean = mean_function(sample)?;
    let cov = empirical_covariance(sample)?;
    let m = sample.grid().len();
    let pairs = eigendecompose(&cov, sample.grid(), m)?;
    let k = match rule {
        ComponentRule::Fve(t) => select_components(&pairs.eigenvalues, t)?,
        ComponentRule::Fixed(k) => {
            if k == 0 || k > m {
                return Err(Error::InvalidArgument(format!(
                    "component count must lie in 1..={m}, got {k}"
                )));
            }
            k
        }
    };
    let eigenvalues = pairs.eigenvalues[..k].to_vec();
    let eigenfunctions = pairs.eigenfunctions[..k].to_vec();
    let fve = cumulative_fve(&eigenvalues, pairs.total_variance);
    let scores = scores(sample, &mean, &eigenfunctions)?;
    Ok(EigenSystem {
        mean,
        eigenvalues,
        eigenfunctions,
        scores,
        fve,
        total_variance: pairs.total_variance,
    })
}
