//! Curves on a shared grid over [0, 1] with trapezoid-rule L2 geometry.
//!
//! Every curve holds an `Arc<Grid>`. Binary operations require both operands
//! to sit on the same grid (same `Arc`, or identical abscissae) and fail with
//! [`Error::GridMismatch`] otherwise.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Abscissae in [0, 1] together with composite trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Arc<Self>> {
        let m = points.len();
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite abscissa".into()));
        }
        if points[0] < 0.0 || points[m - 1] > 1.0 {
            return Err(Error::InvalidGrid(format!(
                "points must lie in [0, 1], got [{}, {}]",
                points[0],
                points[m - 1]
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points must be strictly increasing".into()));
        }
        let mut weights = vec![0.0; m];
        weights[0] = 0.5 * (points[1] - points[0]);
        weights[m - 1] = 0.5 * (points[m - 1] - points[m - 2]);
        for k in 1..m - 1 {
            weights[k] = 0.5 * (points[k + 1] - points[k - 1]);
        }
        Ok(Arc::new(Grid { points, weights }))
    }

    /// `m` equally spaced points from 0 to 1 inclusive.
    pub fn uniform(m: usize) -> Result<Arc<Self>> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        let step = 1.0 / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|k| k as f64 * step).collect();
        points[m - 1] = 1.0;
        Grid::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature approximation of the integral of sampled values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted dot product `sum_k w_k a_k b_k` on raw value slices.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * (x * y))
            .sum()
    }

    /// Squared L2 distance between two raw value slices.
    pub fn dist_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| {
                let d = x - y;
                w * d * d
            })
            .sum()
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// A function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for Curve {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidCurve(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite value at index {k}")));
        }
        Ok(Curve { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let m = grid.len();
        Curve {
            grid,
            values: vec![0.0; m],
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let m = grid.len();
        Curve {
            grid,
            values: vec![c; m],
        }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scale(&self, a: f64) -> Curve {
        Curve {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        axpy(1.0, other, self)
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub(crate) fn check_grid(&self, other: &Curve) -> Result<()> {
        if same_grid(&self.grid, &other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Trapezoid approximation of the integral of `f * g`.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    f.check_grid(g)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

pub fn l2_norm(f: &Curve) -> f64 {
    f.grid.dot(&f.values, &f.values).max(0.0).sqrt()
}

/// Pointwise `a * x + y`.
pub fn axpy(a: f64, x: &Curve, y: &Curve) -> Result<Curve> {
    x.check_grid(y)?;
    let values = x.values.iter().zip(&y.values).map(|(xv, yv)| a * xv + yv).collect();
    Ok(Curve {
        grid: Arc::clone(&y.grid),
        values,
    })
}
