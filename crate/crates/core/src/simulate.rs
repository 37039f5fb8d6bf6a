//! Synthetic functional regression data with known ground truth.
//!
//! Curves are drawn from a finite Karhunen–Loève expansion on the Fourier
//! basis; responses come from functionals whose derivatives are known in
//! closed form.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::Sample;
use crate::function_space::{inner_product, same_grid, Curve, Grid};
use crate::rng;

/// Fourier basis `1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), sqrt2 sin(4 pi t), ...`.
pub fn fourier_basis(grid: &Arc<Grid>, count: usize) -> Vec<Curve> {
    (1..=count)
        .map(|j| {
            if j == 1 {
                Curve::constant(Arc::clone(grid), 1.0)
            } else {
                let k = (j / 2) as f64;
                let w = 2.0 * std::f64::consts::PI * k;
                if j % 2 == 0 {
                    Curve::from_fn(Arc::clone(grid), |t| std::f64::consts::SQRT_2 * (w * t).sin())
                } else {
                    Curve::from_fn(Arc::clone(grid), |t| std::f64::consts::SQRT_2 * (w * t).cos())
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDist {
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]`, unit variance.
    UniformSymmetric,
}

impl ScoreDist {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ScoreDist::Gaussian => StandardNormal.sample(rng),
            ScoreDist::UniformSymmetric => {
                let r3 = 3f64.sqrt();
                rng.random_range(-r3..r3)
            }
        }
    }
}

/// Named eigenvalue families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EigenPreset {
    /// `theta_j = exp(-B j^beta)`.
    Exponential { decay: f64, beta: f64 },
    /// `theta_j = j^{-a}`.
    Polynomial { a: f64 },
}

impl EigenPreset {
    /// Parses names such as `expdecay-b2-beta1` or `poly-a2`.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown preset '{name}'"));
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite());
        if let Some(rest) = name.strip_prefix("expdecay-b") {
            let (decay, beta) = rest.split_once("-beta").ok_or_else(bad)?;
            Ok(EigenPreset::Exponential {
                decay: num(decay).ok_or_else(bad)?,
                beta: num(beta).ok_or_else(bad)?,
            })
        } else if let Some(a) = name.strip_prefix("poly-a") {
            Ok(EigenPreset::Polynomial {
                a: num(a).ok_or_else(bad)?,
            })
        } else {
            Err(bad())
        }
    }

    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        (1..=count)
            .map(|j| {
                let j = j as f64;
                match *self {
                    EigenPreset::Exponential { decay, beta } => (-decay * j.powf(beta)).exp(),
                    EigenPreset::Polynomial { a } => j.powf(-a),
                }
            })
            .collect()
    }
}

/// A finite Karhunen–Loève process on the Fourier basis.
#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub eigenvalues: Vec<f64>,
    pub mean: Curve,
    pub score_dist: ScoreDist,
    basis: Vec<Curve>,
}

impl ProcessSpec {
    pub fn new(eigenvalues: Vec<f64>, mean: Curve, score_dist: ScoreDist) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidArgument("process needs at least one eigenvalue".into()));
        }
        if eigenvalues.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("eigenvalues must be descending".into()));
        }
        let basis = fourier_basis(mean.grid(), eigenvalues.len());
        for (a, fa) in basis.iter().enumerate() {
            for (b, fb) in basis.iter().enumerate().skip(a) {
                let ip = inner_product(fa, fb)?;
                let target = if a == b { 1.0 } else { 0.0 };
                if (ip - target).abs() > 1e-6 {
                    return Err(Error::InvalidGrid(format!(
                        "Fourier basis elements {} and {} not orthonormal on this grid ({ip:.3e})",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
        Ok(ProcessSpec {
            eigenvalues,
            mean,
            score_dist,
            basis,
        })
    }

    /// Zero-mean Gaussian process from a named preset with `k_true` terms.
    pub fn from_preset(name: &str, grid: &Arc<Grid>, k_true: usize) -> Result<Self> {
        let preset = EigenPreset::parse(name)?;
        ProcessSpec::new(
            preset.eigenvalues(k_true),
            Curve::zeros(Arc::clone(grid)),
            ScoreDist::Gaussian,
        )
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.mean.grid()
    }

    pub fn basis(&self) -> &[Curve] {
        &self.basis
    }

    pub fn k_true(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coordinates `int (x - mean) phi_j` of `x` on the process basis.
    pub fn coordinates(&self, x: &Curve) -> Result<Vec<f64>> {
        let centered = x.sub(&self.mean)?;
        self.basis.iter().map(|phi| inner_product(&centered, phi)).collect()
    }
}

/// Curves drawn from the process, with their true scores `sqrt(theta_j) eta_ij`.
pub fn sample_process_with_scores(spec: &ProcessSpec, n: usize, seed: u64) -> Result<(Sample, Vec<Vec<f64>>)> {
    let grid = Arc::clone(spec.grid());
    let sd: Vec<f64> = spec.eigenvalues.iter().map(|t| t.sqrt()).collect();
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, rng::TAG_PROCESS, i as u64);
            let mut values = spec.mean.values().to_vec();
            let mut scores = Vec::with_capacity(sd.len());
            for (s, phi) in sd.iter().zip(&spec.basis) {
                let xi = s * spec.score_dist.draw(&mut rng);
                scores.push(xi);
                for (v, p) in values.iter_mut().zip(phi.values()) {
                    *v += xi * p;
                }
            }
            (values, scores)
        })
        .collect();
    let (rows, scores): (Vec<_>, Vec<_>) = draws.into_iter().unzip();
    Ok((Sample::from_rows(grid, rows)?, scores))
}

pub fn sample_process(spec: &ProcessSpec, n: usize, seed: u64) -> Result<Sample> {
    sample_process_with_scores(spec, n, seed).map(|(s, _)| s)
}

/// A scalar map `f` with its derivative, applied to `|x - mean|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarMap {
    /// `f(s) = slope * s`.
    Linear { slope: f64 },
    /// `f(s) = exp(rate * s)`.
    Exp { rate: f64 },
    /// `f(s) = sin(freq * s)`.
    Sin { freq: f64 },
    /// `f(s) = ln(1 + s)`.
    Log1p,
}

impl ScalarMap {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            ScalarMap::Linear { slope } => slope * s,
            ScalarMap::Exp { rate } => (rate * s).exp(),
            ScalarMap::Sin { freq } => (freq * s).sin(),
            ScalarMap::Log1p => s.ln_1p(),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            ScalarMap::Linear { slope } => slope,
            ScalarMap::Exp { rate } => rate * (rate * s).exp(),
            ScalarMap::Sin { freq } => freq * (freq * s).cos(),
            ScalarMap::Log1p => 1.0 / (1.0 + s),
        }
    }
}

/// A regression functional with analytically known derivative.
#[derive(Debug, Clone)]
pub enum FunctionalSpec {
    /// `g(x) = a + int b x`.
    Linear { intercept: f64, slope: Curve },
    /// `g(x) = sum_kl w_kl c_k(x) c_l(x)` with `c_k(x) = int (x - center) phi_k`.
    Quadratic {
        w: Vec<Vec<f64>>,
        center: Curve,
        basis: Vec<Curve>,
    },
    /// `g(x) = f(|x - center|^2)`.
    NormNonlinear { map: ScalarMap, center: Curve },
}

/// Serializable description of a functional, resolved against a process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalConfig {
    /// Slope given as Fourier-basis coefficients.
    Linear {
        #[serde(default)]
        intercept: f64,
        slope: Vec<f64>,
    },
    Quadratic {
        w: Vec<Vec<f64>>,
    },
    NormNonlinear {
        map: ScalarMap,
    },
}

impl FunctionalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("invalid functional spec: {e}")))
    }

    /// Builds the functional on the process grid, centred at the process mean.
    pub fn build(&self, process: &ProcessSpec) -> Result<FunctionalSpec> {
        let grid = process.grid();
        match self {
            FunctionalConfig::Linear { intercept, slope } => {
                let basis = fourier_basis(grid, slope.len());
                let mut b = Curve::zeros(Arc::clone(grid));
                for (c, phi) in slope.iter().zip(&basis) {
                    b = b.add(&phi.scale(*c))?;
                }
                Ok(FunctionalSpec::Linear {
                    intercept: *intercept,
                    slope: b,
                })
            }
            FunctionalConfig::Quadratic { w } => FunctionalSpec::quadratic(w.clone(), process),
            FunctionalConfig::NormNonlinear { map } => Ok(FunctionalSpec::NormNonlinear {
                map: *map,
                center: process.mean.clone(),
            }),
        }
    }
}

impl FunctionalSpec {
    pub fn quadratic(w: Vec<Vec<f64>>, process: &ProcessSpec) -> Result<Self> {
        let k = w.len();
        if k == 0 || w.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(
                "quadratic coefficients must be a square matrix".into(),
            ));
        }
        let asymmetric = (0..k).any(|a| (0..a).any(|b| (w[a][b] - w[b][a]).abs() > 1e-12 * (1.0 + w[a][b].abs())));
        if asymmetric {
            return Err(Error::InvalidArgument(
                "quadratic coefficients must be symmetric".into(),
            ));
        }
        Ok(FunctionalSpec::Quadratic {
            w,
            center: process.mean.clone(),
            basis: fourier_basis(process.grid(), k),
        })
    }

    pub fn evaluate(&self, x: &Curve) -> Result<f64> {
        match self {
            FunctionalSpec::Linear { intercept, slope } => Ok(intercept + inner_product(slope, x)?),
            FunctionalSpec::Quadratic { w, center, basis } => {
                let c = quad_coords(x, center, basis)?;
                let mut g = 0.0;
                for (k, row) in w.iter().enumerate() {
                    for (l, wkl) in row.iter().enumerate() {
                        g += wkl * c[k] * c[l];
                    }
                }
                Ok(g)
            }
            FunctionalSpec::NormNonlinear { map, center } => {
                let d = x.sub(center)?;
                Ok(map.value(inner_product(&d, &d)?))
            }
        }
    }

    /// Exact derivative of the functional at `x` in direction `y`.
    pub fn derivative_along(&self, x: &Curve, y: &Curve) -> Result<f64> {
        match self {
            FunctionalSpec::Linear { slope, .. } => inner_product(slope, y),
            FunctionalSpec::Quadratic { w, center, basis } => {
                let c = quad_coords(x, center, basis)?;
                let mut acc = 0.0;
                for (l, phi) in basis.iter().enumerate() {
                    let yl = inner_product(y, phi)?;
                    let wc: f64 = (0..w.len()).map(|k| w[l][k] * c[k]).sum();
                    acc += 2.0 * wc * yl;
                }
                Ok(acc)
            }
            FunctionalSpec::NormNonlinear { map, center } => {
                let d = x.sub(center)?;
                let s = inner_product(&d, &d)?;
                Ok(2.0 * map.derivative(s) * inner_product(&d, y)?)
            }
        }
    }
}

fn quad_coords(x: &Curve, center: &Curve, basis: &[Curve]) -> Result<Vec<f64>> {
    let d = x.sub(center)?;
    basis.iter().map(|phi| inner_product(&d, phi)).collect()
}

/// Derivative coefficient of `fspec` at `x` along basis function `j` (0-based).
pub fn true_gamma(fspec: &FunctionalSpec, x: &Curve, spec: &ProcessSpec, j: usize) -> Result<f64> {
    let phi = spec
        .basis()
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("component {j} exceeds process order {}", spec.k_true())))?;
    if !same_grid(x.grid(), phi.grid()) {
        return Err(Error::GridMismatch);
    }
    match fspec {
        // Closed forms; `derivative_along` gives the same values for any direction.
        FunctionalSpec::Linear { slope, .. } => inner_product(slope, phi),
        FunctionalSpec::Quadratic { w, center, basis } => {
            if j >= w.len() {
                return Ok(0.0);
            }
            let c = quad_coords(x, center, basis)?;
            Ok(2.0 * (0..w.len()).map(|k| w[j][k] * c[k]).sum::<f64>())
        }
        FunctionalSpec::NormNonlinear { map, center } => {
            let d = x.sub(center)?;
            let s = inner_product(&d, &d)?;
            Ok(2.0 * map.derivative(s) * inner_product(&d, phi)?)
        }
    }
}

/// Responses `g(X_i) + sigma z_i` with i.i.d. standard Gaussian `z_i`.
pub fn gen_response(sample: &Sample, fspec: &FunctionalSpec, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    sample
        .curves()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let g = fspec.evaluate(x)?;
            if sigma == 0.0 {
                return Ok(g);
            }
            let mut rng = rng::stream(seed, rng::TAG_NOISE, i as u64);
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(g + sigma * z)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn process(theta: Vec<f64>) -> ProcessSpec {
        let g = Grid::uniform(101).unwrap();
        ProcessSpec::new(theta, Curve::zeros(g), ScoreDist::Gaussian).unwrap()
    }

    #[test]
    fn preset_names() {
        assert_eq!(
            EigenPreset::parse("expdecay-b2-beta1").unwrap(),
            EigenPreset::Exponential { decay: 2.0, beta: 1.0 }
        );
        assert_eq!(
            EigenPreset::parse("poly-a2").unwrap(),
            EigenPreset::Polynomial { a: 2.0 }
        );
        assert_eq!(
            EigenPreset::parse("expdecay-b0.5-beta1.5").unwrap(),
            EigenPreset::Exponential { decay: 0.5, beta: 1.5 }
        );
        assert!(EigenPreset::parse("poly-a").is_err());
        assert!(EigenPreset::parse("gauss").is_err());
        let th = EigenPreset::parse("poly-a2").unwrap().eigenvalues(3);
        assert_eq!(th, vec![1.0, 0.25, 1.0 / 9.0]);
    }

    #[test]
    fn degenerate_process_returns_mean() {
        let g = Grid::uniform(31).unwrap();
        let mean = Curve::from_fn(Arc::clone(&g), |t| t * t);
        let spec = ProcessSpec::new(vec![0.0; 4], mean.clone(), ScoreDist::Gaussian).unwrap();
        let s = sample_process(&spec, 5, 1).unwrap();
        for c in s.curves() {
            assert_eq!(c, &mean);
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let spec = process(vec![1.0, 0.5, 0.1]);
        let a = sample_process(&spec, 20, 99).unwrap();
        let b = sample_process(&spec, 20, 99).unwrap();
        let c = sample_process(&spec, 20, 100).unwrap();
        for (x, y) in a.curves().iter().zip(b.curves()) {
            assert_eq!(x.values(), y.values());
        }
        assert_ne!(a.curves()[0].values(), c.curves()[0].values());
    }

    #[test]
    fn uniform_scores_have_unit_variance() {
        let g = Grid::uniform(21).unwrap();
        let spec = ProcessSpec::new(vec![1.0], Curve::zeros(g), ScoreDist::UniformSymmetric).unwrap();
        let (_, scores) = sample_process_with_scores(&spec, 20_000, 5).unwrap();
        let col: Vec<f64> = scores.iter().map(|r| r[0]).collect();
        assert!((stats::variance(&col) - 1.0).abs() < 0.05);
        assert!(col.iter().all(|v| v.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn linear_gamma_is_kronecker() {
        let spec = process(vec![1.0, 0.5, 0.2]);
        let f = FunctionalConfig::Linear {
            intercept: 0.0,
            slope: vec![0.0, 1.0],
        }
        .build(&spec)
        .unwrap();
        let s = sample_process(&spec, 10, 3).unwrap();
        for x in s.curves() {
            for j in 0..3 {
                let g = true_gamma(&f, x, &spec, j).unwrap();
                let want = if j == 1 { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_is_stationary_at_mean_only() {
        let spec = process(vec![1.0, 0.5, 0.2]);
        let f = FunctionalSpec::quadratic(vec![vec![2.0, 0.5], vec![0.5, 1.0]], &spec).unwrap();
        for j in 0..3 {
            assert_eq!(true_gamma(&f, &spec.mean, &spec, j).unwrap(), 0.0);
        }
        let x = spec.mean.add(&spec.basis()[1].scale(0.3)).unwrap();
        assert!(true_gamma(&f, &x, &spec, 0).unwrap().abs() > 0.1);
    }

    #[test]
    fn norm_nonlinear_gamma() {
        let spec = process(vec![1.0, 0.5]);
        let f = FunctionalSpec::NormNonlinear {
            map: ScalarMap::Linear { slope: 1.0 },
            center: spec.mean.clone(),
        };
        let x = spec.mean.add(&spec.basis()[0].scale(3.0)).unwrap();
        assert!((true_gamma(&f, &x, &spec, 0).unwrap() - 6.0).abs() < 1e-12);
        assert!(true_gamma(&f, &x, &spec, 1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn response_examples() {
        let spec = process(vec![1.0, 0.5]);
        let s = sample_process(&spec, 8, 4).unwrap();
        let lin = FunctionalConfig::Linear {
            intercept: 4.0,
            slope: vec![],
        }
        .build(&spec)
        .unwrap();
        assert!(gen_response(&s, &lin, 0.0, 1).unwrap().iter().all(|&y| y == 4.0));

        let quad = FunctionalSpec::quadratic(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &spec).unwrap();
        let x = spec
            .mean
            .add(&spec.basis()[0])
            .unwrap()
            .add(&spec.basis()[1].scale(2.0))
            .unwrap();
        assert!((quad.evaluate(&x).unwrap() - 5.0).abs() < 1e-12);

        let noisy = gen_response(&s, &lin, 0.5, 1).unwrap();
        assert_eq!(noisy, gen_response(&s, &lin, 0.5, 1).unwrap());
        assert!(noisy.iter().any(|&y| y != 4.0));
    }

    #[test]
    fn chain_rule_matches_central_difference() {
        let spec = process(vec![1.0, 0.5, 0.25]);
        let f = FunctionalSpec::NormNonlinear {
            map: ScalarMap::Sin { freq: 1.3 },
            center: spec.mean.clone(),
        };
        let x = spec
            .mean
            .add(&spec.basis()[0].scale(0.7))
            .unwrap()
            .add(&spec.basis()[2].scale(-0.4))
            .unwrap();
        for j in 0..3 {
            let phi = &spec.basis()[j];
            let exact = true_gamma(&f, &x, &spec, j).unwrap();
            let fd = |d: f64| {
                let up = f.evaluate(&x.add(&phi.scale(d)).unwrap()).unwrap();
                let dn = f.evaluate(&x.sub(&phi.scale(d)).unwrap()).unwrap();
                (up - dn) / (2.0 * d)
            };
            let e3 = (fd(1e-3) - exact).abs();
            let e4 = (fd(1e-4) - exact).abs();
            assert!(e3 < 1e-5, "j {j}: {e3}");
            if e3 > 1e-9 {
                let ratio = e3 / e4;
                assert!((50.0..200.0).contains(&ratio), "j {j}: ratio {ratio}");
            }
        }
    }

    #[test]
    fn functional_json() {
        let c = FunctionalConfig::from_json(r#"{"kind":"linear","intercept":1,"slope":[1.5,-0.5]}"#).unwrap();
        assert_eq!(
            c,
            FunctionalConfig::Linear {
                intercept: 1.0,
                slope: vec![1.5, -0.5]
            }
        );
        let c = FunctionalConfig::from_json(r#"{"kind":"norm_nonlinear","map":{"type":"exp","rate":-1}}"#).unwrap();
        assert_eq!(
            c,
            FunctionalConfig::NormNonlinear {
                map: ScalarMap::Exp { rate: -1.0 }
            }
        );
        assert!(FunctionalConfig::from_json(r#"{"kind":"cubic"}"#).is_err());
        let spec = process(vec![1.0]);
        let asym = FunctionalConfig::Quadratic {
            w: vec![vec![1.0, 2.0], vec![0.0, 1.0]],
        };
        assert!(asym.build(&spec).is_err());
    }
}
