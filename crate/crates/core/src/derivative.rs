//! Functional derivative estimation along estimated eigendirections.
//!
//! For an evaluation curve `x` and component `j`, the estimate of the
//! derivative coefficient `gamma_xj` is a kernel-weighted ratio of response
//! differences to score differences over pairs of sample curves:
//!
//! ```text
//! gamma_hat = sum (Y_a - Y_b) K(a, b, j | x) / sum (xi_a,j - xi_b,j) K(a, b, j | x)
//! ```
//!
//! where each unordered pair contributes once, oriented so that the score
//! difference is strictly positive, and
//!
//! ```text
//! K(a, b, j | x) = K(|x - X_a| / h1) * K(|x - X_b| / h1) * K(Q_abj / h2)
//! Q_abj = 1 - (int (X_a - X_b) psi_j)^2 / |X_a - X_b|^2
//! ```
//!
//! `Q` measures how much of the difference curve lies off `psi_j`; the third
//! factor keeps only pairs that differ essentially along that direction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::{EigenSystem, Sample};
use crate::function_space::{inner_product, l2_norm, same_grid, Curve, Grid};
use crate::regression::{check_responses, KernelSpec};
use crate::stats;

/// Denominators at or below this are treated as empty.
pub const DENOMINATOR_GUARD: f64 = 1e-12;
/// Tolerance on the squared norm of a direction vector.
pub const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivBandwidths {
    /// Proximity bandwidth, in L2-norm units.
    pub h1: f64,
    /// Alignment bandwidth; `Q` is dimensionless in [0, 1].
    pub h2: f64,
}

impl DerivBandwidths {
    pub fn new(h1: f64, h2: f64) -> Result<Self> {
        if !(h1 > 0.0 && h1.is_finite()) {
            return Err(Error::InvalidArgument(format!("h1 must be positive, got {h1}")));
        }
        if !(h2 > 0.0 && h2 <= 1.0) {
            return Err(Error::InvalidArgument(format!("h2 must lie in (0, 1], got {h2}")));
        }
        Ok(DerivBandwidths { h1, h2 })
    }
}

/// A fixed bandwidth or a data-driven quantile rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    /// The given quantile of the reference distances (h1) or alignments (h2).
    Quantile(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRule {
    pub h1: BandwidthChoice,
    pub h2: BandwidthChoice,
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule {
            h1: BandwidthChoice::Quantile(0.5),
            h2: BandwidthChoice::Quantile(0.25),
        }
    }
}

impl From<DerivBandwidths> for BandwidthRule {
    fn from(bw: DerivBandwidths) -> Self {
        BandwidthRule {
            h1: BandwidthChoice::Fixed(bw.h1),
            h2: BandwidthChoice::Fixed(bw.h2),
        }
    }
}

/// Estimated derivative coefficients at one evaluation curve.
#[derive(Debug, Clone)]
pub struct DerivativeEstimate {
    pub at: Curve,
    /// `None` marks a component with no active pair.
    pub gammas: Vec<Option<f64>>,
    pub pair_counts: Vec<usize>,
    /// Bandwidths used per component (`None` when no pair passed the h1 gate).
    pub bandwidths: Vec<Option<DerivBandwidths>>,
    /// Eigenfunctions the coefficients refer to.
    pub eigenfunctions: Vec<Curve>,
}

impl DerivativeEstimate {
    pub fn components(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_complete(&self) -> bool {
        self.gammas.iter().all(Option::is_some)
    }
}

/// Fraction of `diff`'s energy orthogonal to the unit curve `psi`.
pub fn alignment_q(diff: &Curve, psi: &Curve) -> Result<f64> {
    let nrm2 = inner_product(diff, diff)?;
    if nrm2 <= 0.0 {
        return Err(Error::ZeroDifference);
    }
    let proj = inner_product(diff, psi)?;
    Ok(q_from_parts(proj, nrm2))
}

#[inline]
fn q_from_parts(proj: f64, nrm2: f64) -> f64 {
    (1.0 - proj * proj / nrm2).clamp(0.0, 1.0)
}

/// Product-kernel weight of the pair `(xi1, xi2)` for direction `psi_j` at `x`.
pub fn pair_weight(
    x: &Curve,
    xi1: &Curve,
    xi2: &Curve,
    psi_j: &Curve,
    bw: &DerivBandwidths,
    kernel: &KernelSpec,
) -> Result<f64> {
    let q = alignment_q(&xi1.sub(xi2)?, psi_j)?;
    let d1 = l2_norm(&x.sub(xi1)?);
    let d2 = l2_norm(&x.sub(xi2)?);
    Ok(kernel.weight(d1 / bw.h1) * kernel.weight(d2 / bw.h1) * kernel.weight(q / bw.h2))
}

/// Pair sums for one component: returns `(gamma, active pairs)`.
struct ComponentSums {
    numerator: f64,
    denominator: f64,
    pairs: usize,
}

/// Pair-level data for an evaluation curve: the curves inside the h1 gate and
/// their mutual squared distances.
struct Neighborhood<'a> {
    grid: &'a Grid,
    members: Vec<usize>,
    weights: Vec<f64>,
    /// Upper triangle of squared distances among members, row-major.
    dist_sq: Vec<f64>,
    responses: &'a [f64],
    sample: &'a Sample,
}

impl<'a> Neighborhood<'a> {
    fn new(sample: &'a Sample, responses: &'a [f64], x: &Curve, h1: f64, kernel: &KernelSpec) -> Self {
        let grid = sample.grid().as_ref();
        let mut members = Vec::new();
        let mut weights = Vec::new();
        for (i, c) in sample.curves().iter().enumerate() {
            let d = grid.dist_sq(x.values(), c.values()).max(0.0).sqrt();
            let w = kernel.weight(d / h1);
            if w > 0.0 {
                members.push(i);
                weights.push(w);
            }
        }
        let a = members.len();
        let mut dist_sq = Vec::with_capacity(a * a.saturating_sub(1) / 2);
        let curves = sample.curves();
        for p in 0..a {
            for q in p + 1..a {
                dist_sq.push(grid.dist_sq(curves[members[p]].values(), curves[members[q]].values()));
            }
        }
        Neighborhood {
            grid,
            members,
            weights,
            dist_sq,
            responses,
            sample,
        }
    }

    fn projections(&self, psi: &Curve) -> Vec<f64> {
        let curves = self.sample.curves();
        self.members
            .iter()
            .map(|&i| self.grid.dot(curves[i].values(), psi.values()))
            .collect()
    }

    /// Calls `f(weight_a * weight_b, score difference, response difference, Q)`
    /// for every unordered member pair with a nonzero score difference,
    /// oriented so the score difference is positive.
    fn for_each_pair(&self, proj: &[f64], mut f: impl FnMut(f64, f64, f64, f64)) {
        let a = self.members.len();
        let mut idx = 0;
        for p in 0..a {
            for q in p + 1..a {
                let d2 = self.dist_sq[idx];
                idx += 1;
                let mut delta = proj[p] - proj[q];
                if delta == 0.0 || d2 <= 0.0 {
                    continue;
                }
                let mut dy = self.responses[self.members[p]] - self.responses[self.members[q]];
                if delta < 0.0 {
                    delta = -delta;
                    dy = -dy;
                }
                let qv = q_from_parts(delta, d2);
                f(self.weights[p] * self.weights[q], delta, dy, qv);
            }
        }
    }

    fn alignments(&self, proj: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_pair(proj, |_, _, _, q| out.push(q));
        out
    }

    fn sums(&self, proj: &[f64], h2: f64, kernel: &KernelSpec) -> ComponentSums {
        let mut s = ComponentSums {
            numerator: 0.0,
            denominator: 0.0,
            pairs: 0,
        };
        self.for_each_pair(proj, |w_ab, delta, dy, q| {
            let w = w_ab * kernel.weight(q / h2);
            if w > 0.0 {
                s.numerator += w * dy;
                s.denominator += w * delta;
                s.pairs += 1;
            }
        });
        s
    }
}

/// Derivative estimator bound to one sample, response vector and eigenbasis.
///
/// A quantile rule for `h1` is applied to the distances from the evaluation
/// curve, so every evaluation point keeps the same share of the sample inside
/// its proximity window. At the sample mean this is the quantile of
/// `|X_i - mean|`.
#[derive(Debug, Clone)]
pub struct DerivativeEstimator<'a> {
    sample: &'a Sample,
    responses: &'a [f64],
    eig: &'a EigenSystem,
    kernel: KernelSpec,
    rule: BandwidthRule,
}

impl<'a> DerivativeEstimator<'a> {
    pub fn new(
        sample: &'a Sample,
        responses: &'a [f64],
        eig: &'a EigenSystem,
        kernel: KernelSpec,
        rule: BandwidthRule,
    ) -> Result<Self> {
        check_responses(sample, responses)?;
        if !same_grid(sample.grid(), eig.grid()) {
            return Err(Error::GridMismatch);
        }
        match rule.h1 {
            BandwidthChoice::Fixed(h) if !(h > 0.0 && h.is_finite()) => {
                return Err(Error::InvalidArgument(format!("h1 must be positive, got {h}")));
            }
            BandwidthChoice::Quantile(q) if !(q > 0.0 && q <= 1.0) => {
                return Err(Error::InvalidArgument(format!(
                    "h1 quantile must lie in (0, 1], got {q}"
                )));
            }
            _ => {}
        }
        match rule.h2 {
            BandwidthChoice::Fixed(h2) => {
                DerivBandwidths::new(1.0, h2)?;
            }
            BandwidthChoice::Quantile(q) if !(q > 0.0 && q <= 1.0) => {
                return Err(Error::InvalidArgument(format!(
                    "h2 quantile must lie in (0, 1], got {q}"
                )));
            }
            _ => {}
        }
        Ok(DerivativeEstimator {
            sample,
            responses,
            eig,
            kernel,
            rule,
        })
    }

    /// The proximity bandwidth used at `x`.
    pub fn h1_at(&self, x: &Curve) -> Result<f64> {
        self.check_point(x)?;
        let h1 = match self.rule.h1 {
            BandwidthChoice::Fixed(h) => h,
            BandwidthChoice::Quantile(q) => {
                let grid = self.sample.grid();
                let dists: Vec<f64> = self
                    .sample
                    .curves()
                    .iter()
                    .map(|c| grid.dist_sq(c.values(), x.values()).max(0.0).sqrt())
                    .collect();
                stats::quantile(&dists, q).ok_or(Error::EmptySample)?
            }
        };
        if h1 > 0.0 && h1.is_finite() {
            Ok(h1)
        } else {
            // Every curve coincides with x at this quantile.
            Err(Error::EmptyPairNeighborhood { component: 0 })
        }
    }

    fn check_point(&self, x: &Curve) -> Result<()> {
        if same_grid(self.sample.grid(), x.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn h2_for(&self, hood: &Neighborhood<'_>, proj: &[f64]) -> Option<f64> {
        match self.rule.h2 {
            BandwidthChoice::Fixed(h2) => Some(h2),
            BandwidthChoice::Quantile(q) => {
                let qs = hood.alignments(proj);
                let h2 = stats::quantile(&qs, q)?;
                if h2 > 0.0 {
                    Some(h2.min(1.0))
                } else {
                    // All quantile mass at perfect alignment: admit the next
                    // level, or everything when every pair is aligned.
                    let next = qs.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
                    Some(if next.is_finite() { next.min(1.0) } else { 1.0 })
                }
            }
        }
    }

    fn component(&self, hood: &Neighborhood<'_>, h1: f64, j: usize) -> (Result<f64>, usize, Option<DerivBandwidths>) {
        let proj = hood.projections(&self.eig.eigenfunctions[j]);
        let Some(h2) = self.h2_for(hood, &proj) else {
            return (Err(Error::EmptyPairNeighborhood { component: j }), 0, None);
        };
        let bw = DerivBandwidths { h1, h2 };
        let s = hood.sums(&proj, h2, &self.kernel);
        if s.pairs == 0 || s.denominator <= DENOMINATOR_GUARD {
            return (Err(Error::EmptyPairNeighborhood { component: j }), s.pairs, Some(bw));
        }
        (Ok(s.numerator / s.denominator), s.pairs, Some(bw))
    }

    /// Estimate of the coefficient along eigenfunction `j` (0-based), with the
    /// number of pairs carrying positive weight.
    pub fn gamma(&self, x: &Curve, j: usize) -> Result<(f64, usize)> {
        self.check_point(x)?;
        self.check_component(j + 1)?;
        let h1 = self.h1_at(x)?;
        let hood = Neighborhood::new(self.sample, self.responses, x, h1, &self.kernel);
        let (g, count, _) = self.component(&hood, h1, j);
        g.map(|g| (g, count))
    }

    fn check_component(&self, components: usize) -> Result<()> {
        if components > self.eig.components() {
            return Err(Error::InvalidArgument(format!(
                "requested {components} components, eigensystem has {}",
                self.eig.components()
            )));
        }
        Ok(())
    }

    /// Coefficients for the first `components` eigenfunctions. Components
    /// without active pairs are recorded as absent.
    pub fn gradient_at(&self, x: &Curve, components: usize) -> Result<DerivativeEstimate> {
        self.check_point(x)?;
        self.check_component(components)?;
        let h1 = self.h1_at(x)?;
        let hood = Neighborhood::new(self.sample, self.responses, x, h1, &self.kernel);
        let mut gammas = Vec::with_capacity(components);
        let mut pair_counts = Vec::with_capacity(components);
        let mut bandwidths = Vec::with_capacity(components);
        for j in 0..components {
            let (g, count, bw) = self.component(&hood, h1, j);
            match g {
                Ok(v) => gammas.push(Some(v)),
                Err(Error::EmptyPairNeighborhood { .. }) => gammas.push(None),
                Err(e) => return Err(e),
            }
            pair_counts.push(if gammas[j].is_some() { count } else { 0 });
            bandwidths.push(bw);
        }
        Ok(DerivativeEstimate {
            at: x.clone(),
            gammas,
            pair_counts,
            bandwidths,
            eigenfunctions: self.eig.eigenfunctions[..components].to_vec(),
        })
    }
}

/// Coefficient estimate for eigenfunction `j` (0-based) at fixed bandwidths.
pub fn gamma_hat(
    x: &Curve,
    j: usize,
    sample: &Sample,
    responses: &[f64],
    eig: &EigenSystem,
    bw: &DerivBandwidths,
    kernel: &KernelSpec,
) -> Result<(f64, usize)> {
    DerivativeEstimator::new(sample, responses, eig, *kernel, (*bw).into())?.gamma(x, j)
}

/// Coefficient estimates for the first `components` eigenfunctions.
pub fn gradient_at(
    x: &Curve,
    sample: &Sample,
    responses: &[f64],
    eig: &EigenSystem,
    rule: BandwidthRule,
    kernel: &KernelSpec,
    components: usize,
) -> Result<DerivativeEstimate> {
    DerivativeEstimator::new(sample, responses, eig, *kernel, rule)?.gradient_at(x, components)
}

/// Derivative in the unit direction with coefficients `e` on the eigenbasis.
pub fn directional_derivative(est: &DerivativeEstimate, e: &[f64]) -> Result<f64> {
    if e.len() > est.gammas.len() {
        return Err(Error::InvalidArgument(format!(
            "direction has {} coefficients, estimate has {}",
            e.len(),
            est.gammas.len()
        )));
    }
    let ss: f64 = e.iter().map(|v| v * v).sum();
    if (ss - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidDirection(ss));
    }
    let mut acc = 0.0;
    for (j, (&ej, g)) in e.iter().zip(&est.gammas).enumerate() {
        if ej == 0.0 {
            continue;
        }
        match g {
            Some(g) => acc += ej * g,
            None => return Err(Error::MissingComponent(j)),
        }
    }
    Ok(acc)
}

/// Unit coefficient vector of steepest ascent within the estimated span.
/// Absent components get coefficient zero.
pub fn steepest_direction(est: &DerivativeEstimate) -> Result<Vec<f64>> {
    if est.gammas.iter().all(Option::is_none) {
        return Err(Error::MissingComponent(0));
    }
    let nrm = est.gammas.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if nrm == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(est.gammas.iter().map(|g| g.map_or(0.0, |g| g / nrm)).collect())
}

/// The curve `sum_j gamma_j psi_j` over the first `components` coefficients.
pub fn derivative_generating_function(est: &DerivativeEstimate, components: usize) -> Result<Curve> {
    if components > est.gammas.len() || components > est.eigenfunctions.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {components} components, estimate has {}",
            est.gammas.len()
        )));
    }
    let grid: Arc<Grid> = Arc::clone(est.at.grid());
    let mut values = vec![0.0; grid.len()];
    for j in 0..components {
        let g = est.gammas[j].ok_or(Error::MissingComponent(j))?;
        for (v, p) in values.iter_mut().zip(est.eigenfunctions[j].values()) {
            *v += g * p;
        }
    }
    Curve::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpca::{fit, ComponentRule};
    use crate::regression::KernelFamily;
    use std::f64::consts::{PI, SQRT_2};

    fn grid() -> Arc<Grid> {
        Grid::uniform(65).unwrap()
    }

    fn basis(g: &Arc<Grid>) -> (Curve, Curve, Curve) {
        (
            Curve::constant(Arc::clone(g), 1.0),
            Curve::from_fn(Arc::clone(g), |t| SQRT_2 * (2.0 * PI * t).sin()),
            Curve::from_fn(Arc::clone(g), |t| SQRT_2 * (2.0 * PI * t).cos()),
        )
    }

    fn uniform_kernel() -> KernelSpec {
        KernelSpec::new(KernelFamily::Uniform, 1.0).unwrap()
    }

    #[test]
    fn q_examples() {
        let g = grid();
        let (p1, p2, _) = basis(&g);
        assert!(alignment_q(&p1.scale(2.5), &p1).unwrap().abs() < 1e-10);
        assert!((alignment_q(&p2, &p1).unwrap() - 1.0).abs() < 1e-10);
        let mix = p1.add(&p2).unwrap().scale(1.0 / SQRT_2);
        assert!((alignment_q(&mix, &p1).unwrap() - 0.5).abs() < 1e-8);
        assert!(matches!(
            alignment_q(&Curve::zeros(Arc::clone(&g)), &p1),
            Err(Error::ZeroDifference)
        ));
    }

    #[test]
    fn pair_weight_examples() {
        let g = grid();
        let (p1, p2, _) = basis(&g);
        let x = Curve::zeros(Arc::clone(&g));
        let bw = DerivBandwidths::new(1.0, 0.5).unwrap();
        let quad = KernelSpec::default();
        // |x - X1| = 2 c h1 zeroes the weight however aligned the pair is.
        let far = p1.scale(2.0);
        let near = p1.scale(0.1);
        assert_eq!(pair_weight(&x, &far, &near, &p1, &bw, &quad).unwrap(), 0.0);

        // Uniform kernel with every scaled argument below c.
        let a = p1.scale(0.5);
        let b = p1.scale(-0.3).add(&p2.scale(0.1)).unwrap();
        assert_eq!(pair_weight(&x, &a, &b, &p1, &bw, &uniform_kernel()).unwrap(), 1.0);

        // Quadratic kernel at scaled arguments (0.5, 0.5, 0.5).
        let bw = DerivBandwidths::new(1.0, 1.0).unwrap();
        let xa = p1.scale(0.25).add(&p2.scale(0.25)).unwrap().scale(SQRT_2);
        let xb = p1.scale(-0.25).add(&p2.scale(0.25)).unwrap().scale(SQRT_2);
        // Each is 0.5 from x; their difference lies along p1, so rotate psi to
        // get Q = 0.5.
        let psi = p1.add(&p2).unwrap().scale(1.0 / SQRT_2);
        let w = pair_weight(&x, &xa, &xb, &psi, &bw, &quad).unwrap();
        assert!((w - 0.421875).abs() < 1e-10);

        assert!(matches!(
            pair_weight(&x, &a, &a, &p1, &bw, &quad),
            Err(Error::ZeroDifference)
        ));
    }

    /// Curves `mean + t_i psi_1 + s_i psi_2` with responses `2 t_i + c`.
    fn constructed(g: &Arc<Grid>, with_second: bool) -> (Sample, Vec<f64>) {
        let (p1, p2, _) = basis(g);
        let mean = Curve::from_fn(Arc::clone(g), |t| 3.0 + t);
        let ts = [-0.4, -0.25, -0.1, 0.05, 0.15, 0.3, 0.45];
        let curves: Vec<Curve> = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let s = if with_second { 0.2 * ((i % 3) as f64 - 1.0) } else { 0.0 };
                mean.add(&p1.scale(t)).unwrap().add(&p2.scale(s)).unwrap()
            })
            .collect();
        let y = ts.iter().map(|t| 2.0 * t + 1.0).collect();
        (Sample::new(Arc::clone(g), curves).unwrap(), y)
    }

    #[test]
    fn constructed_ratio_is_exact() {
        let g = grid();
        let (s, y) = constructed(&g, false);
        let eig = fit(&s, ComponentRule::Fixed(1)).unwrap();
        let x = eig.mean.clone();
        for (h1, h2) in [(10.0, 1.0), (0.3, 0.01), (0.16, 1e-6)] {
            let bw = DerivBandwidths::new(h1, h2).unwrap();
            let (gamma, count) = gamma_hat(&x, 0, &s, &y, &eig, &bw, &KernelSpec::default()).unwrap();
            assert!(count >= 1);
            // psi_1 may come out as either sign of p1.
            assert!((gamma.abs() - 2.0).abs() < 1e-10, "gamma {gamma}");
        }
    }

    #[test]
    fn constant_responses_give_zero() {
        let g = grid();
        let (s, _) = constructed(&g, true);
        let eig = fit(&s, ComponentRule::Fixed(2)).unwrap();
        let y = vec![4.2; s.len()];
        let est = gradient_at(
            &eig.mean,
            &s,
            &y,
            &eig,
            BandwidthRule::default(),
            &KernelSpec::default(),
            2,
        )
        .unwrap();
        for g in &est.gammas {
            assert_eq!(g.unwrap(), 0.0);
        }
    }

    #[test]
    fn tiny_bandwidths_mark_components_absent() {
        let g = grid();
        let (s, y) = constructed(&g, true);
        let eig = fit(&s, ComponentRule::Fixed(2)).unwrap();
        let far = eig.mean.add(&Curve::constant(Arc::clone(&g), 50.0)).unwrap();
        let bw = DerivBandwidths::new(0.01, 0.5).unwrap();
        let est = gradient_at(&far, &s, &y, &eig, bw.into(), &KernelSpec::default(), 2).unwrap();
        assert_eq!(est.gammas, vec![None, None]);
        assert_eq!(est.pair_counts, vec![0, 0]);
        assert!(matches!(
            gamma_hat(&far, 0, &s, &y, &eig, &bw, &KernelSpec::default()),
            Err(Error::EmptyPairNeighborhood { component: 0 })
        ));
        assert!(derivative_generating_function(&est, 1).is_err());
        assert!(matches!(steepest_direction(&est), Err(Error::MissingComponent(_))));
    }

    fn estimate(gammas: Vec<Option<f64>>) -> DerivativeEstimate {
        let g = grid();
        let (p1, p2, p3) = basis(&g);
        let k = gammas.len();
        DerivativeEstimate {
            at: Curve::zeros(Arc::clone(&g)),
            pair_counts: gammas.iter().map(|v| usize::from(v.is_some())).collect(),
            bandwidths: vec![None; k],
            gammas,
            eigenfunctions: vec![p1, p2, p3][..k].to_vec(),
        }
    }

    #[test]
    fn directional_examples() {
        let e = estimate(vec![Some(1.0), Some(2.0)]);
        assert_eq!(directional_derivative(&e, &[1.0, 0.0]).unwrap(), 1.0);
        assert!((directional_derivative(&e, &[0.6, 0.8]).unwrap() - 2.2).abs() < 1e-15);
        let z = estimate(vec![Some(0.0), Some(0.0)]);
        assert_eq!(directional_derivative(&z, &[0.6, -0.8]).unwrap(), 0.0);
        assert!(matches!(
            directional_derivative(&e, &[1.0, 1.0]),
            Err(Error::InvalidDirection(_))
        ));
        let partial = estimate(vec![Some(1.0), None]);
        assert_eq!(directional_derivative(&partial, &[1.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(
            directional_derivative(&partial, &[0.6, 0.8]),
            Err(Error::MissingComponent(1))
        ));
    }

    #[test]
    fn steepest_examples() {
        let d = steepest_direction(&estimate(vec![Some(3.0), Some(4.0)])).unwrap();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15);
        assert_eq!(
            steepest_direction(&estimate(vec![Some(0.0), Some(-2.0)])).unwrap(),
            vec![0.0, -1.0]
        );
        let s = steepest_direction(&estimate(vec![Some(15.0), Some(20.0)])).unwrap();
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.8).abs() < 1e-15);
        assert!(matches!(
            steepest_direction(&estimate(vec![Some(0.0), Some(0.0)])),
            Err(Error::ZeroGradient)
        ));
        let part = steepest_direction(&estimate(vec![Some(-2.0), None])).unwrap();
        assert_eq!(part, vec![-1.0, 0.0]);
    }

    #[test]
    fn dgf_examples() {
        let e = estimate(vec![Some(1.0), Some(0.0), Some(0.0)]);
        let dgf = derivative_generating_function(&e, 3).unwrap();
        assert_eq!(dgf, e.eigenfunctions[0]);
        let z = derivative_generating_function(&estimate(vec![Some(0.0); 3]), 3).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let e = estimate(vec![Some(2.0), Some(-1.0)]);
        let dgf = derivative_generating_function(&e, 2).unwrap();
        let ip = inner_product(&dgf, &e.eigenfunctions[1]).unwrap();
        assert!((ip + 1.0).abs() < 1e-8);
    }

    #[test]
    fn response_shift_and_scale() {
        let g = grid();
        let (s, y) = constructed(&g, true);
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 0.3 * (i as f64).sin()).collect();
        let eig = fit(&s, ComponentRule::Fixed(2)).unwrap();
        let rule = BandwidthRule::default();
        let k = KernelSpec::default();
        let base = gradient_at(&eig.mean, &s, &y, &eig, rule, &k, 2).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * -2.5).collect();
        let a = gradient_at(&eig.mean, &s, &shifted, &eig, rule, &k, 2).unwrap();
        let b = gradient_at(&eig.mean, &s, &scaled, &eig, rule, &k, 2).unwrap();
        for j in 0..2 {
            let g0 = base.gammas[j].unwrap();
            assert!((a.gammas[j].unwrap() - g0).abs() <= 1e-12 * (1.0 + g0.abs()));
            assert!((b.gammas[j].unwrap() + 2.5 * g0).abs() <= 1e-10 * g0.abs().max(1e-300));
        }
    }

    #[test]
    fn sign_flip_preserves_dgf() {
        let g = grid();
        let (s, y) = constructed(&g, true);
        let eig = fit(&s, ComponentRule::Fixed(2)).unwrap();
        let mut flipped = eig.clone();
        flipped.flip_sign(0);
        let rule = BandwidthRule::default();
        let k = KernelSpec::default();
        let a = gradient_at(&eig.mean, &s, &y, &eig, rule, &k, 2).unwrap();
        let b = gradient_at(&eig.mean, &s, &y, &flipped, rule, &k, 2).unwrap();
        assert!((a.gammas[0].unwrap() + b.gammas[0].unwrap()).abs() < 1e-12);
        let da = derivative_generating_function(&a, 2).unwrap();
        let db = derivative_generating_function(&b, 2).unwrap();
        for (u, v) in da.values().iter().zip(db.values()) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
