//! Gaussian source models, integration grids and the correlation ladder.
//!
//! Every integral over the source axis in this crate is a weighted sum over a
//! [`SampleGrid`]. Integrals over the side-information axis conditioned on a
//! source value are evaluated in closed form through the normal CDF.

use std::num::NonZeroUsize;
use std::ops::Range;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Density of `N(mean, variance)` at `x`.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    std_normal_pdf((x - mean) / sd) / sd
}

/// Probability that `N(mean, sd²)` falls in `(lo, hi]`. Infinite bounds are allowed.
///
/// A zero standard deviation is treated as a point mass at `mean`.
pub fn normal_interval_prob(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return if mean > lo && mean <= hi { 1.0 } else { 0.0 };
    }
    // Evaluate in the tail where erfc keeps relative precision.
    let a = (lo - mean) / sd;
    let b = (hi - mean) / sd;
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}

/// A scalar Gaussian source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSource {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSource {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) || !mean.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian source needs finite mean and variance > 0, got ({mean}, {variance})"
            )));
        }
        Ok(Self { mean, variance })
    }

    /// Zero mean, unit variance.
    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        normal_pdf(x, self.mean, self.variance)
    }
}

/// Zero-mean jointly Gaussian source `X` and side information `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointGaussianPair {
    pub var_x: f64,
    pub var_y: f64,
    pub rho: f64,
}

impl JointGaussianPair {
    pub fn new(var_x: f64, var_y: f64, rho: f64) -> Result<Self> {
        if !(var_x > 0.0 && var_y > 0.0) || !var_x.is_finite() || !var_y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "variances must be positive, got ({var_x}, {var_y})"
            )));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "rho {rho} outside [-1, 1]"
            )));
        }
        Ok(Self { var_x, var_y, rho })
    }

    /// Unit-variance pair with correlation `rho`.
    pub fn unit(rho: f64) -> Result<Self> {
        Self::new(1.0, 1.0, rho)
    }

    pub fn covariance(&self) -> f64 {
        self.rho * (self.var_x * self.var_y).sqrt()
    }

    pub fn source(&self) -> GaussianSource {
        GaussianSource {
            mean: 0.0,
            variance: self.var_x,
        }
    }

    pub fn side_info(&self) -> GaussianSource {
        GaussianSource {
            mean: 0.0,
            variance: self.var_y,
        }
    }

    /// Mean and variance of `X | Y = y`.
    pub fn conditional_x_given_y(&self, y: f64) -> (f64, f64) {
        let mean = self.rho * y * (self.var_x / self.var_y).sqrt();
        let var = self.var_x * (1.0 - self.rho * self.rho);
        (mean, var)
    }

    /// Mean and standard deviation of `Y | X = x`.
    pub fn conditional_y_given_x(&self, x: f64) -> (f64, f64) {
        let mean = self.rho * x * (self.var_y / self.var_x).sqrt();
        let var = self.var_y * (1.0 - self.rho * self.rho);
        (mean, var.max(0.0).sqrt())
    }

    /// Same pair with the roles of source and side information swapped.
    pub fn swapped(&self) -> Self {
        Self {
            var_x: self.var_y,
            var_y: self.var_x,
            rho: self.rho,
        }
    }
}

/// Quadrature nodes and weights on a bounded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    range: (f64, f64),
}

impl Default for SampleGrid {
    /// 1201-point trapezoid rule on `[-6, 6]`.
    fn default() -> Self {
        Self::uniform(-6.0, 6.0, 1201).expect("valid default grid")
    }
}

impl SampleGrid {
    /// Uniform grid with trapezoid weights.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs n >= 2 and hi > lo, got n={n}, [{lo}, {hi}]"
            )));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let points: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            points,
            weights,
            range: (lo, hi),
        })
    }

    /// Composite Gauss-Legendre rule on `[lo, hi]` whose panels never straddle
    /// any of `breaks` and are at most `max_width` wide.
    ///
    /// Integrals of functions that are smooth between breakpoints (for
    /// instance a density restricted to quantizer cells) are then accurate to
    /// near machine precision.
    pub fn piecewise_gauss(
        lo: f64,
        hi: f64,
        breaks: &[f64],
        max_width: f64,
        order: usize,
    ) -> Result<Self> {
        if !(hi > lo) || !(max_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "piecewise grid needs hi > lo and max_width > 0, got [{lo}, {hi}], {max_width}"
            )));
        }
        let order = NonZeroUsize::new(order)
            .ok_or_else(|| Error::InvalidParameter("quadrature order must be >= 1".into()))?;
        let rule = GaussLegendre::new(order);
        let mut edges = vec![lo];
        edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
        edges.push(hi);
        edges.sort_by(f64::total_cmp);
        edges.dedup();

        let mut points = Vec::new();
        let mut weights = Vec::new();
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
            let step = (b - a) / panels as f64;
            for p in 0..panels {
                let pa = a + step * p as f64;
                let pb = if p + 1 == panels { b } else { pa + step };
                let half = 0.5 * (pb - pa);
                let mid = 0.5 * (pb + pa);
                for &(node, weight) in rule.as_node_weight_pairs() {
                    points.push(mid + half * node);
                    weights.push(half * weight);
                }
            }
        }
        Ok(Self {
            points,
            weights,
            range: (lo, hi),
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `Σ weights · values`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                actual: values.len(),
            });
        }
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Integral of `f` evaluated at the grid points.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Index ranges of the grid points falling in each cell delimited by the
    /// sorted `thresholds`. A point equal to a threshold belongs to the lower cell.
    pub fn cell_ranges(&self, thresholds: &[f64]) -> Vec<Range<usize>> {
        let mut ranges = Vec::with_capacity(thresholds.len() + 1);
        let mut start = 0;
        for &t in thresholds {
            let end = start + self.points[start..].partition_point(|&x| x <= t);
            ranges.push(start..end);
            start = end;
        }
        ranges.push(start..self.points.len());
        ranges
    }
}

/// Parameters of the cell-aligned integration grids built internally.
///
/// Bounds and widths are expressed in standard deviations of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_range: f64,
    pub max_width: f64,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_range: 8.0,
            max_width: 0.05,
            order: 6,
        }
    }
}

impl GridSpec {
    /// Grid over the support of `source` aligned to the given cell boundaries.
    pub fn grid_for(&self, source: &GaussianSource, breaks: &[f64]) -> SampleGrid {
        let sd = source.sd();
        SampleGrid::piecewise_gauss(
            source.mean - self.half_range * sd,
            source.mean + self.half_range * sd,
            breaks,
            self.max_width * sd,
            self.order,
        )
        .expect("grid spec produces a valid grid")
    }
}

/// `f(X | Y = y)` evaluated at every grid point.
pub fn conditional_density(
    pair: &JointGaussianPair,
    y: f64,
    grid: &SampleGrid,
) -> Result<Vec<f64>> {
    if !y.is_finite() {
        return Err(Error::InvalidSi(y));
    }
    let (mean, var) = pair.conditional_x_given_y(y);
    if var <= 0.0 {
        return Err(Error::InvalidParameter(
            "conditional density is degenerate for |rho| = 1".into(),
        ));
    }
    Ok(grid
        .points()
        .iter()
        .map(|&x| normal_pdf(x, mean, var))
        .collect())
}

/// Marginal density of `X` at every grid point.
pub fn marginal_density(source: &GaussianSource, grid: &SampleGrid) -> Vec<f64> {
    grid.points()
        .iter()
        .map(|&x| normal_pdf(x, source.mean, source.variance))
        .collect()
}

/// Ordered set of correlation values at which decoder tables are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLadder {
    levels: Vec<f64>,
}

impl Default for CorrelationLadder {
    fn default() -> Self {
        Self {
            levels: vec![0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99],
        }
    }
}

impl CorrelationLadder {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("empty correlation ladder".into()));
        }
        if levels.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidParameter(
                "ladder levels must lie in [0, 1)".into(),
            ));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "ladder levels must be strictly increasing".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of the nearest level; ties go to the lower level.
    pub fn quantize(&self, rho: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::CorrelationOutOfRange(rho));
        }
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, &level) in self.levels.iter().enumerate() {
            let d = (rho - level).abs();
            // 1e-12 slack so decimal ties such as 0.5 between 0.4 and 0.6 resolve downward
            if d < best_dist - 1e-12 {
                best = i;
                best_dist = d;
            }
        }
        Ok(best)
    }
}

/// Nearest-level index of `rho` on `ladder`.
pub fn quantize_rho(rho: f64, ladder: &CorrelationLadder) -> Result<usize> {
    ladder.quantize(rho)
}
