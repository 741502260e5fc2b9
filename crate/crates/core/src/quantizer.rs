//! Lloyd scalar quantizers and the cell-probability computations built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::prob::{
    conditional_density, normal_interval_prob, std_normal_cdf, std_normal_pdf, GaussianSource,
    JointGaussianPair, SampleGrid,
};

const LLOYD_MAX_ITERS: usize = 500;
const LLOYD_REL_TOL: f64 = 1e-9;

/// A scalar quantizer: sorted codewords, the thresholds between them, and the
/// probability of each cell under the source it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarQuantizer {
    pub codewords: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub cell_probs: Vec<f64>,
    pub source: GaussianSource,
}

/// Trace of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydReport {
    pub iterations: usize,
    pub mse_history: Vec<f64>,
    pub converged: bool,
}

/// Truncated Gaussian moments `∫_a^b x^n f(x) dx`, n = 0, 1, 2.
fn partial_moments(source: &GaussianSource, lo: f64, hi: f64) -> [f64; 3] {
    let mu = source.mean;
    let sd = source.sd();
    let za = (lo - mu) / sd;
    let zb = (hi - mu) / sd;
    let (pa, pb) = (std_normal_pdf(za), std_normal_pdf(zb));
    // z·φ(z) vanishes at ±∞
    let zpa = if za.is_finite() { za * pa } else { 0.0 };
    let zpb = if zb.is_finite() { zb * pb } else { 0.0 };
    let m0 = normal_interval_prob(lo, hi, mu, sd);
    let m1 = mu * m0 + sd * (pa - pb);
    let m2 = (mu * mu + sd * sd) * m0 + 2.0 * mu * sd * (pa - pb) + sd * sd * (zpa - zpb);
    [m0, m1, m2]
}

impl ScalarQuantizer {
    /// Lloyd design for a Gaussian source with `k` levels.
    ///
    /// Codewords start at the uniform quantiles of the source; cell moments are
    /// the exact truncated-Gaussian integrals.
    pub fn lloyd(source: &GaussianSource, k: usize) -> Result<Self> {
        Self::lloyd_with_report(source, k).map(|(q, _)| q)
    }

    pub fn lloyd_with_report(source: &GaussianSource, k: usize) -> Result<(Self, LloydReport)> {
        if k < 1 {
            return Err(Error::InvalidParameter(
                "quantizer needs at least one level".into(),
            ));
        }
        let normal = Normal::new(source.mean, source.sd())
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut codewords: Vec<f64> = (0..k)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / k as f64))
            .collect();
        let mut thresholds = Vec::new();
        let mut history: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < LLOYD_MAX_ITERS {
            iterations += 1;
            thresholds = codewords.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            let mut mse = 0.0;
            for (cell, c) in codewords.iter_mut().enumerate() {
                let (lo, hi) = cell_bounds(&thresholds, cell);
                let [m0, m1, m2] = partial_moments(source, lo, hi);
                if m0 > 0.0 {
                    *c = m1 / m0;
                    mse += m2 - m1 * m1 / m0;
                }
            }
            if let Some(&prev) = history.last() {
                debug_assert!(mse <= prev * (1.0 + 1e-12), "Lloyd MSE increased");
                if (prev - mse).abs() <= LLOYD_REL_TOL * prev {
                    history.push(mse);
                    converged = true;
                    break;
                }
            }
            history.push(mse);
            if k == 1 {
                converged = true;
                break;
            }
        }
        let cell_probs = (0..k)
            .map(|cell| {
                let (lo, hi) = cell_bounds(&thresholds, cell);
                normal_interval_prob(lo, hi, source.mean, source.sd())
            })
            .collect();
        Ok((
            Self {
                codewords,
                thresholds,
                cell_probs,
                source: *source,
            },
            LloydReport {
                iterations,
                mse_history: history,
                converged,
            },
        ))
    }

    pub fn levels(&self) -> usize {
        self.codewords.len()
    }

    /// Cell containing `x`; boundary points belong to the lower cell.
    pub fn cell_of(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t < x)
    }

    /// `(lo, hi]` interval of a cell, with infinite outer bounds.
    pub fn bounds(&self, cell: usize) -> (f64, f64) {
        cell_bounds(&self.thresholds, cell)
    }

    /// Mean squared error under the training source, in closed form.
    pub fn mse(&self) -> f64 {
        (0..self.levels())
            .map(|cell| {
                let (lo, hi) = self.bounds(cell);
                let [m0, m1, m2] = partial_moments(&self.source, lo, hi);
                let c = self.codewords[cell];
                m2 - 2.0 * c * m1 + c * c * m0
            })
            .sum()
    }

    /// Centroid of each cell under the training source.
    pub fn centroids(&self) -> Vec<f64> {
        (0..self.levels())
            .map(|cell| {
                let (lo, hi) = self.bounds(cell);
                let [m0, m1, _] = partial_moments(&self.source, lo, hi);
                if m0 > 0.0 {
                    m1 / m0
                } else {
                    self.codewords[cell]
                }
            })
            .collect()
    }

    /// `P(X̃_k | Y = y)` for every cell, by quadrature of `f(X | Y = y)`.
    pub fn cell_probs_given_si(
        &self,
        pair: &JointGaussianPair,
        y: f64,
        grid: &SampleGrid,
    ) -> Result<Vec<f64>> {
        let density = conditional_density(pair, y, grid)?;
        Ok(grid
            .cell_ranges(&self.thresholds)
            .into_iter()
            .map(|r| r.map(|i| grid.weights()[i] * density[i]).sum())
            .collect())
    }

    /// `f(X | Ỹ = level)` on the grid, where `self` is the SI quantizer
    /// trained on the `Y` marginal of `pair`.
    pub fn si_conditional_density(
        &self,
        pair: &JointGaussianPair,
        level: usize,
        grid: &SampleGrid,
    ) -> Result<Vec<f64>> {
        if level >= self.levels() {
            return Err(Error::InvalidParameter(format!(
                "SI level {level} out of range for {} levels",
                self.levels()
            )));
        }
        let (lo, hi) = self.bounds(level);
        let sd_y = pair.var_y.sqrt();
        let p_level = normal_interval_prob(lo, hi, 0.0, sd_y);
        if p_level < 1e-300 {
            return Err(Error::DegenerateSiCell(level));
        }
        let source = pair.source();
        Ok(grid
            .points()
            .iter()
            .map(|&x| {
                let (m, s) = pair.conditional_y_given_x(x);
                source.pdf(x) * normal_interval_prob(lo, hi, m, s) / p_level
            })
            .collect())
    }
}

/// `(lo, hi]` bounds of `cell` given sorted thresholds.
pub(crate) fn cell_bounds(thresholds: &[f64], cell: usize) -> (f64, f64) {
    let lo = if cell == 0 {
        f64::NEG_INFINITY
    } else {
        thresholds[cell - 1]
    };
    let hi = thresholds.get(cell).copied().unwrap_or(f64::INFINITY);
    (lo, hi)
}

/// Joint moments of a source quantizer cell `k` and a partner-quantizer cell `j`
/// under a jointly Gaussian pair:
/// `mass[k][j] = P(X ∈ V(k), Y ∈ V'(j))`, `first = E[X·1·1]`, `second = E[X²·1·1]`.
///
/// Matrices are row-major `K × J`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCellMoments {
    pub rows: usize,
    pub cols: usize,
    pub mass: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl JointCellMoments {
    /// Integrates over `x` on `grid` (which should be aligned to the thresholds
    /// of `qx`) with closed-form `P(Y ∈ V'(j) | x)`.
    pub fn compute(
        qx: &ScalarQuantizer,
        qy: &ScalarQuantizer,
        pair: &JointGaussianPair,
        grid: &SampleGrid,
    ) -> Self {
        let rows = qx.levels();
        let cols = qy.levels();
        let source = pair.source();
        let ranges = grid.cell_ranges(&qx.thresholds);
        let per_row: Vec<[Vec<f64>; 3]> = ranges
            .into_par_iter()
            .map(|range| {
                let mut mass = vec![0.0; cols];
                let mut first = vec![0.0; cols];
                let mut second = vec![0.0; cols];
                let mut probs = vec![0.0; cols];
                for i in range {
                    let x = grid.points()[i];
                    let base = grid.weights()[i] * source.pdf(x);
                    let (m, s) = pair.conditional_y_given_x(x);
                    interval_probs(&qy.thresholds, m, s, &mut probs);
                    for j in 0..cols {
                        let w = base * probs[j];
                        mass[j] += w;
                        first[j] += w * x;
                        second[j] += w * x * x;
                    }
                }
                [mass, first, second]
            })
            .collect();
        let mut out = Self {
            rows,
            cols,
            mass: Vec::with_capacity(rows * cols),
            first: Vec::with_capacity(rows * cols),
            second: Vec::with_capacity(rows * cols),
        };
        for [m, f, s] in per_row {
            out.mass.extend(m);
            out.first.extend(f);
            out.second.extend(s);
        }
        out
    }

    #[inline]
    pub fn idx(&self, k: usize, j: usize) -> usize {
        k * self.cols + j
    }

    /// Column sums of `mass`: the partner-cell probabilities.
    pub fn col_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for k in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self.mass[self.idx(k, j)];
            }
        }
        out
    }

    /// Row sums of `mass`: the source-cell probabilities.
    pub fn row_mass(&self) -> Vec<f64> {
        self.mass
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    /// `E[X²]` restricted to the grid support.
    pub fn second_moment(&self) -> f64 {
        self.second.iter().sum()
    }
}

/// Probabilities of `N(mean, sd²)` over the cells delimited by `thresholds`.
///
/// Uses the lower CDF left of the mean and the upper tail right of it so that
/// small cell probabilities keep their relative precision.
pub(crate) fn interval_probs(thresholds: &[f64], mean: f64, sd: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), thresholds.len() + 1);
    if sd == 0.0 {
        out.fill(0.0);
        out[thresholds.partition_point(|&t| t < mean)] = 1.0;
        return;
    }
    // (value, is_upper_tail) at each threshold
    let tail = |t: f64| {
        let z = (t - mean) / sd;
        if z > 0.0 {
            (std_normal_cdf(-z), true)
        } else {
            (std_normal_cdf(z), false)
        }
    };
    let mut prev = (0.0, false); // Φ(-∞) = 0
    for (j, slot) in out.iter_mut().enumerate() {
        let next = if j < thresholds.len() {
            tail(thresholds[j])
        } else {
            (0.0, true) // upper tail at +∞ is 0
        };
        *slot = match (prev.1, next.1) {
            (false, false) => next.0 - prev.0,
            (true, true) => prev.0 - next.0,
            (false, true) => 1.0 - prev.0 - next.0,
            (true, false) => 0.0,
        }
        .max(0.0);
        prev = next;
    }
}
