//! Monte-Carlo experiments: asymmetric decoding of one source with side
//! information, and iterative decoding of a sensor-network scenario.

mod asymmetric;
mod scenario;
mod symmetric;

pub use asymmetric::{
    conditional_entropy_rates, run_asym_experiment, AsymConfig, AsymRun, AsymVariant,
};
pub use scenario::{generate_scenario, GaussianField, WsnScenario};
pub use symmetric::{run_sym_experiment, SymConfig, SymContext, SymRun, SymVariant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Trials per reduction chunk. Fixed so results do not depend on the thread count.
pub const CHUNK: u64 = 1024;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `10 log10(mean / variance)`.
    pub fn db(&self, variance: f64) -> f64 {
        10.0 * (self.mean / variance).log10()
    }

    /// Standard error of [`Estimate::db`] by the delta method.
    pub fn se_db(&self) -> f64 {
        10.0 / std::f64::consts::LN_10 * self.se / self.mean
    }
}

/// Running sums of a fixed set of per-trial metrics and their cross products.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub n: u64,
    sum: Vec<f64>,
    prod: Vec<f64>,
}

impl Accumulator {
    pub fn new(metrics: usize) -> Self {
        Self {
            n: 0,
            sum: vec![0.0; metrics],
            prod: vec![0.0; metrics * metrics],
        }
    }

    pub fn metrics(&self) -> usize {
        self.sum.len()
    }

    pub fn push(&mut self, values: &[f64]) {
        let k = self.metrics();
        self.n += 1;
        for i in 0..k {
            self.sum[i] += values[i];
            for j in 0..k {
                self.prod[i * k + j] += values[i] * values[j];
            }
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.prod.iter_mut().zip(&other.prod) {
            *a += b;
        }
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return 0.0;
        }
        let k = self.metrics();
        let (mi, mj) = (self.sum[i] / n, self.sum[j] / n);
        (self.prod[i * k + j] - n * mi * mj) / (n - 1.0)
    }

    pub fn estimate(&self, i: usize) -> Estimate {
        let n = self.n as f64;
        Estimate {
            mean: self.sum[i] / n,
            se: (self.cov(i, i).max(0.0) / n).sqrt(),
        }
    }

    /// Paired difference `metric i − metric j`.
    pub fn difference(&self, i: usize, j: usize) -> Estimate {
        let n = self.n as f64;
        let var = (self.cov(i, i) + self.cov(j, j) - 2.0 * self.cov(i, j)).max(0.0);
        Estimate {
            mean: (self.sum[i] - self.sum[j]) / n,
            se: (var / n).sqrt(),
        }
    }

    /// Paired difference in dB, `10 log10(mean_i / mean_j)`, with its delta-method error.
    pub fn ratio_db(&self, i: usize, j: usize) -> Estimate {
        let n = self.n as f64;
        let (mi, mj) = (self.sum[i] / n, self.sum[j] / n);
        let var = self.cov(i, i) / (mi * mi) + self.cov(j, j) / (mj * mj)
            - 2.0 * self.cov(i, j) / (mi * mj);
        Estimate {
            mean: 10.0 * (mi / mj).log10(),
            se: 10.0 / std::f64::consts::LN_10 * (var.max(0.0) / n).sqrt(),
        }
    }
}

/// Runs `trial(t, out)` for `t in 0..trials`, reducing chunk by chunk in order.
pub(crate) fn run_chunked<F>(trials: u64, metrics: usize, trial: F) -> Result<Accumulator>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::new(metrics);
            let mut buf = vec![0.0; metrics];
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                trial(t, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Accumulator::new(metrics);
    for p in &partial {
        total.merge(p);
    }
    Ok(total)
}

/// One configuration's Monte-Carlo summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub label: String,
    pub trials: u64,
    /// Average distortion under the random loss process.
    pub d_av: Estimate,
    pub d_av_db: f64,
    /// Per-description distortion when only that description arrives.
    pub side: Vec<Estimate>,
    /// Mean of `side`, with the error of the per-trial mean.
    pub d_side: Option<Estimate>,
    /// All descriptions received.
    pub d_central: Option<Estimate>,
    /// `H(I_m | Ỹ)` in bits.
    pub rates: Vec<f64>,
    /// Mean decoder iterations (iterative decoders only).
    pub mean_iterations: Option<f64>,
    pub wall_time_s: f64,
}
