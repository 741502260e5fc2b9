//! Rate-distortion bound for two descriptions with decoder side information,
//! and its average over independent description losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates in bits per sample, source statistics and loss probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub r1: f64,
    pub r2: f64,
    pub rho: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl BoundQuery {
    /// Unit-variance source and side information.
    pub fn unit(rho: f64, r1: f64, r2: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let q = Self {
            r1,
            r2,
            rho,
            var_x: 1.0,
            var_y: 1.0,
            mu1,
            mu2,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 >= 0.0 && self.r2 >= 0.0) || !self.r1.is_finite() || !self.r2.is_finite() {
            return Err(Error::InvalidParameter(
                "rates must be finite and nonnegative".into(),
            ));
        }
        if !(self.var_x > 0.0 && self.var_y > 0.0) {
            return Err(Error::InvalidParameter("variances must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::CorrelationOutOfRange(self.rho));
        }
        for mu in [self.mu1, self.mu2] {
            if !(0.0..=1.0).contains(&mu) {
                return Err(Error::InvalidParameter(format!(
                    "loss probability {mu} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Smallest achievable distortion from description 1 alone.
    pub fn side_bound_1(&self) -> Result<f64> {
        Ok(beta(self)? * (-2.0 * self.r1).exp2())
    }

    pub fn side_bound_2(&self) -> Result<f64> {
        Ok(beta(self)? * (-2.0 * self.r2).exp2())
    }
}

/// Base of the exponential in the excess-rate term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentBase {
    #[default]
    Two,
    Natural,
}

/// How the single-description distortions enter the loss average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossWeighting {
    /// Losing description 1 leaves distortion `D2`, and vice versa.
    #[default]
    Cross,
    /// `μ1 D1 + μ2 D2`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub base: ExponentBase,
    pub weighting: LossWeighting,
    /// Points per axis of the initial log-spaced grid.
    pub grid: usize,
    /// Golden-section sweeps over both axes after the grid search.
    pub refine_rounds: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            base: ExponentBase::Two,
            weighting: LossWeighting::Cross,
            grid: 200,
            refine_rounds: 4,
        }
    }
}

/// Conditional variance of `X` given `Y`: `(σx²σy² − σxy²) / σy²`.
pub fn beta(q: &BoundQuery) -> Result<f64> {
    if !(q.var_y > 0.0) {
        return Err(Error::InvalidParameter("var_y must be positive".into()));
    }
    let cov = q.rho * (q.var_x * q.var_y).sqrt();
    Ok((q.var_x * q.var_y - cov * cov) / q.var_y)
}

/// Smallest central distortion achievable together with side distortions `(d1, d2)`.
pub fn central_bound(q: &BoundQuery, d1: f64, d2: f64) -> Result<f64> {
    central_bound_with(q, d1, d2, ExponentBase::Two)
}

pub fn central_bound_with(q: &BoundQuery, d1: f64, d2: f64, base: ExponentBase) -> Result<f64> {
    q.validate()?;
    let b = beta(q)?;
    central_unchecked(b, q.r1, q.r2, d1, d2, base).ok_or_else(|| {
        Error::OutsideAchievableRegion(format!(
            "side distortions ({d1}, {d2}) at rates ({}, {})",
            q.r1, q.r2
        ))
    })
}

fn central_unchecked(
    b: f64,
    r1: f64,
    r2: f64,
    d1: f64,
    d2: f64,
    base: ExponentBase,
) -> Option<f64> {
    // small relative slack so the grid corners at the side bounds stay feasible
    let slack = 1.0 - 1e-12;
    if !(d1 >= b * (-2.0 * r1).exp2() * slack && d2 >= b * (-2.0 * r2).exp2() * slack) {
        return None;
    }
    let rate = -2.0 * (r1 + r2);
    let pi = (1.0 - d1 / b) * (1.0 - d2 / b);
    let excess = match base {
        ExponentBase::Two => rate.exp2(),
        ExponentBase::Natural => rate.exp(),
    };
    let delta = d1 * d2 / (b * b) - excess;
    if delta < 0.0 || pi < 0.0 {
        return None;
    }
    let denom = 1.0 - (pi.sqrt() - delta.sqrt()).powi(2);
    if !(denom > 0.0) {
        return None;
    }
    Some(b * rate.exp2() / denom)
}

/// Optimal operating point of the loss-averaged bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub d_min_av: f64,
    pub d_min_av_db: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
    /// Best value on the grid before refinement.
    pub grid_value: f64,
}

struct Objective {
    b: f64,
    q: BoundQuery,
    opts: BoundOptions,
}

impl Objective {
    fn eval(&self, d1: f64, d2: f64) -> Option<(f64, f64)> {
        let q = &self.q;
        let d12 = central_unchecked(self.b, q.r1, q.r2, d1, d2, self.opts.base)?;
        let (m1, m2) = (q.mu1, q.mu2);
        let single = match self.opts.weighting {
            LossWeighting::Cross => m1 * (1.0 - m2) * d2 + m2 * (1.0 - m1) * d1,
            LossWeighting::Literal => m1 * d1 + m2 * d2,
        };
        Some((
            m1 * m2 * self.b + single + (1.0 - m1) * (1.0 - m2) * d12,
            d12,
        ))
    }

    fn value(&self, d1: f64, d2: f64) -> f64 {
        self.eval(d1, d2).map_or(f64::INFINITY, |v| v.0)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Golden-section minimum of `f` on `[lo, hi]` in log coordinates.
fn golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c.exp()), f(d.exp()));
    for _ in 0..80 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d.exp());
        }
    }
    if fc < fd {
        (c.exp(), fc)
    } else {
        (d.exp(), fd)
    }
}

/// `min over (D1, D2)` of the loss-averaged distortion, with the default options.
pub fn min_avg_distortion(q: &BoundQuery) -> Result<BoundResult> {
    min_avg_distortion_with(q, &BoundOptions::default())
}

pub fn min_avg_distortion_with(q: &BoundQuery, opts: &BoundOptions) -> Result<BoundResult> {
    q.validate()?;
    if opts.grid == 0 {
        return Err(Error::InvalidParameter(
            "grid must have at least one point".into(),
        ));
    }
    let b = beta(q)?;
    if !(b > 0.0) {
        return Err(Error::OutsideAchievableRegion(
            "side information determines the source".into(),
        ));
    }
    let obj = Objective {
        b,
        q: *q,
        opts: *opts,
    };
    let (lo1, lo2) = (q.side_bound_1()?, q.side_bound_2()?);
    let g1 = log_grid(lo1, b, opts.grid);
    let g2 = log_grid(lo2, b, opts.grid);
    let mut best = (f64::INFINITY, 0, 0);
    for (i, &d1) in g1.iter().enumerate() {
        for (j, &d2) in g2.iter().enumerate() {
            let v = obj.value(d1, d2);
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::OutsideAchievableRegion(
            "no feasible side distortions on the grid".into(),
        ));
    }
    let grid_value = best.0;
    let (mut d1, mut d2) = (g1[best.1], g2[best.2]);
    let mut value = grid_value;
    // bracket: neighboring grid points, widened each round toward the bounds
    let bracket = |g: &[f64], i: usize| (g[i.saturating_sub(1)], g[(i + 1).min(g.len() - 1)]);
    let (mut b1, mut b2) = (bracket(&g1, best.1), bracket(&g2, best.2));
    for _ in 0..opts.refine_rounds {
        if b1.0 < b1.1 {
            let (x, v) = golden(|x| obj.value(x, d2), b1.0, b1.1);
            if v < value {
                d1 = x;
                value = v;
            }
        }
        if b2.0 < b2.1 {
            let (y, v) = golden(|y| obj.value(d1, y), b2.0, b2.1);
            if v < value {
                d2 = y;
                value = v;
            }
        }
        b1 = ((d1 / 1.05).max(lo1), (d1 * 1.05).min(b));
        b2 = ((d2 / 1.05).max(lo2), (d2 * 1.05).min(b));
    }
    let (value, d12) = obj.eval(d1, d2).expect("refined point is feasible");
    Ok(BoundResult {
        d_min_av: value,
        d_min_av_db: 10.0 * value.log10(),
        d1,
        d2,
        d12,
        grid_value,
    })
}
