//! Choosing which neighbor serves as side information for each source.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asym::{combine, decode, expectation, posterior, tuple_log_likelihoods};
use crate::channel::{loss_patterns, pattern_index, sample_with_pattern, ChannelOutcome};
use crate::codec::{outcome_space_for, CodecBundle, OutcomeSpace, SiContext};
use crate::error::{Error, Result};
use crate::prob::JointGaussianPair;
use crate::symmetric::{CrossSourceTables, CrossTableSet};
use rand_distr::StandardNormal;

/// Selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiMethod {
    Distance,
    MutualInfo,
    MinDistortion,
}

impl SiMethod {
    pub fn name(self) -> &'static str {
        match self {
            SiMethod::Distance => "distance",
            SiMethod::MutualInfo => "mutual_info",
            SiMethod::MinDistortion => "min_distortion",
        }
    }
}

/// Chosen SI source per target, with the criterion value of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiAssignment {
    pub map: Vec<usize>,
    pub method: SiMethod,
    /// `scores[u][t]`; `None` on the diagonal.
    pub scores: Vec<Vec<Option<f64>>>,
}

impl SiAssignment {
    /// Picks the best-scoring candidate per row. Equal scores go to the larger
    /// `tie_break` value, then to the lowest index.
    fn from_scores(
        method: SiMethod,
        scores: Vec<Vec<Option<f64>>>,
        maximize: bool,
        tie_break: Option<&[Vec<f64>]>,
    ) -> Self {
        let map = scores
            .iter()
            .enumerate()
            .map(|(u, row)| {
                let secondary = |t: usize| tie_break.map_or(0.0, |r| r[u][t]);
                let mut best: Option<(usize, f64)> = None;
                for (t, s) in row.iter().enumerate() {
                    if let Some(s) = *s {
                        let better = match best {
                            None => true,
                            Some((bt, b)) => {
                                let strictly = if maximize { s > b } else { s < b };
                                strictly || (s == b && secondary(t) > secondary(bt))
                            }
                        };
                        if better {
                            best = Some((t, s));
                        }
                    }
                }
                best.map_or(0, |(t, _)| t)
            })
            .collect();
        Self {
            map,
            method,
            scores,
        }
    }
}

fn check_sources(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "selection needs at least two sources".into(),
        ));
    }
    Ok(())
}

/// Nearest neighbor in Euclidean distance.
pub fn select_min_distance(positions: &[[f64; 2]]) -> Result<SiAssignment> {
    check_sources(positions.len())?;
    if positions.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite position".into()));
    }
    let scores = positions
        .iter()
        .enumerate()
        .map(|(u, a)| {
            positions
                .iter()
                .enumerate()
                .map(|(t, b)| (t != u).then(|| (a[0] - b[0]).hypot(a[1] - b[1])))
                .collect()
        })
        .collect();
    Ok(SiAssignment::from_scores(
        SiMethod::Distance,
        scores,
        false,
        None,
    ))
}

/// `P(I^u, I^t)` and `E[X^u 1{I^u} 1{I^t}]`, row-major `L^u × L^t`.
fn tuple_joint(
    bundle_u: &CodecBundle,
    bundle_t: &CodecBundle,
    cross: &CrossSourceTables,
) -> (Vec<f64>, Vec<f64>) {
    let (ku, kt) = (cross.cells_u, cross.cells_s);
    let (lu, lt) = (bundle_u.ia.tuples(), bundle_t.ia.tuples());
    let mut mass_l = vec![0.0; ku * lt];
    let mut first_l = vec![0.0; ku * lt];
    for l in 0..ku {
        for k in 0..kt {
            let (m, f) = (cross.joint_mass[l * kt + k], cross.joint_first[l * kt + k]);
            for (it, &w) in bundle_t.ia.row(k).iter().enumerate() {
                if w > 0.0 {
                    mass_l[l * lt + it] += w * m;
                    first_l[l * lt + it] += w * f;
                }
            }
        }
    }
    let mut mass = vec![0.0; lu * lt];
    let mut first = vec![0.0; lu * lt];
    for l in 0..ku {
        for (iu, &w) in bundle_u.ia.row(l).iter().enumerate() {
            if w > 0.0 {
                for it in 0..lt {
                    mass[iu * lt + it] += w * mass_l[l * lt + it];
                    first[iu * lt + it] += w * first_l[l * lt + it];
                }
            }
        }
    }
    (mass, first)
}

/// Outcome rows `P(J | I, q)` of one loss pattern.
fn pattern_rows(space: &OutcomeSpace, pattern: usize) -> Vec<&[f64]> {
    (0..space.len())
        .filter(|&o| space.pattern_of(o) == pattern)
        .map(|o| space.cond_row(o))
        .collect()
}

/// `P(J^u, J^t | q^u, q^t)` and `E[X^u 1{J^u} 1{J^t} | q^u, q^t]`, `O^u × O^t`.
fn outcome_joint(
    rows_u: &[&[f64]],
    rows_t: &[&[f64]],
    mass: &[f64],
    first: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let lt = rows_t.first().map_or(0, |r| r.len());
    let lu = mass.len() / lt.max(1);
    // contract over I^t first
    let mut mass_t = vec![0.0; lu * rows_t.len()];
    let mut first_t = vec![0.0; lu * rows_t.len()];
    for iu in 0..lu {
        for (ot, row) in rows_t.iter().enumerate() {
            let mut m = 0.0;
            let mut f = 0.0;
            for it in 0..lt {
                m += row[it] * mass[iu * lt + it];
                f += row[it] * first[iu * lt + it];
            }
            mass_t[iu * rows_t.len() + ot] = m;
            first_t[iu * rows_t.len() + ot] = f;
        }
    }
    let n_t = rows_t.len();
    let mut joint = vec![0.0; rows_u.len() * n_t];
    let mut num = vec![0.0; rows_u.len() * n_t];
    for (ou, row) in rows_u.iter().enumerate() {
        for (iu, &w) in row.iter().enumerate() {
            if w > 0.0 {
                for ot in 0..n_t {
                    joint[ou * n_t + ot] += w * mass_t[iu * n_t + ot];
                    num[ou * n_t + ot] += w * first_t[iu * n_t + ot];
                }
            }
        }
    }
    (joint, num)
}

fn mutual_information(joint: &[f64], rows: usize, cols: usize) -> f64 {
    let mut pu = vec![0.0; rows];
    let mut pt = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            pu[r] += joint[r * cols + c];
            pt[c] += joint[r * cols + c];
        }
    }
    let mut mi = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let p = joint[r * cols + c];
            if p > 0.0 {
                mi += p * (p / (pu[r] * pt[c])).log2();
            }
        }
    }
    // negative values are summation round-off
    mi.max(0.0)
}

/// Pattern statistics of an ordered pair `(u, t)`.
struct PairEnumeration {
    space_u: OutcomeSpace,
    space_t: OutcomeSpace,
    mass: Vec<f64>,
    first: Vec<f64>,
}

impl PairEnumeration {
    fn new(
        bundle_u: &CodecBundle,
        bundle_t: &CodecBundle,
        cross: &CrossSourceTables,
    ) -> Result<Self> {
        let (mass, first) = tuple_joint(bundle_u, bundle_t, cross);
        Ok(Self {
            space_u: outcome_space_for(&bundle_u.channels)?,
            space_t: outcome_space_for(&bundle_t.channels)?,
            mass,
            first,
        })
    }

    /// `(I(J^u; J^t | q) in bits, E[(X^u − X̂^u)²] of the partial-SI decoder)`.
    fn evaluate(&self, q_u: usize, q_t: usize, second_moment: f64) -> (f64, f64) {
        let rows_u = pattern_rows(&self.space_u, q_u);
        let rows_t = pattern_rows(&self.space_t, q_t);
        let (joint, num) = outcome_joint(&rows_u, &rows_t, &self.mass, &self.first);
        let mi = mutual_information(&joint, rows_u.len(), rows_t.len());
        let captured: f64 = joint
            .iter()
            .zip(&num)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &n)| n * n / p)
            .sum();
        (mi, second_moment - captured)
    }
}

fn pattern_of_flags(flags: &[bool], descriptions: usize) -> Result<usize> {
    if flags.len() != descriptions {
        return Err(Error::LengthMismatch {
            expected: descriptions,
            actual: flags.len(),
        });
    }
    Ok(pattern_index(flags))
}

/// `I(J^u; J^t | Q^u = q_u, Q^t = q_t)` in bits, over BSC channels.
pub fn pairwise_mi(
    bundle_u: &CodecBundle,
    bundle_t: &CodecBundle,
    cross: &CrossSourceTables,
    q_u: &[bool],
    q_t: &[bool],
) -> Result<f64> {
    let pair = PairEnumeration::new(bundle_u, bundle_t, cross)?;
    let pu = pattern_of_flags(q_u, bundle_u.channels.len())?;
    let pt = pattern_of_flags(q_t, bundle_t.channels.len())?;
    Ok(pair.evaluate(pu, pt, cross.second_moment).0)
}

/// Expected squared error of [`partial_si_reconstruct`] for `u` with `t` as
/// side information, given both loss patterns. Exact over BSC channels.
pub fn pair_distortion(
    bundle_u: &CodecBundle,
    bundle_t: &CodecBundle,
    cross: &CrossSourceTables,
    q_u: &[bool],
    q_t: &[bool],
) -> Result<f64> {
    let pair = PairEnumeration::new(bundle_u, bundle_t, cross)?;
    let pu = pattern_of_flags(q_u, bundle_u.channels.len())?;
    let pt = pattern_of_flags(q_t, bundle_t.channels.len())?;
    Ok(pair.evaluate(pu, pt, cross.second_moment).1)
}

/// Monte-Carlo estimate of [`pair_distortion`], usable with any channel.
pub fn pair_distortion_monte_carlo<R: Rng + ?Sized>(
    bundle_u: &CodecBundle,
    bundle_t: &CodecBundle,
    cross: &CrossSourceTables,
    q_u: &[bool],
    q_t: &[bool],
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let pair = JointGaussianPair::new(
        bundle_u.quantizer.source.variance,
        bundle_t.quantizer.source.variance,
        cross.rho,
    )?;
    let mut total = 0.0;
    for _ in 0..trials {
        let zt: f64 = rng.sample(StandardNormal);
        let xt = bundle_t.quantizer.source.mean + pair.var_y.sqrt() * zt;
        let (mean, var) = pair.conditional_x_given_y(xt);
        let zu: f64 = rng.sample(StandardNormal);
        let xu = mean + var.sqrt() * zu;
        let iu = bundle_u.ia.indices_of(bundle_u.quantizer.cell_of(xu));
        let it = bundle_t.ia.indices_of(bundle_t.quantizer.cell_of(xt));
        let ou = sample_with_pattern(&iu, &bundle_u.channels, q_u, rng)?;
        let ot = sample_with_pattern(&it, &bundle_t.channels, q_t, rng)?;
        let xhat = partial_si_reconstruct(&ou, &ot, bundle_u, bundle_t, cross)?;
        total += (xu - xhat).powi(2);
    }
    Ok(total / trials as f64)
}

/// MMSE estimate of `X^u` from its own outcome and the neighbor's raw outcome,
/// through the neighbor's cell posterior.
pub fn partial_si_reconstruct(
    outcome_u: &ChannelOutcome,
    outcome_t: &ChannelOutcome,
    bundle_u: &CodecBundle,
    bundle_t: &CodecBundle,
    cross: &CrossSourceTables,
) -> Result<f64> {
    if cross.is_independent() {
        return Ok(decode(outcome_u, SiContext::None, bundle_u)?.1);
    }
    let neighbor = posterior(outcome_t, SiContext::None, bundle_t)?;
    let cells = cross.neighbor_cells(&neighbor);
    let ks = cross.cells_s;
    let lu = bundle_u.ia.tuples();
    let mut prior = vec![0.0; lu];
    let mut codebook = vec![0.0; lu];
    for iu in 0..lu {
        let mut p = 0.0;
        let mut n = 0.0;
        for (k, &w) in cells.iter().enumerate() {
            let a = cross.idx_given_cell[iu * ks + k];
            p += w * a;
            n += w * a * cross.cent_given_cell[iu * ks + k];
        }
        prior[iu] = p;
        codebook[iu] = if p > 0.0 { n / p } else { 0.0 };
    }
    let log_lik = tuple_log_likelihoods(outcome_u, &bundle_u.channels, bundle_u.ia.space())?;
    let post = combine(&log_lik, &prior)?;
    Ok(expectation(&post, &codebook))
}

/// Mutual information and partial-SI distortion of every
/// `(correlation level, q^u, q^t)` for one codec shared by all sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTables {
    pub levels: usize,
    pub patterns: usize,
    /// Bits; `NaN` when the channels are not discrete.
    pub mi: Vec<f64>,
    pub distortion: Vec<f64>,
}

/// Monte-Carlo settings for non-discrete channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloSpec {
    pub trials: usize,
    pub seed: u64,
}

impl SelectionTables {
    /// Exact tables over BSC channels; other channels need `monte_carlo` and
    /// leave the mutual information undefined.
    pub fn build(
        bundle: &CodecBundle,
        cross: &CrossTableSet,
        monte_carlo: Option<MonteCarloSpec>,
    ) -> Result<Self> {
        let m = bundle.channels.len();
        let patterns = loss_patterns(m);
        let np = patterns.len();
        let discrete = bundle.channels.iter().all(|c| c.is_discrete());
        let per_level = cross
            .levels
            .par_iter()
            .enumerate()
            .map(|(level, c)| -> Result<(Vec<f64>, Vec<f64>)> {
                let mut mi = vec![f64::NAN; np * np];
                let mut dist = vec![0.0; np * np];
                if discrete {
                    let pair = PairEnumeration::new(bundle, bundle, c)?;
                    for qu in 0..np {
                        for qt in 0..np {
                            let (i, d) = pair.evaluate(qu, qt, c.second_moment);
                            mi[qu * np + qt] = i;
                            dist[qu * np + qt] = d;
                        }
                    }
                } else {
                    let spec = monte_carlo.ok_or(Error::NonDiscreteChannel)?;
                    for qu in 0..np {
                        for qt in 0..np {
                            let mut rng = crate::channel::stream_rng(
                                spec.seed,
                                level as u64,
                                (qu * np + qt) as u64,
                                0,
                            );
                            dist[qu * np + qt] = pair_distortion_monte_carlo(
                                bundle,
                                bundle,
                                c,
                                &patterns[qu],
                                &patterns[qt],
                                spec.trials,
                                &mut rng,
                            )?;
                        }
                    }
                }
                Ok((mi, dist))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mi = Vec::with_capacity(per_level.len() * np * np);
        let mut distortion = Vec::with_capacity(per_level.len() * np * np);
        for (a, b) in per_level {
            mi.extend(a);
            distortion.extend(b);
        }
        Ok(Self {
            levels: cross.levels.len(),
            patterns: np,
            mi,
            distortion,
        })
    }

    fn idx(&self, level: usize, q_u: usize, q_t: usize) -> usize {
        (level * self.patterns + q_u) * self.patterns + q_t
    }

    pub fn mi(&self, level: usize, q_u: usize, q_t: usize) -> f64 {
        self.mi[self.idx(level, q_u, q_t)]
    }

    pub fn distortion(&self, level: usize, q_u: usize, q_t: usize) -> f64 {
        self.distortion[self.idx(level, q_u, q_t)]
    }

    fn scores(
        &self,
        candidates: Candidates,
        patterns: &[usize],
        value: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Vec<Vec<Option<f64>>>> {
        let n = patterns.len();
        check_sources(n)?;
        let rho_levels = candidates.levels;
        for m in [rho_levels.len(), candidates.rho.len()] {
            if m != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: m,
                });
            }
        }
        if rho_levels.iter().any(|r| r.len() != n) || candidates.rho.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "candidate matrices must be square".into(),
            ));
        }
        if let Some(&p) = patterns.iter().find(|&&p| p >= self.patterns) {
            return Err(Error::InvalidParameter(format!(
                "loss pattern {p} out of range"
            )));
        }
        if let Some(&l) = rho_levels.iter().flatten().find(|&&l| l >= self.levels) {
            return Err(Error::InvalidParameter(format!(
                "correlation level {l} out of range"
            )));
        }
        Ok((0..n)
            .map(|u| {
                (0..n)
                    .map(|t| (t != u).then(|| value(rho_levels[u][t], patterns[u], patterns[t])))
                    .collect()
            })
            .collect())
    }
}

/// Pairwise ladder levels and true correlations of the candidates.
#[derive(Debug, Clone, Copy)]
pub struct Candidates<'a> {
    /// `levels[u][t]`: ladder level of the pair's correlation.
    pub levels: &'a [Vec<usize>],
    /// `rho[u][t]`: unquantized correlation, used to break equal scores.
    pub rho: &'a [Vec<f64>],
}

/// `s(u) = argmax_t I(J^u; J^t | Q)`. `patterns[u]` indexes [`loss_patterns`].
///
/// Scores come from the tables of the quantized correlation, so candidates on
/// the same level with the same pattern tie; the more correlated one wins.
pub fn select_max_mi(
    tables: &SelectionTables,
    candidates: Candidates,
    patterns: &[usize],
) -> Result<SiAssignment> {
    if tables.mi.iter().any(|v| v.is_nan()) {
        return Err(Error::NonDiscreteChannel);
    }
    let scores = tables.scores(candidates, patterns, |l, a, b| tables.mi(l, a, b))?;
    Ok(SiAssignment::from_scores(
        SiMethod::MutualInfo,
        scores,
        true,
        Some(candidates.rho),
    ))
}

/// `s(u) = argmin_t E[(X^u − X̂^u(J^u | J^t))² | Q]`, ties as in [`select_max_mi`].
pub fn select_min_distortion(
    tables: &SelectionTables,
    candidates: Candidates,
    patterns: &[usize],
) -> Result<SiAssignment> {
    let scores = tables.scores(candidates, patterns, |l, a, b| tables.distortion(l, a, b))?;
    Ok(SiAssignment::from_scores(
        SiMethod::MinDistortion,
        scores,
        false,
        Some(candidates.rho),
    ))
}
