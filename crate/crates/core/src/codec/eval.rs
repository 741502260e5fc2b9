//! Analytic distortion over discrete channels and the annealing weights.
//!
//! Every channel outcome `O` (received index or loss, per description) is
//! enumerated. Within a loss pattern the decoder only sees likelihood ratios,
//! so outcome probabilities are stored conditioned on the pattern.

use serde::{Deserialize, Serialize};

use crate::channel::{loss_pattern_prob, loss_patterns, DescriptionChannel, TupleSpace};
use crate::error::{Error, Result};
use crate::quantizer::JointCellMoments;

use super::{IndexAssignment, SiTables};

/// Enumeration of all channel outcomes for a set of BSC descriptions.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    tuples: TupleSpace,
    outcome_counts: Vec<usize>,
    /// `P(O | I, pattern(O))`, row-major `outcomes × tuples`.
    cond: Vec<f64>,
    pattern_of: Vec<usize>,
    patterns: Vec<Vec<bool>>,
    pattern_probs: Vec<f64>,
}

impl OutcomeSpace {
    pub fn new(channels: &[DescriptionChannel]) -> Result<Self> {
        let tuples = TupleSpace::from_channels(channels)?;
        let transitions = channels
            .iter()
            .map(|c| c.transition_matrix())
            .collect::<Result<Vec<_>>>()?;
        let outcome_counts: Vec<usize> = channels.iter().map(|c| c.output_count() + 1).collect();
        let count: usize = outcome_counts.iter().product();
        let m_count = channels.len();
        let patterns = loss_patterns(m_count);
        let pattern_probs = patterns
            .iter()
            .map(|q| loss_pattern_prob(q, channels))
            .collect::<Result<Vec<_>>>()?;
        let l = tuples.len();
        let mut cond = vec![0.0; count * l];
        let mut pattern_of = vec![0; count];
        let mut outcome = vec![0; m_count];
        for o in 0..count {
            decode_mixed(o, &outcome_counts, &mut outcome);
            let mut pid = 0;
            for m in 0..m_count {
                let received = outcome[m] + 1 < outcome_counts[m];
                pid = (pid << 1) | received as usize;
            }
            pattern_of[o] = pid;
            for t in 0..l {
                let indices = tuples.decode(t);
                let mut p = 1.0;
                for m in 0..m_count {
                    if outcome[m] + 1 < outcome_counts[m] {
                        let outputs = outcome_counts[m] - 1;
                        p *= transitions[m][indices[m] * outputs + outcome[m]];
                    }
                }
                cond[o * l + t] = p;
            }
        }
        Ok(Self {
            tuples,
            outcome_counts,
            cond,
            pattern_of,
            patterns,
            pattern_probs,
        })
    }

    pub fn len(&self) -> usize {
        self.pattern_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern_of.is_empty()
    }

    pub fn tuples(&self) -> usize {
        self.tuples.len()
    }

    pub fn patterns(&self) -> &[Vec<bool>] {
        &self.patterns
    }

    pub fn pattern_probs(&self) -> &[f64] {
        &self.pattern_probs
    }

    pub fn pattern_of(&self, outcome: usize) -> usize {
        self.pattern_of[outcome]
    }

    /// `P(O | I, pattern)` for every tuple.
    pub fn cond_row(&self, outcome: usize) -> &[f64] {
        let l = self.tuples();
        &self.cond[outcome * l..(outcome + 1) * l]
    }

    /// Per-description outcome: `Some(j)` for a received index, `None` for a loss.
    pub fn describe(&self, outcome: usize) -> Vec<Option<usize>> {
        let mut digits = vec![0; self.outcome_counts.len()];
        decode_mixed(outcome, &self.outcome_counts, &mut digits);
        digits
            .iter()
            .zip(&self.outcome_counts)
            .map(|(&d, &n)| if d + 1 < n { Some(d) } else { None })
            .collect()
    }

    /// `X̂(O, j)` of a decoder with the given tables, row-major `outcomes × N_SI`.
    pub fn reconstructions(&self, dec: &SiTables) -> Vec<f64> {
        let l = self.tuples();
        let n_si = dec.si_levels;
        let mut out = vec![0.0; self.len() * n_si];
        for o in 0..self.len() {
            let row = self.cond_row(o);
            for j in 0..n_si {
                let prior = dec.prior(j);
                let code = dec.codebook(j);
                let mut num = 0.0;
                let mut den = 0.0;
                for t in 0..l {
                    let w = row[t] * prior[t];
                    num += w * code[t];
                    den += w;
                }
                out[o * n_si + j] = if den > 0.0 { num / den } else { 0.0 };
            }
        }
        out
    }
}

fn decode_mixed(mut value: usize, radices: &[usize], out: &mut [usize]) {
    for m in (0..radices.len()).rev() {
        out[m] = value % radices[m];
        value /= radices[m];
    }
}

/// Average distortion of one loss pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternDistortion {
    pub received: Vec<bool>,
    pub probability: f64,
    /// Distortion conditioned on this pattern.
    pub distortion: f64,
}

/// Source-encoder / channel split of the average distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub d_se: f64,
    pub d_ch: f64,
    /// `d_se + d_ch`.
    pub d_av: f64,
    /// Single-pass expectation of the squared error, without the split.
    pub d_av_direct: f64,
    pub second_moment: f64,
    pub per_pattern: Vec<PatternDistortion>,
}

impl DistortionReport {
    pub fn d_av_db(&self) -> f64 {
        10.0 * self.d_av.log10()
    }

    /// Distortion conditioned on the given received flags.
    pub fn pattern(&self, received: &[bool]) -> Option<f64> {
        self.per_pattern
            .iter()
            .find(|p| p.received == received)
            .map(|p| p.distortion)
    }
}

/// Joint `P(I, Ỹ_j)` and `Σ_k P(I|k) E[X 1_k 1_j]`, row-major `N_SI × L`.
fn joint_tables(ia: &IndexAssignment, moments: &JointCellMoments) -> (Vec<f64>, Vec<f64>) {
    let l = ia.tuples();
    let n_si = moments.cols;
    let mut mass = vec![0.0; n_si * l];
    let mut first = vec![0.0; n_si * l];
    for k in 0..moments.rows {
        let row = ia.row(k);
        for j in 0..n_si {
            let a = moments.mass[moments.idx(k, j)];
            let b = moments.first[moments.idx(k, j)];
            for (t, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    mass[j * l + t] += p * a;
                    first[j * l + t] += p * b;
                }
            }
        }
    }
    (mass, first)
}

/// Per-outcome expected squared error of each source cell:
/// `G[O][k] = Σ_j E[(X − X̂(O, j))² 1_k 1_j]`, row-major `outcomes × K`.
fn cell_errors(moments: &JointCellMoments, xhat: &[f64], outcomes: usize) -> Vec<f64> {
    let (k_count, n_si) = (moments.rows, moments.cols);
    let mut g = vec![0.0; outcomes * k_count];
    for o in 0..outcomes {
        let xr = &xhat[o * n_si..(o + 1) * n_si];
        for k in 0..k_count {
            let base = k * n_si;
            let mut acc = 0.0;
            for j in 0..n_si {
                let x = xr[j];
                acc += moments.second[base + j] - 2.0 * x * moments.first[base + j]
                    + x * x * moments.mass[base + j];
            }
            g[o * k_count + k] = acc;
        }
    }
    g
}

/// Annealing weights `𝒲(I, k) = ∂D_av / ∂P(I|X̃_k)` with the decoder held at
/// `dec`, row-major `K × L`.
///
/// `moments` describe the true source/SI statistics; `dec` may be built at a
/// different correlation.
pub fn da_weights(
    ia: &IndexAssignment,
    moments: &JointCellMoments,
    outcomes: &OutcomeSpace,
    dec: &SiTables,
) -> Vec<f64> {
    weights_and_distortion(ia, moments, outcomes, dec).0
}

pub(crate) fn weights_and_distortion(
    ia: &IndexAssignment,
    moments: &JointCellMoments,
    outcomes: &OutcomeSpace,
    dec: &SiTables,
) -> (Vec<f64>, f64) {
    let xhat = outcomes.reconstructions(dec);
    let g = cell_errors(moments, &xhat, outcomes.len());
    let (k_count, l) = (moments.rows, ia.tuples());
    let mut w = vec![0.0; k_count * l];
    for o in 0..outcomes.len() {
        let pq = outcomes.pattern_probs[outcomes.pattern_of(o)];
        if pq == 0.0 {
            continue;
        }
        let row = outcomes.cond_row(o);
        let go = &g[o * k_count..(o + 1) * k_count];
        for t in 0..l {
            let p = pq * row[t];
            if p == 0.0 {
                continue;
            }
            for k in 0..k_count {
                w[k * l + t] += p * go[k];
            }
        }
    }
    let d = w.iter().zip(ia.table()).map(|(a, b)| a * b).sum();
    (w, d)
}

/// Distortion of the MMSE decoder matched to `ia` and `moments`.
pub fn evaluate_distortion(
    ia: &IndexAssignment,
    moments: &JointCellMoments,
    outcomes: &OutcomeSpace,
) -> DistortionReport {
    let dec = SiTables::from_moments(ia, moments);
    evaluate_with_decoder(ia, moments, outcomes, &dec)
}

/// Distortion when the source statistics are `moments` and the decoder uses `dec`.
pub fn evaluate_with_decoder(
    ia: &IndexAssignment,
    moments: &JointCellMoments,
    outcomes: &OutcomeSpace,
    dec: &SiTables,
) -> DistortionReport {
    let l = ia.tuples();
    let n_si = moments.cols;
    let (mass, first) = joint_tables(ia, moments);
    let second_moment = moments.second_moment();

    let mut d_se = second_moment;
    let mut centroid = vec![0.0; n_si * l];
    for i in 0..n_si * l {
        if mass[i] > 0.0 {
            centroid[i] = first[i] / mass[i];
            d_se -= first[i] * centroid[i];
        }
    }

    let xhat = outcomes.reconstructions(dec);
    let g = cell_errors(moments, &xhat, outcomes.len());
    let k_count = moments.rows;
    let n_pat = outcomes.patterns.len();
    let mut ch_by_pattern = vec![0.0; n_pat];
    let mut direct_by_pattern = vec![0.0; n_pat];
    for o in 0..outcomes.len() {
        let pid = outcomes.pattern_of(o);
        let row = outcomes.cond_row(o);
        let xr = &xhat[o * n_si..(o + 1) * n_si];
        let go = &g[o * k_count..(o + 1) * k_count];
        for t in 0..l {
            let p = row[t];
            if p == 0.0 {
                continue;
            }
            let mut ch = 0.0;
            for j in 0..n_si {
                let m = mass[j * l + t];
                if m > 0.0 {
                    let diff = centroid[j * l + t] - xr[j];
                    ch += m * diff * diff;
                }
            }
            ch_by_pattern[pid] += p * ch;
            let mut direct = 0.0;
            for k in 0..k_count {
                direct += ia.get(k, t) * go[k];
            }
            direct_by_pattern[pid] += p * direct;
        }
    }
    let d_ch: f64 = ch_by_pattern
        .iter()
        .zip(&outcomes.pattern_probs)
        .map(|(d, p)| d * p)
        .sum();
    let d_av_direct = direct_by_pattern
        .iter()
        .zip(&outcomes.pattern_probs)
        .map(|(d, p)| d * p)
        .sum();
    let per_pattern = outcomes
        .patterns
        .iter()
        .zip(&outcomes.pattern_probs)
        .zip(&ch_by_pattern)
        .map(|((q, &p), &ch)| PatternDistortion {
            received: q.clone(),
            probability: p,
            distortion: d_se + ch,
        })
        .collect();
    DistortionReport {
        d_se,
        d_ch,
        d_av: d_se + d_ch,
        d_av_direct,
        second_moment,
        per_pattern,
    }
}

/// Analytic evaluation entry point that rejects non-discrete channels.
pub fn outcome_space_for(channels: &[DescriptionChannel]) -> Result<OutcomeSpace> {
    if channels.iter().any(|c| !c.is_discrete()) {
        return Err(Error::NonDiscreteChannel);
    }
    OutcomeSpace::new(channels)
}
