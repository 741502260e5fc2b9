//! Per-description channels with packet loss: outcome sampling and likelihoods.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::std_normal_cdf;

/// Noise model of a description channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelKind {
    /// Binary symmetric channel with bit error rate `p`.
    Bsc { p: f64 },
    /// BPSK over additive white Gaussian noise with one-sided PSD `n0`
    /// (noise variance `n0 / 2` per bit).
    Awgn { n0: f64 },
}

/// One description's channel: index alphabet, bit width and loss probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptionChannel {
    pub kind: ChannelKind,
    pub loss_prob: f64,
    pub index_count: usize,
    pub bits: u32,
}

/// Bits needed to send an index in `0..n`.
pub fn bits_for(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

impl DescriptionChannel {
    pub fn new(kind: ChannelKind, loss_prob: f64, index_count: usize) -> Result<Self> {
        if index_count == 0 {
            return Err(Error::InvalidParameter(
                "description needs at least one index".into(),
            ));
        }
        if !(0.0..=1.0).contains(&loss_prob) {
            return Err(Error::InvalidParameter(format!(
                "loss probability {loss_prob} outside [0, 1]"
            )));
        }
        match kind {
            ChannelKind::Bsc { p } if !(0.0..=0.5).contains(&p) => {
                return Err(Error::InvalidParameter(format!(
                    "bit error rate {p} outside [0, 0.5]"
                )))
            }
            ChannelKind::Awgn { n0 } if !(n0 > 0.0 && n0.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "noise psd {n0} must be > 0"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            loss_prob,
            index_count,
            bits: bits_for(index_count),
        })
    }

    pub fn bsc(p: f64, loss_prob: f64, index_count: usize) -> Result<Self> {
        Self::new(ChannelKind::Bsc { p }, loss_prob, index_count)
    }

    pub fn awgn(n0: f64, loss_prob: f64, index_count: usize) -> Result<Self> {
        Self::new(ChannelKind::Awgn { n0 }, loss_prob, index_count)
    }

    /// BSC seen after hard BPSK decisions: `p = Q(sqrt(2 / N0))` for AWGN, identity for BSC.
    pub fn hard_decision(&self) -> Self {
        match self.kind {
            ChannelKind::Bsc { .. } => *self,
            ChannelKind::Awgn { n0 } => Self {
                kind: ChannelKind::Bsc {
                    p: std_normal_cdf(-(2.0 / n0).sqrt()),
                },
                ..*self
            },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, ChannelKind::Bsc { .. })
    }

    /// Number of distinct received indices on a BSC (`2^bits`).
    pub fn output_count(&self) -> usize {
        1usize << self.bits
    }

    /// Sends `index`: lost with probability `loss_prob`, otherwise corrupted
    /// by the channel noise.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        description: usize,
        index: usize,
        rng: &mut R,
    ) -> Result<Option<Payload>> {
        if index >= self.index_count {
            return Err(Error::IndexOutOfRange {
                description,
                index,
                count: self.index_count,
            });
        }
        if rng.random::<f64>() < self.loss_prob {
            return Ok(None);
        }
        Ok(Some(match self.kind {
            ChannelKind::Bsc { p } => {
                let mut received = index;
                for b in 0..self.bits {
                    if rng.random::<f64>() < p {
                        received ^= 1 << b;
                    }
                }
                Payload::Index(received)
            }
            ChannelKind::Awgn { n0 } => {
                let sd = (0.5 * n0).sqrt();
                let symbols = bpsk(index, self.bits)
                    .into_iter()
                    .map(|s| {
                        let z: f64 = rng.sample(StandardNormal);
                        s + sd * z
                    })
                    .collect();
                Payload::Soft(symbols)
            }
        }))
    }

    /// `P(J | I, Q)` up to a constant for AWGN. A lost description returns `1 / N_m`.
    pub fn likelihood(
        &self,
        description: usize,
        payload: Option<&Payload>,
        index: usize,
    ) -> Result<f64> {
        match (self.kind, payload) {
            (ChannelKind::Awgn { .. }, Some(_)) => {
                Ok(self.log_likelihood(description, payload, index)?.exp())
            }
            (_, None) => {
                self.check_index(description, index)?;
                Ok(1.0 / self.index_count as f64)
            }
            (ChannelKind::Bsc { p }, Some(Payload::Index(j))) => {
                self.check_index(description, index)?;
                self.check_output(description, *j)?;
                Ok(bsc_prob(p, (index ^ j).count_ones(), self.bits))
            }
            _ => Err(Error::PayloadMismatch(description)),
        }
    }

    /// Natural log of [`likelihood`](Self::likelihood), computed directly for AWGN
    /// so that distant tails do not underflow.
    pub fn log_likelihood(
        &self,
        description: usize,
        payload: Option<&Payload>,
        index: usize,
    ) -> Result<f64> {
        match (self.kind, payload) {
            (ChannelKind::Awgn { n0 }, Some(Payload::Soft(v))) => {
                self.check_index(description, index)?;
                if v.len() != self.bits as usize {
                    return Err(Error::PayloadMismatch(description));
                }
                let dist: f64 = bpsk(index, self.bits)
                    .iter()
                    .zip(v)
                    .map(|(s, r)| (s - r) * (s - r))
                    .sum();
                Ok(-dist / n0)
            }
            _ => Ok(self.likelihood(description, payload, index)?.ln()),
        }
    }

    fn check_index(&self, description: usize, index: usize) -> Result<()> {
        if index >= self.index_count {
            return Err(Error::IndexOutOfRange {
                description,
                index,
                count: self.index_count,
            });
        }
        Ok(())
    }

    fn check_output(&self, description: usize, j: usize) -> Result<()> {
        if j >= self.output_count() {
            return Err(Error::IndexOutOfRange {
                description,
                index: j,
                count: self.output_count(),
            });
        }
        Ok(())
    }

    /// `P(J = j | I = i)` for a received BSC description as an `N_m × 2^bits`
    /// row-major matrix.
    pub fn transition_matrix(&self) -> Result<Vec<f64>> {
        let ChannelKind::Bsc { p } = self.kind else {
            return Err(Error::NonDiscreteChannel);
        };
        let outputs = self.output_count();
        let mut out = Vec::with_capacity(self.index_count * outputs);
        for i in 0..self.index_count {
            for j in 0..outputs {
                out.push(bsc_prob(p, (i ^ j).count_ones(), self.bits));
            }
        }
        Ok(out)
    }
}

fn bsc_prob(p: f64, d: u32, bits: u32) -> f64 {
    p.powi(d as i32) * (1.0 - p).powi((bits - d) as i32)
}

/// BPSK symbols of `index`, most significant bit first; bit `b` maps to `1 − 2b`.
pub fn bpsk(index: usize, bits: u32) -> Vec<f64> {
    (0..bits)
        .rev()
        .map(|b| if (index >> b) & 1 == 1 { -1.0 } else { 1.0 })
        .collect()
}

/// Received payload of one description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Index(usize),
    Soft(Vec<f64>),
}

/// Realized channel output for every description; `None` marks a lost packet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelOutcome {
    pub payloads: Vec<Option<Payload>>,
}

impl ChannelOutcome {
    pub fn new(payloads: Vec<Option<Payload>>) -> Self {
        Self { payloads }
    }

    /// Outcome with every description lost.
    pub fn all_lost(descriptions: usize) -> Self {
        Self {
            payloads: vec![None; descriptions],
        }
    }

    /// Loss flags `Q_m`: true when description `m` was received.
    pub fn flags(&self) -> Vec<bool> {
        self.payloads.iter().map(Option::is_some).collect()
    }

    pub fn received_count(&self) -> usize {
        self.payloads.iter().filter(|p| p.is_some()).count()
    }

    /// Same outcome with the payloads of descriptions flagged `false` removed.
    pub fn masked(&self, keep: &[bool]) -> Self {
        Self {
            payloads: self
                .payloads
                .iter()
                .zip(keep)
                .map(|(p, &k)| if k { p.clone() } else { None })
                .collect(),
        }
    }

    /// Per-description log-likelihood vectors over each index alphabet.
    pub fn log_likelihoods(&self, channels: &[DescriptionChannel]) -> Result<Vec<Vec<f64>>> {
        check_len(channels.len(), self.payloads.len())?;
        channels
            .iter()
            .zip(&self.payloads)
            .enumerate()
            .map(|(m, (ch, payload))| {
                (0..ch.index_count)
                    .map(|i| ch.log_likelihood(m, payload.as_ref(), i))
                    .collect()
            })
            .collect()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// Sends every description of `indices` through its channel, drawing from one stream.
pub fn sample_outcome<R: Rng + ?Sized>(
    indices: &[usize],
    channels: &[DescriptionChannel],
    rng: &mut R,
) -> Result<ChannelOutcome> {
    check_len(channels.len(), indices.len())?;
    let payloads = channels
        .iter()
        .zip(indices)
        .enumerate()
        .map(|(m, (ch, &i))| ch.transmit(m, i, rng))
        .collect::<Result<_>>()?;
    Ok(ChannelOutcome { payloads })
}

/// Like [`sample_outcome`] but with the loss pattern imposed: description `m`
/// arrives (through its noise) iff `received[m]`.
pub fn sample_with_pattern<R: Rng + ?Sized>(
    indices: &[usize],
    channels: &[DescriptionChannel],
    received: &[bool],
    rng: &mut R,
) -> Result<ChannelOutcome> {
    check_len(channels.len(), indices.len())?;
    check_len(channels.len(), received.len())?;
    let payloads = channels
        .iter()
        .zip(indices)
        .zip(received)
        .enumerate()
        .map(|(m, ((ch, &i), &arrives))| {
            let lossless = DescriptionChannel {
                loss_prob: 0.0,
                ..*ch
            };
            let payload = lossless.transmit(m, i, rng)?;
            Ok(if arrives { payload } else { None })
        })
        .collect::<Result<_>>()?;
    Ok(ChannelOutcome { payloads })
}

/// Position of `received` in [`loss_patterns`].
pub fn pattern_index(received: &[bool]) -> usize {
    received.iter().fold(0, |acc, &r| (acc << 1) | r as usize)
}

/// `∏_m [(1 − q_m) μ_m + q_m (1 − μ_m)]`.
pub fn loss_pattern_prob(flags: &[bool], channels: &[DescriptionChannel]) -> Result<f64> {
    check_len(channels.len(), flags.len())?;
    Ok(flags
        .iter()
        .zip(channels)
        .map(|(&q, ch)| if q { 1.0 - ch.loss_prob } else { ch.loss_prob })
        .product())
}

/// All `2^M` loss patterns, pattern `b` having description `m` received iff bit
/// `M − 1 − m` of `b` is set.
pub fn loss_patterns(descriptions: usize) -> Vec<Vec<bool>> {
    (0..1usize << descriptions)
        .map(|b| {
            (0..descriptions)
                .map(|m| (b >> (descriptions - 1 - m)) & 1 == 1)
                .collect()
        })
        .collect()
}

/// Product of per-description likelihoods of the tuple `indices`.
pub fn joint_likelihood(
    outcome: &ChannelOutcome,
    indices: &[usize],
    channels: &[DescriptionChannel],
) -> Result<f64> {
    check_len(channels.len(), indices.len())?;
    check_len(channels.len(), outcome.payloads.len())?;
    let mut lik = 1.0;
    for (m, ((ch, payload), &i)) in channels
        .iter()
        .zip(&outcome.payloads)
        .zip(indices)
        .enumerate()
    {
        lik *= ch.likelihood(m, payload.as_ref(), i)?;
    }
    Ok(lik)
}

/// Row-major enumeration of index tuples; the first description is the most
/// significant digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSpace {
    counts: Vec<usize>,
}

impl TupleSpace {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::InvalidParameter(
                "tuple space needs at least one description with a nonzero alphabet".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn from_channels(channels: &[DescriptionChannel]) -> Result<Self> {
        Self::new(channels.iter().map(|c| c.index_count).collect())
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn descriptions(&self) -> usize {
        self.counts.len()
    }

    /// Total number of tuples `L = ∏ N_m`.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, indices: &[usize]) -> usize {
        indices
            .iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn decode(&self, mut tuple: usize) -> Vec<usize> {
        let mut out = vec![0; self.counts.len()];
        for m in (0..self.counts.len()).rev() {
            out[m] = tuple % self.counts[m];
            tuple /= self.counts[m];
        }
        out
    }

    /// Joint log-likelihood of every tuple given per-description log-likelihoods.
    pub fn tuple_log_likelihoods(&self, per_description: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0];
        for (m, lik) in per_description.iter().enumerate() {
            debug_assert_eq!(lik.len(), self.counts[m]);
            out = out
                .iter()
                .flat_map(|&acc| lik.iter().map(move |&l| acc + l))
                .collect();
        }
        out
    }
}

/// Independent RNG stream for `(seed, source, trial, description)`.
pub fn stream_rng(seed: u64, source: u64, trial: u64, description: u64) -> ChaCha8Rng {
    let mut state = splitmix(seed ^ 0x5851_f42d_4c95_7f2d);
    for part in [source, trial, description] {
        state = splitmix(state ^ splitmix(part.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_widths() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(5), 3);
        assert_eq!(bits_for(8), 3);
        assert_eq!(bits_for(9), 4);
        for n in 2..300usize {
            let b = bits_for(n);
            assert!((1usize << (b - 1)) < n && n <= (1usize << b));
        }
    }

    #[test]
    fn validation() {
        assert!(DescriptionChannel::bsc(0.6, 0.0, 4).is_err());
        assert!(DescriptionChannel::bsc(0.1, 1.1, 4).is_err());
        assert!(DescriptionChannel::awgn(0.0, 0.0, 4).is_err());
        assert!(DescriptionChannel::bsc(0.1, 0.0, 0).is_err());
    }

    #[test]
    fn certain_loss_and_noiseless() {
        let lost = vec![DescriptionChannel::bsc(0.1, 1.0, 8).unwrap(); 2];
        let clean = vec![DescriptionChannel::bsc(0.0, 0.0, 8).unwrap(); 2];
        let mut rng = stream_rng(1, 0, 0, 0);
        for t in 0..200 {
            let i = [t % 8, (t * 3) % 8];
            let o = sample_outcome(&i, &lost, &mut rng).unwrap();
            assert_eq!(o.flags(), vec![false, false]);
            let o = sample_outcome(&i, &clean, &mut rng).unwrap();
            assert_eq!(
                o.payloads,
                vec![Some(Payload::Index(i[0])), Some(Payload::Index(i[1]))]
            );
        }
        assert!(matches!(
            sample_outcome(&[8, 0], &clean, &mut rng),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn half_ber_flips_half_the_bits() {
        let ch = DescriptionChannel::bsc(0.5, 0.0, 8).unwrap();
        let mut rng = stream_rng(3, 0, 0, 0);
        let trials = 100_000;
        let mut flips = 0u64;
        for _ in 0..trials {
            let Some(Payload::Index(j)) = ch.transmit(0, 5, &mut rng).unwrap() else {
                panic!("expected an index");
            };
            flips += (j ^ 5).count_ones() as u64;
        }
        let rate = flips as f64 / (3 * trials) as f64;
        assert!((rate - 0.5).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn loss_pattern_probabilities() {
        let ch = vec![DescriptionChannel::bsc(0.0, 0.05, 8).unwrap(); 2];
        assert!((loss_pattern_prob(&[true, true], &ch).unwrap() - 0.9025).abs() < 1e-15);
        assert!((loss_pattern_prob(&[false, false], &ch).unwrap() - 0.0025).abs() < 1e-15);
        let ch3 = vec![
            DescriptionChannel::bsc(0.0, 0.05, 8).unwrap(),
            DescriptionChannel::bsc(0.0, 0.3, 4).unwrap(),
            DescriptionChannel::bsc(0.0, 0.71, 2).unwrap(),
        ];
        let total: f64 = loss_patterns(3)
            .iter()
            .map(|q| loss_pattern_prob(q, &ch3).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(loss_pattern_prob(&[true], &ch3).is_err());
    }

    #[test]
    fn empirical_loss_frequencies() {
        let ch = vec![
            DescriptionChannel::bsc(0.01, 0.05, 8).unwrap(),
            DescriptionChannel::bsc(0.01, 0.2, 8).unwrap(),
        ];
        let trials = 100_000;
        let mut counts = [0u64; 4];
        let mut rng = stream_rng(11, 0, 0, 0);
        for _ in 0..trials {
            let q = sample_outcome(&[1, 2], &ch, &mut rng).unwrap().flags();
            counts[(q[0] as usize) << 1 | q[1] as usize] += 1;
        }
        for (b, q) in loss_patterns(2).iter().enumerate() {
            let p = loss_pattern_prob(q, &ch).unwrap();
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = counts[b] as f64 / trials as f64;
            assert!((freq - p).abs() < 3.0 * sigma + 1e-12, "pattern {q:?}");
        }
    }

    #[test]
    fn bsc_likelihoods() {
        let ch = DescriptionChannel::bsc(0.01, 0.0, 8).unwrap();
        let l = ch.likelihood(0, Some(&Payload::Index(5)), 5).unwrap();
        assert!((l - 0.970299).abs() < 1e-12);
        assert_eq!(ch.likelihood(0, None, 3).unwrap(), 0.125);
        for i in 0..8 {
            let total: f64 = (0..8)
                .map(|j| ch.likelihood(0, Some(&Payload::Index(j)), i).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            ch.likelihood(0, Some(&Payload::Soft(vec![1.0; 3])), 0),
            Err(Error::PayloadMismatch(0))
        ));
        // unused patterns of a non-power-of-two alphabet stay valid outputs
        let ch5 = DescriptionChannel::bsc(0.1, 0.0, 5).unwrap();
        assert!(ch5.likelihood(0, Some(&Payload::Index(7)), 4).unwrap() > 0.0);
        let t = ch5.transition_matrix().unwrap();
        assert_eq!(t.len(), 5 * 8);
        for row in t.chunks(8) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_likelihood_is_a_product() {
        let ch = vec![
            DescriptionChannel::bsc(0.1, 0.05, 4).unwrap(),
            DescriptionChannel::bsc(0.2, 0.05, 8).unwrap(),
        ];
        let lost = ChannelOutcome::all_lost(2);
        assert!((joint_likelihood(&lost, &[1, 2], &ch).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        let clean = vec![DescriptionChannel::bsc(0.0, 0.0, 4).unwrap(); 2];
        let o = ChannelOutcome::new(vec![Some(Payload::Index(2)), Some(Payload::Index(3))]);
        assert_eq!(joint_likelihood(&o, &[2, 3], &clean).unwrap(), 1.0);
        let mixed = ChannelOutcome::new(vec![None, Some(Payload::Index(6))]);
        let direct = 0.25 * 0.2 * 0.8 * 0.8; // 6 vs 2 differ in one bit
        assert!((joint_likelihood(&mixed, &[0, 2], &ch).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn awgn_normalization_cancels_in_posteriors() {
        let n0 = 0.7;
        let ch = DescriptionChannel::awgn(n0, 0.0, 8).unwrap();
        let mut rng = stream_rng(5, 1, 2, 3);
        let prior = [0.05, 0.1, 0.2, 0.15, 0.1, 0.1, 0.2, 0.1];
        let norm = (std::f64::consts::PI * n0).sqrt().recip().powi(3);
        for _ in 0..50 {
            let payload = ch.transmit(0, 3, &mut rng).unwrap();
            let raw: Vec<f64> = (0..8)
                .map(|i| prior[i] * ch.likelihood(0, payload.as_ref(), i).unwrap())
                .collect();
            let scaled: Vec<f64> = raw.iter().map(|v| v * norm).collect();
            let (a, b) = (raw.iter().sum::<f64>(), scaled.iter().sum::<f64>());
            for (x, y) in raw.iter().zip(&scaled) {
                assert!((x / a - y / b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn awgn_payload_shape() {
        let ch = DescriptionChannel::awgn(0.5, 0.0, 8).unwrap();
        let mut rng = stream_rng(0, 0, 0, 0);
        let Some(Payload::Soft(v)) = ch.transmit(0, 6, &mut rng).unwrap() else {
            panic!("expected soft payload");
        };
        assert_eq!(v.len(), 3);
        assert_eq!(bpsk(6, 3), vec![-1.0, -1.0, 1.0]);
        assert!(matches!(
            ch.likelihood(0, Some(&Payload::Soft(vec![0.0; 2])), 0),
            Err(Error::PayloadMismatch(0))
        ));
    }

    #[test]
    fn hard_decision_error_rate() {
        let ch = DescriptionChannel::awgn(0.5, 0.1, 8).unwrap();
        let hd = ch.hard_decision();
        let ChannelKind::Bsc { p } = hd.kind else {
            panic!("expected a BSC");
        };
        // Q(2) = 0.02275013194817921
        assert!((p - 0.022750131948179).abs() < 1e-12);
        assert_eq!((hd.loss_prob, hd.index_count, hd.bits), (0.1, 8, 3));
        let mut rng = stream_rng(3, 0, 0, 0);
        let lossless = DescriptionChannel::awgn(0.5, 0.0, 2).unwrap();
        let n = 200_000;
        let mut errors = 0;
        for _ in 0..n {
            let Some(Payload::Soft(v)) = lossless.transmit(0, 0, &mut rng).unwrap() else {
                unreachable!()
            };
            errors += usize::from(v[0] < 0.0);
        }
        let rate = errors as f64 / n as f64;
        assert!((rate - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        let b = DescriptionChannel::bsc(0.1, 0.0, 4).unwrap();
        assert_eq!(b.hard_decision(), b);
    }

    #[test]
    fn tuple_space_round_trip() {
        let ts = TupleSpace::new(vec![3, 4, 2]).unwrap();
        assert_eq!(ts.len(), 24);
        for t in 0..24 {
            assert_eq!(ts.encode(&ts.decode(t)), t);
        }
        assert_eq!(ts.decode(1), vec![0, 0, 1]);
        assert_eq!(ts.decode(8), vec![1, 0, 0]);
        let lik = ts.tuple_log_likelihoods(&[
            vec![0.0, 1.0, 2.0],
            vec![0.0, 10.0, 20.0, 30.0],
            vec![0.0, 100.0],
        ]);
        for t in 0..24 {
            let d = ts.decode(t);
            assert_eq!(
                lik[t],
                d[0] as f64 + 10.0 * d[1] as f64 + 100.0 * d[2] as f64
            );
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(9, 1, 2, 0).random()).collect();
        let b: u64 = stream_rng(9, 1, 2, 0).random();
        assert_eq!(a[0], b);
        let c: u64 = stream_rng(9, 1, 2, 1).random();
        let d: u64 = stream_rng(9, 2, 1, 0).random();
        assert_ne!(b, c);
        assert_ne!(b, d);
    }

    #[test]
    fn imposed_patterns() {
        let chans = vec![
            DescriptionChannel::bsc(0.0, 0.9, 8).unwrap(),
            DescriptionChannel::bsc(0.0, 0.9, 8).unwrap(),
        ];
        let mut rng = stream_rng(3, 0, 0, 0);
        for (b, q) in loss_patterns(2).iter().enumerate() {
            assert_eq!(pattern_index(q), b);
            let o = sample_with_pattern(&[5, 2], &chans, q, &mut rng).unwrap();
            assert_eq!(&o.flags(), q);
            if q[0] {
                assert_eq!(o.payloads[0], Some(Payload::Index(5)));
            }
        }
    }
}
