//! MMSE decoding of one source with quantized side information.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelOutcome, DescriptionChannel, TupleSpace};
use crate::codec::{CodecBundle, SiContext};
use crate::error::{Error, Result};
use crate::prob::{normal_interval_prob, GridSpec, JointGaussianPair};

/// Posterior over index tuples `P(I | Ỹ, Q, J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub probs: Vec<f64>,
}

impl Posterior {
    pub fn uniform(tuples: usize) -> Self {
        Self {
            probs: vec![1.0 / tuples as f64; tuples],
        }
    }

    /// Unit mass on `tuple`.
    pub fn indicator(tuples: usize, tuple: usize) -> Self {
        let mut probs = vec![0.0; tuples];
        probs[tuple] = 1.0;
        Self { probs }
    }

    /// Largest absolute difference to another posterior.
    pub fn max_diff(&self, other: &Posterior) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Log joint likelihood of every tuple under `outcome`.
pub fn tuple_log_likelihoods(
    outcome: &ChannelOutcome,
    channels: &[DescriptionChannel],
    space: &TupleSpace,
) -> Result<Vec<f64>> {
    Ok(space.tuple_log_likelihoods(&outcome.log_likelihoods(channels)?))
}

/// Bayes' rule in the log domain: `probs ∝ exp(log_lik) · prior`, restricted to
/// tuples with nonzero prior.
pub fn combine(log_lik: &[f64], prior: &[f64]) -> Result<Posterior> {
    if log_lik.len() != prior.len() {
        return Err(Error::LengthMismatch {
            expected: prior.len(),
            actual: log_lik.len(),
        });
    }
    let max = log_lik
        .iter()
        .zip(prior)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InconsistentTables);
    }
    let mut probs: Vec<f64> = log_lik
        .iter()
        .zip(prior)
        .map(|(&l, &p)| if p > 0.0 { (l - max).exp() * p } else { 0.0 })
        .collect();
    let s: f64 = probs.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InconsistentTables);
    }
    probs.iter_mut().for_each(|v| *v /= s);
    Ok(Posterior { probs })
}

/// `P(I | Ỹ, Q, J)` with the prior taken from the bundle's tables.
pub fn posterior(
    outcome: &ChannelOutcome,
    si: SiContext,
    bundle: &CodecBundle,
) -> Result<Posterior> {
    let (prior, _) = bundle.tables.lookup(si)?;
    let log_lik = tuple_log_likelihoods(outcome, &bundle.channels, bundle.ia.space())?;
    combine(&log_lik, prior)
}

/// `X̂ = Σ_I P(I | ·) C(I | Ỹ)`.
pub fn reconstruct(post: &Posterior, si: SiContext, bundle: &CodecBundle) -> Result<f64> {
    let (_, codebook) = bundle.tables.lookup(si)?;
    Ok(expectation(post, codebook))
}

pub(crate) fn expectation(post: &Posterior, codebook: &[f64]) -> f64 {
    post.probs
        .iter()
        .zip(codebook)
        .filter(|(&p, _)| p > 0.0)
        .map(|(p, c)| p * c)
        .sum()
}

/// Posterior and reconstruction in one call.
pub fn decode(
    outcome: &ChannelOutcome,
    si: SiContext,
    bundle: &CodecBundle,
) -> Result<(Posterior, f64)> {
    let post = posterior(outcome, si, bundle)?;
    let xhat = reconstruct(&post, si, bundle)?;
    Ok((post, xhat))
}

/// Checks the table-driven decoder against `E[X | Ỹ, Q, J]` computed directly
/// from the source density, the quantizers, the assignment and the channel,
/// for every received-index outcome, loss pattern and SI level.
///
/// Only BSC channels are supported. Returns the largest absolute deviation.
pub fn mse_optimality_check(bundle: &CodecBundle, rho_level: usize) -> Result<f64> {
    let rho = bundle.ladder().level(rho_level);
    let pair = JointGaussianPair::unit(rho)?;
    let channels = &bundle.channels;
    if channels.iter().any(|c| !c.is_discrete()) {
        return Err(Error::NonDiscreteChannel);
    }
    let space = bundle.ia.space();
    // a denser grid than the tables use, aligned to the source cells
    let grid = GridSpec {
        half_range: 10.0,
        max_width: 0.02,
        order: 10,
    }
    .grid_for(&pair.source(), &bundle.quantizer.thresholds);
    let source = pair.source();
    let si_q = &bundle.si_quantizer;
    let transitions = channels
        .iter()
        .map(|c| c.transition_matrix())
        .collect::<Result<Vec<_>>>()?;

    // enumerate per-description outcomes: Some(j) received, None lost
    let per_desc: Vec<Vec<Option<usize>>> = channels
        .iter()
        .map(|c| {
            let mut v: Vec<Option<usize>> = (0..c.output_count()).map(Some).collect();
            v.push(None);
            v
        })
        .collect();
    let mut outcomes: Vec<Vec<Option<usize>>> = vec![vec![]];
    for options in &per_desc {
        outcomes = outcomes
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(*o);
                    p
                })
            })
            .collect();
    }

    let mut worst: f64 = 0.0;
    for level in 0..si_q.levels() {
        let (lo, hi) = si_q.bounds(level);
        for received in &outcomes {
            // P(J | I, Q) for each tuple, lost descriptions contributing a constant
            let lik: Vec<f64> = (0..space.len())
                .map(|t| {
                    let idx = space.decode(t);
                    received
                        .iter()
                        .enumerate()
                        .map(|(m, r)| match r {
                            Some(j) => transitions[m][idx[m] * channels[m].output_count() + j],
                            None => 1.0 / channels[m].index_count as f64,
                        })
                        .product()
                })
                .collect();
            let mut num = 0.0;
            let mut den = 0.0;
            for (&x, &w) in grid.points().iter().zip(grid.weights()) {
                let k = bundle.quantizer.cell_of(x);
                let p_cell: f64 = bundle.ia.row(k).iter().zip(&lik).map(|(a, b)| a * b).sum();
                if p_cell == 0.0 {
                    continue;
                }
                let (m, s) = pair.conditional_y_given_x(x);
                let weight = w * source.pdf(x) * normal_interval_prob(lo, hi, m, s) * p_cell;
                num += weight * x;
                den += weight;
            }
            if den < 1e-250 {
                continue;
            }
            let direct = num / den;
            let outcome = ChannelOutcome::new(
                received
                    .iter()
                    .map(|r| r.map(crate::channel::Payload::Index))
                    .collect(),
            );
            let si = SiContext::Level {
                rho_level,
                si_level: level,
            };
            match decode(&outcome, si, bundle) {
                Ok((_, xhat)) => worst = worst.max((xhat - direct).abs()),
                Err(Error::InconsistentTables) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_outcome, stream_rng, Payload};
    use crate::codec::DecoderSi;
    use crate::test_support::bundle_with;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn noiseless_posterior_is_an_indicator() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.0, 0.0);
        let o = ChannelOutcome::new(vec![Some(Payload::Index(1)), Some(Payload::Index(1))]);
        let si = SiContext::Level {
            rho_level: 4,
            si_level: 3,
        };
        let (post, xhat) = decode(&o, si, &b).unwrap();
        assert_eq!(post.probs, vec![0.0, 0.0, 0.0, 1.0]);
        let (_, code) = b.tables.lookup(si).unwrap();
        assert_eq!(xhat, code[3]);
    }

    #[test]
    fn all_lost_returns_the_prior() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05);
        let o = ChannelOutcome::all_lost(2);
        for si in [
            SiContext::None,
            SiContext::Level {
                rho_level: 4,
                si_level: 5,
            },
        ] {
            let post = posterior(&o, si, &b).unwrap();
            let (prior, _) = b.tables.lookup(si).unwrap();
            for (a, p) in post.probs.iter().zip(prior) {
                assert!((a - p).abs() < 1e-12);
            }
        }
        let xhat = reconstruct(
            &posterior(&o, SiContext::None, &b).unwrap(),
            SiContext::None,
            &b,
        )
        .unwrap();
        assert!(xhat.abs() < 1e-9);
    }

    #[test]
    fn lost_descriptions_with_fine_si_track_the_conditional_mean() {
        let b = bundle_with(4, 1024, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05);
        let level = b.si_quantizer.cell_of(1.0);
        let si = SiContext::Level {
            rho_level: 4,
            si_level: level,
        };
        let (_, xhat) = decode(&ChannelOutcome::all_lost(2), si, &b).unwrap();
        let centroid = b.si_quantizer.centroids()[level];
        assert!((xhat - 0.8 * centroid).abs() < 0.02);
    }

    #[test]
    fn posterior_matches_brute_force_bayes() {
        let b = bundle_with(4, 16, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05);
        let si_level = 9;
        let si = SiContext::Level {
            rho_level: 4,
            si_level,
        };
        let (prior, _) = b.tables.lookup(si).unwrap();
        for j0 in 0..2 {
            for j1 in [None, Some(0), Some(1)] {
                let o = ChannelOutcome::new(vec![Some(Payload::Index(j0)), j1.map(Payload::Index)]);
                let post = posterior(&o, si, &b).unwrap();
                // first principles: P(J|I) from bit flips, loss contributes no information
                let mut joint = [0.0; 4];
                for t in 0..4 {
                    let (i0, i1) = (t / 2, t % 2);
                    let mut l = if i0 == j0 { 0.9 } else { 0.1 };
                    if let Some(j1) = j1 {
                        l *= if i1 == j1 { 0.9 } else { 0.1 };
                    }
                    joint[t] = l * prior[t];
                }
                let s: f64 = joint.iter().sum();
                for t in 0..4 {
                    assert!((post.probs[t] - joint[t] / s).abs() < 1e-9);
                }
                assert!((post.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn decoder_equals_direct_conditional_mean() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05);
        for level in [0, 3, 4] {
            let dev = mse_optimality_check(&b, level).unwrap();
            assert!(dev < 1e-8, "level {level}: {dev}");
        }
        // binned assignment
        let b = bundle_with(4, 8, &[3], &[0, 1, 2, 0], 0.05, 0.1);
        assert!(mse_optimality_check(&b, 4).unwrap() < 1e-8);
    }

    #[test]
    fn zero_correlation_si_is_ignored_bit_exactly() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05);
        let mut rng = stream_rng(2, 0, 0, 0);
        for t in 0..200 {
            let o = sample_outcome(&[t % 2, (t / 2) % 2], &b.channels, &mut rng).unwrap();
            let (_, blind) = decode(&o, SiContext::None, &b).unwrap();
            for si_level in 0..8 {
                let si = SiContext::Level {
                    rho_level: 0,
                    si_level,
                };
                assert_eq!(decode(&o, si, &b).unwrap().1, blind);
            }
        }
    }

    #[test]
    fn perturbed_reconstruction_is_worse() {
        let b = bundle_with(8, 16, &[2, 2], &[0, 1, 3, 2, 0, 1, 3, 2], 0.05, 0.05);
        let pair = JointGaussianPair::unit(0.8).unwrap();
        let mut rng = stream_rng(21, 0, 0, 0);
        let (mut mse, mut mse_shift) = (0.0, 0.0);
        let trials = 100_000;
        for _ in 0..trials {
            let y: f64 = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = pair.rho * y + (1.0 - pair.rho * pair.rho).sqrt() * z;
            let k = b.quantizer.cell_of(x);
            let o = sample_outcome(&b.ia.indices_of(k), &b.channels, &mut rng).unwrap();
            let si = SiContext::Level {
                rho_level: 4,
                si_level: b.si_quantizer.cell_of(y),
            };
            let (_, xhat) = decode(&o, si, &b).unwrap();
            mse += (x - xhat).powi(2);
            mse_shift += (x - xhat - 0.01).powi(2);
        }
        assert!(mse_shift > mse);
    }

    #[test]
    fn more_received_descriptions_never_hurt_on_average() {
        let b = bundle_with(8, 16, &[2, 2], &[0, 1, 3, 2, 0, 1, 3, 2], 0.05, 0.0);
        let r = b.evaluate(0.8, DecoderSi::Ladder(4)).unwrap();
        let both = r.pattern(&[true, true]).unwrap();
        let one = r.pattern(&[true, false]).unwrap();
        let none = r.pattern(&[false, false]).unwrap();
        assert!(both <= one && one <= none);
    }

    #[test]
    fn inconsistent_tables_are_reported() {
        // noiseless channel, received tuple never used by the assignment
        let b = bundle_with(3, 4, &[2, 2], &[0, 1, 3], 0.0, 0.0);
        let o = ChannelOutcome::new(vec![Some(Payload::Index(1)), Some(Payload::Index(0))]);
        assert_eq!(
            posterior(&o, SiContext::None, &b).unwrap_err(),
            Error::InconsistentTables
        );
    }
}
