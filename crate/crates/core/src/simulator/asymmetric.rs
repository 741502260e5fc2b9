//! One source decoded with quantized side information.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_chunked, Accumulator, Estimate, ExperimentResult};
use crate::asym::decode;
use crate::channel::{sample_with_pattern, stream_rng};
use crate::codec::{moments_for, CodecBundle, DecoderSi, SiContext};
use crate::error::{Error, Result};
use crate::prob::{GridSpec, JointGaussianPair};

/// One encoder/decoder combination under test.
#[derive(Debug, Clone)]
pub struct AsymVariant<'a> {
    pub label: String,
    pub bundle: &'a CodecBundle,
    pub decoder: DecoderSi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymConfig {
    /// Correlation of the source and the side information actually drawn.
    pub rho_real: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Results of variants run on the same draws, so differences are paired.
#[derive(Debug, Clone)]
pub struct AsymRun {
    pub results: Vec<ExperimentResult>,
    acc: Accumulator,
    stride: usize,
}

impl AsymRun {
    /// `D_av(i) − D_av(j)`, linear.
    pub fn paired_difference(&self, i: usize, j: usize) -> Estimate {
        self.acc.difference(i * self.stride, j * self.stride)
    }

    /// `10 log10(D_av(i) / D_av(j))`.
    pub fn paired_db(&self, i: usize, j: usize) -> Estimate {
        self.acc.ratio_db(i * self.stride, j * self.stride)
    }
}

/// `H(I_m | Ỹ)` in bits for every description, with `Ỹ` the SI quantizer output.
pub fn conditional_entropy_rates(
    bundle: &CodecBundle,
    pair: &JointGaussianPair,
    grid: &GridSpec,
) -> Vec<f64> {
    let jm = moments_for(&bundle.quantizer, &bundle.si_quantizer, pair, grid);
    let space = bundle.ia.space();
    let counts = space.counts();
    let tuples: Vec<Vec<usize>> = (0..space.len()).map(|t| space.decode(t)).collect();
    counts
        .iter()
        .enumerate()
        .map(|(m, &n)| {
            let mut h = 0.0;
            for j in 0..jm.cols {
                let mut p = vec![0.0; n];
                for k in 0..jm.rows {
                    let mass = jm.mass[jm.idx(k, j)];
                    if mass > 0.0 {
                        for (t, &w) in bundle.ia.row(k).iter().enumerate() {
                            p[tuples[t][m]] += w * mass;
                        }
                    }
                }
                let pj: f64 = p.iter().sum();
                if pj > 0.0 {
                    h -= p
                        .iter()
                        .filter(|&&v| v > 0.0)
                        .map(|&v| v * (v / pj).log2())
                        .sum::<f64>();
                }
            }
            h.max(0.0)
        })
        .collect()
}

fn context(decoder: DecoderSi, bundle: &CodecBundle, y: f64) -> SiContext {
    match decoder {
        DecoderSi::Blind => SiContext::None,
        DecoderSi::Ladder(rho_level) => SiContext::Level {
            rho_level,
            si_level: bundle.si_quantizer.cell_of(y),
        },
    }
}

/// Monte-Carlo average, side and central distortions of each variant.
///
/// Every variant sees the same source, side information, loss pattern and
/// channel noise in each trial. Side and central distortions force the
/// pattern on the same noisy payloads.
pub fn run_asym_experiment(variants: &[AsymVariant], config: &AsymConfig) -> Result<AsymRun> {
    let first = variants
        .first()
        .ok_or_else(|| Error::InvalidParameter("no variants to run".into()))?;
    if config.trials < 2 {
        return Err(Error::InvalidParameter(
            "at least two trials are needed".into(),
        ));
    }
    let channels = &first.bundle.channels;
    if variants.iter().any(|v| &v.bundle.channels != channels) {
        return Err(Error::InvalidParameter(
            "paired variants must share their channels".into(),
        ));
    }
    for v in variants {
        if let DecoderSi::Ladder(l) = v.decoder {
            if l >= v.bundle.tables.levels.len() {
                return Err(Error::InvalidParameter(format!(
                    "no tables for correlation level {l}"
                )));
            }
        }
    }
    let pair = JointGaussianPair::unit(config.rho_real)?;
    let m = channels.len();
    // per variant: average, side 1..M, side mean, central
    let stride = m + 3;
    let all = vec![true; m];
    let singles: Vec<Vec<bool>> = (0..m).map(|d| (0..m).map(|e| e == d).collect()).collect();
    let start = Instant::now();
    let acc = run_chunked(config.trials, stride * variants.len(), |t, out| {
        let mut rng = stream_rng(config.seed, 0, t, 0);
        let y: f64 = pair.var_y.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let (mean, var) = pair.conditional_x_given_y(y);
        let x = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let flags: Vec<bool> = channels
            .iter()
            .map(|c| rng.random::<f64>() >= c.loss_prob)
            .collect();
        for (v, variant) in variants.iter().enumerate() {
            let b = variant.bundle;
            let mut noise = stream_rng(config.seed, 0, t, 1);
            let indices = b.ia.indices_of(b.quantizer.cell_of(x));
            let full = sample_with_pattern(&indices, channels, &all, &mut noise)?;
            let si = context(variant.decoder, b, y);
            let err = |keep: &[bool]| -> Result<f64> {
                Ok((x - decode(&full.masked(keep), si, b)?.1).powi(2))
            };
            let o = &mut out[v * stride..(v + 1) * stride];
            o[0] = err(&flags)?;
            let mut side_sum = 0.0;
            for (d, single) in singles.iter().enumerate() {
                o[1 + d] = err(single)?;
                side_sum += o[1 + d];
            }
            o[m + 1] = side_sum / m as f64;
            o[m + 2] = err(&all)?;
        }
        Ok(())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let results = variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            let base = v * stride;
            let d_av = acc.estimate(base);
            let variance = variant.bundle.quantizer.source.variance;
            ExperimentResult {
                label: variant.label.clone(),
                trials: acc.n,
                d_av,
                d_av_db: d_av.db(variance),
                side: (0..m).map(|d| acc.estimate(base + 1 + d)).collect(),
                d_side: Some(acc.estimate(base + m + 1)),
                d_central: Some(acc.estimate(base + m + 2)),
                rates: conditional_entropy_rates(
                    variant.bundle,
                    &pair,
                    &variant.bundle.metadata.grid,
                ),
                mean_iterations: None,
                wall_time_s: elapsed,
            }
        })
        .collect();
    Ok(AsymRun {
        results,
        acc,
        stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DescriptionChannel;
    use crate::codec::IndexAssignment;
    use crate::test_support::bundle_with;

    fn cfg(rho: f64, trials: u64) -> AsymConfig {
        AsymConfig {
            rho_real: rho,
            trials,
            seed: 3,
        }
    }

    #[test]
    fn monte_carlo_agrees_with_analytic_evaluation() {
        let b = bundle_with(8, 16, &[4, 4], &[0, 5, 10, 15, 3, 6, 9, 12], 0.02, 0.1);
        for (rho, dec) in [
            (0.8, DecoderSi::Ladder(4)),
            (0.5, DecoderSi::Blind),
            (0.9, DecoderSi::Ladder(4)),
        ] {
            let run = run_asym_experiment(
                &[AsymVariant {
                    label: "a".into(),
                    bundle: &b,
                    decoder: dec,
                }],
                &cfg(rho, 60_000),
            )
            .unwrap();
            let exact = b.evaluate(rho, dec).unwrap();
            let r = &run.results[0];
            assert!(
                (r.d_av.mean - exact.d_av).abs() < 3.5 * r.d_av.se,
                "{rho}: {} vs {}",
                r.d_av.mean,
                exact.d_av
            );
            let central = exact.pattern(&[true, true]).unwrap();
            let c = r.d_central.unwrap();
            assert!((c.mean - central).abs() < 3.5 * c.se);
        }
    }

    #[test]
    fn decoders_coincide_without_correlation() {
        let b = bundle_with(8, 16, &[4, 4], &[0, 5, 10, 15, 3, 6, 9, 12], 0.02, 0.1);
        let variants = [
            AsymVariant {
                label: "si".into(),
                bundle: &b,
                decoder: DecoderSi::Ladder(0),
            },
            AsymVariant {
                label: "blind".into(),
                bundle: &b,
                decoder: DecoderSi::Blind,
            },
        ];
        let run = run_asym_experiment(&variants, &cfg(0.0, 5000)).unwrap();
        assert_eq!(run.results[0].d_av, run.results[1].d_av);
        assert_eq!(run.paired_difference(0, 1).mean, 0.0);
    }

    #[test]
    fn standard_error_shrinks_with_trials() {
        let b = bundle_with(8, 16, &[4, 4], &[0, 5, 10, 15, 3, 6, 9, 12], 0.02, 0.1);
        let v = [AsymVariant {
            label: "a".into(),
            bundle: &b,
            decoder: DecoderSi::Ladder(4),
        }];
        let small = run_asym_experiment(&v, &cfg(0.8, 20_000)).unwrap().results[0]
            .d_av
            .se;
        let large = run_asym_experiment(&v, &cfg(0.8, 40_000)).unwrap().results[0]
            .d_av
            .se;
        let ratio = large / small;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1,
            "{ratio}"
        );
    }

    #[test]
    fn runs_are_reproducible_across_thread_counts() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        let v = [AsymVariant {
            label: "a".into(),
            bundle: &b,
            decoder: DecoderSi::Ladder(3),
        }];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_asym_experiment(&v, &cfg(0.6, 3000)).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.results[0].d_av, b.results[0].d_av);
        assert_eq!(a.results[0].side, b.results[0].side);
    }

    #[test]
    fn rates_without_correlation_are_marginal_entropies() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        let r = conditional_entropy_rates(
            &b,
            &JointGaussianPair::unit(0.0).unwrap(),
            &GridSpec::default(),
        );
        // index digits of cells 0..4 under the map are (0,0),(0,1),(1,1),(1,0)
        let p = &b.quantizer.cell_probs;
        let h = |a: f64| -(a * a.log2() + (1.0 - a) * (1.0 - a).log2());
        assert!((r[0] - h(p[0] + p[1])).abs() < 1e-9);
        assert!((r[1] - h(p[0] + p[3])).abs() < 1e-9);
    }

    #[test]
    fn single_tuple_has_zero_rate() {
        let mut b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        b.ia = IndexAssignment::from_map(b.ia.space().clone(), &[2, 2, 2, 2]).unwrap();
        let r = conditional_entropy_rates(
            &b,
            &JointGaussianPair::unit(0.7).unwrap(),
            &GridSpec::default(),
        );
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn mismatched_channels_are_rejected() {
        let a = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        let mut b = a.clone();
        b.channels[0] = DescriptionChannel::bsc(0.2, 0.1, 2).unwrap();
        let v = [
            AsymVariant {
                label: "a".into(),
                bundle: &a,
                decoder: DecoderSi::Blind,
            },
            AsymVariant {
                label: "b".into(),
                bundle: &b,
                decoder: DecoderSi::Blind,
            },
        ];
        assert!(run_asym_experiment(&v, &cfg(0.5, 100)).is_err());
    }
}
