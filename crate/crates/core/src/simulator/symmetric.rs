//! Joint decoding of every sensor in a scenario.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{run_chunked, Accumulator, Estimate, ExperimentResult, GaussianField, WsnScenario};
use crate::channel::{pattern_index, sample_outcome, stream_rng};
use crate::codec::CodecBundle;
use crate::error::{Error, Result};
use crate::selection::{
    select_max_mi, select_min_distance, select_min_distortion, Candidates, MonteCarloSpec,
    SelectionTables, SiAssignment, SiMethod,
};
use crate::symmetric::{run_decoder, CrossTableSet, SymMode, SymmetricSetup};

/// A shared codec with its cross-source and selection tables.
#[derive(Debug, Clone)]
pub struct SymContext {
    pub bundle: CodecBundle,
    pub cross: CrossTableSet,
    pub selection: SelectionTables,
}

impl SymContext {
    /// Builds the tables; `monte_carlo` is only consulted for non-discrete channels.
    pub fn new(bundle: CodecBundle, monte_carlo: Option<MonteCarloSpec>) -> Result<Self> {
        let cross = CrossTableSet::build(&bundle)?;
        let selection = SelectionTables::build(&bundle, &cross, monte_carlo)?;
        Ok(Self {
            bundle,
            cross,
            selection,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymVariant {
    pub label: String,
    pub mode: SymMode,
    pub method: SiMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymConfig {
    pub trials: u64,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl SymConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            max_iters: 10,
            tol: 1e-6,
        }
    }
}

/// Variants run on the same field draws and channel realizations.
#[derive(Debug, Clone)]
pub struct SymRun {
    pub results: Vec<ExperimentResult>,
    /// True when the correlation matrix needed an eigenvalue floor.
    pub projected: bool,
    acc: Accumulator,
}

impl SymRun {
    /// `D(i) − D(j)`, linear, paired over trials.
    pub fn paired_difference(&self, i: usize, j: usize) -> Estimate {
        self.acc.difference(2 * i, 2 * j)
    }

    pub fn paired_db(&self, i: usize, j: usize) -> Estimate {
        self.acc.ratio_db(2 * i, 2 * j)
    }
}

/// Average per-node distortion of each decoder/selection variant.
pub fn run_sym_experiment(
    scenario: &WsnScenario,
    ctx: &SymContext,
    variants: &[SymVariant],
    config: &SymConfig,
) -> Result<SymRun> {
    if variants.is_empty() {
        return Err(Error::InvalidParameter("no variants to run".into()));
    }
    if config.trials < 2 {
        return Err(Error::InvalidParameter(
            "at least two trials are needed".into(),
        ));
    }
    let bundle = &ctx.bundle;
    let counts: Vec<usize> = scenario.channels.iter().map(|c| c.index_count).collect();
    if counts != bundle.ia.space().counts() {
        return Err(Error::InvalidParameter(
            "scenario channels do not match the codec's index alphabets".into(),
        ));
    }
    let n = scenario.len();
    let ladder = bundle.ladder();
    let levels = scenario
        .pairwise_rho
        .iter()
        .map(|row| {
            row.iter()
                .map(|&r| ladder.quantize(r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let candidates = Candidates {
        levels: &levels,
        rho: &scenario.pairwise_rho,
    };
    let field = GaussianField::new(&scenario.pairwise_rho)?;
    let by_distance = select_min_distance(&scenario.positions)?;
    let sd = bundle.quantizer.source.sd();
    let mean = bundle.quantizer.source.mean;
    let start = Instant::now();
    let acc = run_chunked(config.trials, 2 * variants.len(), |t, out| {
        let mut rng = stream_rng(config.seed, 1, t, 0);
        let x: Vec<f64> = field
            .sample(&mut rng)
            .iter()
            .map(|z| mean + sd * z)
            .collect();
        let outcomes = x
            .iter()
            .map(|&xu| {
                let idx = bundle.ia.indices_of(bundle.quantizer.cell_of(xu));
                sample_outcome(&idx, &scenario.channels, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let patterns: Vec<usize> = outcomes.iter().map(|o| pattern_index(&o.flags())).collect();
        for (v, variant) in variants.iter().enumerate() {
            let assignment: SiAssignment = match variant.method {
                SiMethod::Distance => by_distance.clone(),
                SiMethod::MutualInfo => select_max_mi(&ctx.selection, candidates, &patterns)?,
                SiMethod::MinDistortion => {
                    select_min_distortion(&ctx.selection, candidates, &patterns)?
                }
            };
            let rho_levels: Vec<usize> = (0..n).map(|u| levels[u][assignment.map[u]]).collect();
            let setup = SymmetricSetup {
                bundle,
                cross: &ctx.cross,
                si_map: &assignment.map,
                rho_levels: &rho_levels,
            };
            let decoded = run_decoder(
                &outcomes,
                &setup,
                variant.mode,
                config.max_iters,
                config.tol,
            )?;
            let err: f64 = x
                .iter()
                .zip(&decoded.estimates)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n as f64;
            out[2 * v] = err;
            out[2 * v + 1] = decoded.iterations as f64;
        }
        Ok(())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let variance = bundle.quantizer.source.variance;
    let results = variants
        .iter()
        .enumerate()
        .map(|(v, variant)| {
            let d_av = acc.estimate(2 * v);
            ExperimentResult {
                label: variant.label.clone(),
                trials: acc.n,
                d_av,
                d_av_db: d_av.db(variance),
                side: vec![],
                d_side: None,
                d_central: None,
                rates: vec![],
                mean_iterations: Some(acc.estimate(2 * v + 1).mean),
                wall_time_s: elapsed,
            }
        })
        .collect();
    Ok(SymRun {
        results,
        projected: field.projected,
        acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::DecoderSi;
    use crate::simulator::{run_asym_experiment, AsymConfig, AsymVariant};
    use crate::test_support::bundle_with;

    #[test]
    fn distant_pair_matches_two_no_si_decoders() {
        let b = bundle_with(8, 16, &[4, 4], &[0, 5, 10, 15, 3, 6, 9, 12], 0.02, 0.1);
        // alpha tiny: correlation exp(−1/0.01) quantizes to level 0
        let s =
            WsnScenario::from_positions(vec![[0.0, 0.0], [1.0, 0.0]], 0.01, b.channels.clone(), 0)
                .unwrap();
        let ctx = SymContext::new(b.clone(), None).unwrap();
        let v = [SymVariant {
            label: "soft".into(),
            mode: SymMode::Soft,
            method: SiMethod::Distance,
        }];
        let sym = run_sym_experiment(&s, &ctx, &v, &SymConfig::new(30_000, 8)).unwrap();
        let asym = run_asym_experiment(
            &[AsymVariant {
                label: "blind".into(),
                bundle: &b,
                decoder: DecoderSi::Blind,
            }],
            &AsymConfig {
                rho_real: 0.0,
                trials: 30_000,
                seed: 9,
            },
        )
        .unwrap();
        let (a, c) = (&sym.results[0].d_av, &asym.results[0].d_av);
        let se = (a.se.powi(2) + c.se.powi(2)).sqrt();
        assert!(
            (a.mean - c.mean).abs() < 3.0 * se,
            "{} vs {}",
            a.mean,
            c.mean
        );
        assert_eq!(sym.results[0].mean_iterations, Some(2.0));
    }

    #[test]
    fn side_information_helps_close_sensors() {
        let b = bundle_with(8, 16, &[4, 4], &[0, 5, 10, 15, 3, 6, 9, 12], 0.02, 0.3);
        let s = WsnScenario::from_positions(
            vec![[0.1, 0.1], [0.12, 0.1], [0.1, 0.13]],
            2.0,
            b.channels.clone(),
            0,
        )
        .unwrap();
        let ctx = SymContext::new(b, None).unwrap();
        let v = [
            SymVariant {
                label: "est".into(),
                mode: SymMode::Estimated,
                method: SiMethod::Distance,
            },
            SymVariant {
                label: "soft".into(),
                mode: SymMode::Soft,
                method: SiMethod::Distance,
            },
            SymVariant {
                label: "one".into(),
                mode: SymMode::Soft,
                method: SiMethod::MinDistortion,
            },
        ];
        let cfg = SymConfig {
            max_iters: 1,
            ..SymConfig::new(4000, 1)
        };
        let plain = run_sym_experiment(&s, &ctx, &v[..1], &cfg).unwrap();
        let run = run_sym_experiment(&s, &ctx, &v, &SymConfig::new(4000, 1)).unwrap();
        assert!(run.results[1].d_av.mean < plain.results[0].d_av.mean);
        assert!(run.paired_difference(1, 0).mean <= 3.0 * run.paired_difference(1, 0).se);
    }

    #[test]
    fn experiment_is_reproducible() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        let s = super::super::generate_scenario(5, 2.0, b.channels.clone(), 4).unwrap();
        let ctx = SymContext::new(b, None).unwrap();
        let v = [SymVariant {
            label: "mi".into(),
            mode: SymMode::Estimated,
            method: SiMethod::MutualInfo,
        }];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_sym_experiment(&s, &ctx, &v, &SymConfig::new(2500, 2)).unwrap())
        };
        assert_eq!(run(1).results[0].d_av, run(4).results[0].d_av);
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.05, 0.1);
        let other = bundle_with(8, 8, &[4, 2], &[0, 1, 2, 3, 4, 5, 6, 7], 0.05, 0.1);
        let s = super::super::generate_scenario(3, 2.0, other.channels.clone(), 4).unwrap();
        let ctx = SymContext::new(b, None).unwrap();
        let v = [SymVariant {
            label: "x".into(),
            mode: SymMode::Soft,
            method: SiMethod::Distance,
        }];
        assert!(run_sym_experiment(&s, &ctx, &v, &SymConfig::new(10, 1)).is_err());
    }
}
