//! Iterative joint decoding of several sources, each using another source as
//! side information: estimated-SI and soft-SI modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asym::{combine, decode, expectation, tuple_log_likelihoods, Posterior};
use crate::channel::ChannelOutcome;
use crate::codec::{CodecBundle, SiContext};
use crate::error::{Error, Result};
use crate::prob::{GridSpec, JointGaussianPair};
use crate::quantizer::JointCellMoments;

/// Statistics linking a target source `u` to an SI source `s` at one correlation.
///
/// Matrices are row-major with the first named dimension as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSourceTables {
    pub rho: f64,
    pub cells_u: usize,
    pub cells_s: usize,
    pub tuples_u: usize,
    pub tuples_s: usize,
    /// `P(X̃_l^u, X̃_k^s)`, `K^u × K^s`.
    pub joint_mass: Vec<f64>,
    /// `E[X^u 1_l 1_k]`, `K^u × K^s`.
    pub joint_first: Vec<f64>,
    /// `P(X̃_l^u | X̃_k^s)`, `K^u × K^s`.
    pub cell_cross: Vec<f64>,
    /// `P(I^u | X̃_k^s)`, `L^u × K^s`.
    pub idx_given_cell: Vec<f64>,
    /// `C(I^u | X̃_k^s)`, `L^u × K^s`.
    pub cent_given_cell: Vec<f64>,
    /// `P(X̃_k^s | I^s)`, `K^s × L^s`.
    pub cell_given_idx: Vec<f64>,
    /// `Σ_k P(X̃_k^s|I^s) P(I^u|X̃_k^s)`, `L^u × L^s`.
    pub prior_mix: Vec<f64>,
    /// `Σ_k P(X̃_k^s|I^s) P(I^u|X̃_k^s) C(I^u|X̃_k^s)`, `L^u × L^s`.
    pub code_mix: Vec<f64>,
    /// `E[(X^u)²]`.
    pub second_moment: f64,
}

impl CrossSourceTables {
    /// Builds the tables with `X^u` and `X^s` jointly Gaussian at `rho`.
    pub fn build(
        bundle_u: &CodecBundle,
        bundle_s: &CodecBundle,
        rho: f64,
        grid: &GridSpec,
    ) -> Result<Self> {
        let pair = JointGaussianPair::new(
            bundle_u.quantizer.source.variance,
            bundle_s.quantizer.source.variance,
            rho,
        )?;
        let qu = &bundle_u.quantizer;
        let qs = &bundle_s.quantizer;
        let sample_grid = grid.grid_for(&pair.source(), &qu.thresholds);
        let jm = JointCellMoments::compute(qu, qs, &pair, &sample_grid);
        let (ku, ks) = (qu.levels(), qs.levels());
        let (lu, ls) = (bundle_u.ia.tuples(), bundle_s.ia.tuples());
        let ps = jm.col_mass();

        let mut cell_cross = vec![0.0; ku * ks];
        for l in 0..ku {
            for k in 0..ks {
                if ps[k] > 0.0 {
                    cell_cross[l * ks + k] = jm.mass[jm.idx(l, k)] / ps[k];
                }
            }
        }
        let mut idx_given_cell = vec![0.0; lu * ks];
        let mut cent_given_cell = vec![0.0; lu * ks];
        for k in 0..ks {
            for t in 0..lu {
                let mut mass = 0.0;
                let mut first = 0.0;
                for l in 0..ku {
                    let p = bundle_u.ia.get(l, t);
                    if p > 0.0 {
                        mass += p * jm.mass[jm.idx(l, k)];
                        first += p * jm.first[jm.idx(l, k)];
                    }
                }
                if ps[k] > 0.0 {
                    idx_given_cell[t * ks + k] = mass / ps[k];
                }
                if mass > 0.0 {
                    cent_given_cell[t * ks + k] = first / mass;
                }
            }
        }
        let tuple_s = bundle_s.ia.tuple_probs(&qs.cell_probs);
        let mut cell_given_idx = vec![0.0; ks * ls];
        for k in 0..ks {
            for t in 0..ls {
                if tuple_s[t] > 0.0 {
                    cell_given_idx[k * ls + t] =
                        bundle_s.ia.get(k, t) * qs.cell_probs[k] / tuple_s[t];
                }
            }
        }
        let mut prior_mix = vec![0.0; lu * ls];
        let mut code_mix = vec![0.0; lu * ls];
        for iu in 0..lu {
            for is in 0..ls {
                let mut pm = 0.0;
                let mut cm = 0.0;
                for k in 0..ks {
                    let w = cell_given_idx[k * ls + is];
                    if w > 0.0 {
                        let p = idx_given_cell[iu * ks + k];
                        pm += w * p;
                        cm += w * p * cent_given_cell[iu * ks + k];
                    }
                }
                prior_mix[iu * ls + is] = pm;
                code_mix[iu * ls + is] = cm;
            }
        }
        Ok(Self {
            rho,
            cells_u: ku,
            cells_s: ks,
            tuples_u: lu,
            tuples_s: ls,
            second_moment: jm.second_moment(),
            joint_mass: jm.mass,
            joint_first: jm.first,
            cell_cross,
            idx_given_cell,
            cent_given_cell,
            cell_given_idx,
            prior_mix,
            code_mix,
        })
    }

    /// True when the SI source carries no information about the target.
    pub fn is_independent(&self) -> bool {
        self.rho == 0.0
    }

    /// `P(X̃_k^s | ·)` implied by a posterior over `I^s`.
    pub fn neighbor_cells(&self, neighbor: &Posterior) -> Vec<f64> {
        let ls = self.tuples_s;
        (0..self.cells_s)
            .map(|k| {
                self.cell_given_idx[k * ls..(k + 1) * ls]
                    .iter()
                    .zip(&neighbor.probs)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Prior `P(I^u | Y^u)` and mixed codebook numerator for a neighbor posterior.
    fn mixture(&self, neighbor: &Posterior) -> (Vec<f64>, Vec<f64>) {
        let ls = self.tuples_s;
        let mut prior = vec![0.0; self.tuples_u];
        let mut code = vec![0.0; self.tuples_u];
        for iu in 0..self.tuples_u {
            let row_p = &self.prior_mix[iu * ls..(iu + 1) * ls];
            let row_c = &self.code_mix[iu * ls..(iu + 1) * ls];
            for (is, &w) in neighbor.probs.iter().enumerate() {
                if w > 0.0 {
                    prior[iu] += w * row_p[is];
                    code[iu] += w * row_c[is];
                }
            }
        }
        (prior, code)
    }
}

/// Cross tables for one shared codec at every level of its correlation ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTableSet {
    pub levels: Vec<CrossSourceTables>,
}

impl CrossTableSet {
    pub fn build(bundle: &CodecBundle) -> Result<Self> {
        let levels = bundle
            .ladder()
            .levels()
            .par_iter()
            .map(|&rho| CrossSourceTables::build(bundle, bundle, rho, &bundle.metadata.grid))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn level(&self, index: usize) -> &CrossSourceTables {
        &self.levels[index]
    }
}

/// Posterior of `I^u` using the neighbor's posterior over `I^s` as side information.
pub fn soft_si_posterior(
    outcome_u: &ChannelOutcome,
    neighbor: &Posterior,
    cross: &CrossSourceTables,
    bundle_u: &CodecBundle,
) -> Result<Posterior> {
    if neighbor.probs.len() != cross.tuples_s {
        return Err(Error::LengthMismatch {
            expected: cross.tuples_s,
            actual: neighbor.probs.len(),
        });
    }
    let log_lik = tuple_log_likelihoods(outcome_u, &bundle_u.channels, bundle_u.ia.space())?;
    if cross.is_independent() {
        return combine(&log_lik, &bundle_u.tables.no_si_prior);
    }
    let (prior, _) = cross.mixture(neighbor);
    combine(&log_lik, &prior)
}

/// Reconstruction of `X^u` from its soft-SI posterior and the neighbor posterior
/// that produced it.
pub fn soft_si_reconstruct(
    posterior_u: &Posterior,
    neighbor: &Posterior,
    cross: &CrossSourceTables,
    bundle_u: &CodecBundle,
) -> f64 {
    if cross.is_independent() {
        return expectation(posterior_u, &bundle_u.tables.no_si_codebook);
    }
    let (prior, code) = cross.mixture(neighbor);
    let codebook: Vec<f64> = prior
        .iter()
        .zip(&code)
        .map(|(&p, &c)| if p > 0.0 { c / p } else { 0.0 })
        .collect();
    expectation(posterior_u, &codebook)
}

/// Decoding mode of the iterative decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymMode {
    Estimated,
    Soft,
}

/// Inputs shared by every iteration: one codec for all sources, its cross
/// tables, the SI assignment and the quantized pair correlations.
pub struct SymmetricSetup<'a> {
    pub bundle: &'a CodecBundle,
    pub cross: &'a CrossTableSet,
    /// `s(u)` for every source.
    pub si_map: &'a [usize],
    /// Ladder level of the correlation between `u` and `s(u)`.
    pub rho_levels: &'a [usize],
}

impl SymmetricSetup<'_> {
    fn validate(&self, sources: usize) -> Result<()> {
        if self.si_map.len() != sources {
            return Err(Error::LengthMismatch {
                expected: sources,
                actual: self.si_map.len(),
            });
        }
        if self.rho_levels.len() != sources {
            return Err(Error::LengthMismatch {
                expected: sources,
                actual: self.rho_levels.len(),
            });
        }
        for (u, &s) in self.si_map.iter().enumerate() {
            if s >= sources || (s == u && sources > 1) {
                return Err(Error::InvalidParameter(format!(
                    "source {u} cannot use {s} as side information"
                )));
            }
        }
        Ok(())
    }
}

/// Decoder state after an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricState {
    pub iteration: usize,
    pub estimates: Vec<f64>,
    pub posteriors: Vec<Posterior>,
}

/// First iteration: every source decoded without side information.
pub fn initial_state(outcomes: &[ChannelOutcome], bundle: &CodecBundle) -> Result<SymmetricState> {
    let decoded = outcomes
        .iter()
        .map(|o| decode(o, SiContext::None, bundle))
        .collect::<Result<Vec<_>>>()?;
    let (posteriors, estimates) = decoded.into_iter().unzip();
    Ok(SymmetricState {
        iteration: 1,
        estimates,
        posteriors,
    })
}

/// One Jacobi sweep of the estimated-SI decoder: each source quantizes its
/// neighbor's previous estimate with the SI quantizer and decodes with the
/// tables of the pair's correlation level.
pub fn estimated_si_iterate(
    state: &SymmetricState,
    outcomes: &[ChannelOutcome],
    setup: &SymmetricSetup,
) -> Result<SymmetricState> {
    let bundle = setup.bundle;
    let decoded = (0..outcomes.len())
        .map(|u| {
            let s = setup.si_map[u];
            let si = SiContext::Level {
                rho_level: setup.rho_levels[u],
                si_level: bundle.si_quantizer.cell_of(state.estimates[s]),
            };
            decode(&outcomes[u], si, bundle)
        })
        .collect::<Result<Vec<_>>>()?;
    let (posteriors, estimates) = decoded.into_iter().unzip();
    Ok(SymmetricState {
        iteration: state.iteration + 1,
        estimates,
        posteriors,
    })
}

/// One Jacobi sweep of the soft-SI decoder; estimates are left at their previous values.
pub fn soft_si_iterate(
    state: &SymmetricState,
    outcomes: &[ChannelOutcome],
    setup: &SymmetricSetup,
) -> Result<SymmetricState> {
    let posteriors = (0..outcomes.len())
        .map(|u| {
            let s = setup.si_map[u];
            soft_si_posterior(
                &outcomes[u],
                &state.posteriors[s],
                setup.cross.level(setup.rho_levels[u]),
                setup.bundle,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SymmetricState {
        iteration: state.iteration + 1,
        estimates: state.estimates.clone(),
        posteriors,
    })
}

/// Final output of the iterative decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricDecode {
    pub estimates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Estimates after the first iteration (no side information).
    pub first_iteration: Vec<f64>,
}

/// Iterates until the largest change drops below `tol` or `max_iters` sweeps.
///
/// The estimated-SI mode tracks the change in estimates; the soft-SI mode
/// tracks the change in posteriors and reconstructs only after the last sweep.
pub fn run_decoder(
    outcomes: &[ChannelOutcome],
    setup: &SymmetricSetup,
    mode: SymMode,
    max_iters: usize,
    tol: f64,
) -> Result<SymmetricDecode> {
    setup.validate(outcomes.len())?;
    if max_iters == 0 {
        return Err(Error::InvalidParameter(
            "max_iters must be at least 1".into(),
        ));
    }
    let first = initial_state(outcomes, setup.bundle)?;
    let first_iteration = first.estimates.clone();
    if outcomes.len() < 2 {
        return Ok(SymmetricDecode {
            estimates: first.estimates,
            iterations: 1,
            converged: true,
            first_iteration,
        });
    }
    let mut state = first;
    let mut previous = state.clone();
    let mut converged = false;
    while state.iteration < max_iters {
        let next = match mode {
            SymMode::Estimated => estimated_si_iterate(&state, outcomes, setup)?,
            SymMode::Soft => soft_si_iterate(&state, outcomes, setup)?,
        };
        let change = match mode {
            SymMode::Estimated => next
                .estimates
                .iter()
                .zip(&state.estimates)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            SymMode::Soft => next
                .posteriors
                .iter()
                .zip(&state.posteriors)
                .map(|(a, b)| a.max_diff(b))
                .fold(0.0, f64::max),
        };
        previous = std::mem::replace(&mut state, next);
        if change < tol {
            converged = true;
            break;
        }
    }
    let estimates = match mode {
        SymMode::Soft if state.iteration > 1 => (0..outcomes.len())
            .map(|u| {
                let s = setup.si_map[u];
                soft_si_reconstruct(
                    &state.posteriors[u],
                    &previous.posteriors[s],
                    setup.cross.level(setup.rho_levels[u]),
                    setup.bundle,
                )
            })
            .collect(),
        _ => state.estimates,
    };
    Ok(SymmetricDecode {
        estimates,
        iterations: state.iteration,
        converged,
        first_iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_outcome, stream_rng, Payload};
    use crate::prob::CorrelationLadder;
    use crate::test_support::bundle_with;
    use rand_distr::{Distribution, StandardNormal};

    fn tiny() -> CodecBundle {
        bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.1, 0.05)
    }

    #[test]
    fn cross_tables_are_stochastic() {
        let b = bundle_with(8, 8, &[2, 2], &[0, 1, 3, 2, 1, 0, 2, 3], 0.1, 0.05);
        let c = CrossSourceTables::build(&b, &b, 0.8, &GridSpec::default()).unwrap();
        for k in 0..8 {
            let col: f64 = (0..8).map(|l| c.cell_cross[l * 8 + k]).sum();
            assert!((col - 1.0).abs() < 1e-9);
            let idx: f64 = (0..4).map(|t| c.idx_given_cell[t * 8 + k]).sum();
            assert!((idx - 1.0).abs() < 1e-9);
        }
        for t in 0..4 {
            let s: f64 = (0..8).map(|k| c.cell_given_idx[k * 4 + t]).sum();
            assert!((s - 1.0).abs() < 1e-9);
            let m: f64 = (0..4).map(|iu| c.prior_mix[iu * 4 + t]).sum();
            assert!((m - 1.0).abs() < 1e-9);
        }
        assert!(c.cent_given_cell.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn independent_cross_tables_reduce_to_marginals() {
        let b = tiny();
        let c = CrossSourceTables::build(&b, &b, 0.0, &GridSpec::default()).unwrap();
        for l in 0..4 {
            for k in 0..4 {
                assert!((c.cell_cross[l * 4 + k] - b.quantizer.cell_probs[l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn strong_correlation_is_diagonal_dominant() {
        let b = bundle_with(16, 8, &[4, 4], &(0..16).collect::<Vec<_>>(), 0.0, 0.0);
        let c = CrossSourceTables::build(&b, &b, 0.99, &GridSpec::default()).unwrap();
        for k in 1..15 {
            let col: Vec<f64> = (0..16).map(|l| c.cell_cross[l * 16 + k]).collect();
            let argmax = (0..16).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(argmax, k);
        }
    }

    #[test]
    fn uniform_neighbor_at_zero_correlation_is_the_no_si_decoder() {
        let b = tiny();
        let c = CrossSourceTables::build(&b, &b, 0.0, &GridSpec::default()).unwrap();
        let mut rng = stream_rng(4, 0, 0, 0);
        for t in 0..50 {
            let o = sample_outcome(&[t % 2, (t / 3) % 2], &b.channels, &mut rng).unwrap();
            let soft = soft_si_posterior(&o, &Posterior::uniform(4), &c, &b).unwrap();
            let (plain, _) = decode(&o, SiContext::None, &b).unwrap();
            assert!(soft.max_diff(&plain) < 1e-9);
            // the mixture route itself, without the independence shortcut
            let log_lik = tuple_log_likelihoods(&o, &b.channels, b.ia.space()).unwrap();
            let (prior, _) = c.mixture(&Posterior::uniform(4));
            let mixed = combine(&log_lik, &prior).unwrap();
            assert!(mixed.max_diff(&plain) < 1e-9);
        }
    }

    #[test]
    fn indicator_neighbor_gives_single_term_prior() {
        let b = tiny();
        let c = CrossSourceTables::build(&b, &b, 0.8, &GridSpec::default()).unwrap();
        for is in 0..4 {
            let (prior, _) = c.mixture(&Posterior::indicator(4, is));
            for iu in 0..4 {
                let direct: f64 = (0..4)
                    .map(|k| c.cell_given_idx[k * 4 + is] * c.idx_given_cell[iu * 4 + k])
                    .sum();
                assert_eq!(prior[iu], direct);
            }
        }
    }

    /// `P(I^u, J^u, I^s, J^s)` enumerated from the cell joint, then
    /// `E[X^u | J^u, J^s]` directly.
    #[test]
    fn soft_si_matches_enumeration() {
        let b = tiny();
        let c = CrossSourceTables::build(&b, &b, 0.8, &GridSpec::default()).unwrap();
        let lik = |i: usize, j: &[Option<usize>]| -> f64 {
            let idx = b.ia.space().decode(i);
            idx.iter()
                .zip(j)
                .map(|(&a, r)| match r {
                    Some(r) => {
                        if a == *r {
                            0.9
                        } else {
                            0.1
                        }
                    }
                    None => 0.5,
                })
                .product()
        };
        let outcomes: Vec<Vec<Option<usize>>> = vec![
            vec![Some(0), Some(1)],
            vec![None, Some(1)],
            vec![Some(1), None],
            vec![None, None],
        ];
        for ju in &outcomes {
            for js in &outcomes {
                let ou = ChannelOutcome::new(ju.iter().map(|r| r.map(Payload::Index)).collect());
                let os = ChannelOutcome::new(js.iter().map(|r| r.map(Payload::Index)).collect());
                let (neighbor, _) = decode(&os, SiContext::None, &b).unwrap();
                let post = soft_si_posterior(&ou, &neighbor, &c, &b).unwrap();
                let xhat = soft_si_reconstruct(&post, &neighbor, &c, &b);

                let mut p_iu = [0.0; 4];
                let mut num = 0.0;
                let mut den = 0.0;
                for l in 0..4 {
                    for k in 0..4 {
                        let (iu, is) = (b.ia.tuple_of(l), b.ia.tuple_of(k));
                        let w = lik(iu, ju) * lik(is, js);
                        p_iu[iu] += w * c.joint_mass[l * 4 + k];
                        num += w * c.joint_first[l * 4 + k];
                        den += w * c.joint_mass[l * 4 + k];
                    }
                }
                let s: f64 = p_iu.iter().sum();
                for t in 0..4 {
                    assert!((post.probs[t] - p_iu[t] / s).abs() < 1e-9);
                }
                assert!((xhat - num / den).abs() < 1e-8, "{ju:?} {js:?}");
            }
        }
    }

    #[test]
    fn both_lost_without_correlation_reconstructs_zero() {
        let b = tiny();
        let c = CrossSourceTables::build(&b, &b, 0.0, &GridSpec::default()).unwrap();
        let lost = ChannelOutcome::all_lost(2);
        let (neighbor, _) = decode(&lost, SiContext::None, &b).unwrap();
        let post = soft_si_posterior(&lost, &neighbor, &c, &b).unwrap();
        assert!(soft_si_reconstruct(&post, &neighbor, &c, &b).abs() < 1e-9);
    }

    #[test]
    fn indicator_neighbor_with_noiseless_channel_returns_cell_centroid() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.0, 0.0);
        let c = CrossSourceTables::build(&b, &b, 0.8, &GridSpec::default()).unwrap();
        let o = ChannelOutcome::new(vec![Some(Payload::Index(1)), Some(Payload::Index(1))]);
        let neighbor = Posterior::indicator(4, 2); // tuple 2 <-> cell 3
        let post = soft_si_posterior(&o, &neighbor, &c, &b).unwrap();
        let xhat = soft_si_reconstruct(&post, &neighbor, &c, &b);
        assert!((xhat - c.cent_given_cell[3 * 4 + 3]).abs() < 1e-12);
    }

    fn scenario_outcomes(
        b: &CodecBundle,
        rho: f64,
        n: usize,
        seed: u64,
    ) -> (Vec<f64>, Vec<ChannelOutcome>) {
        let mut rng = stream_rng(seed, 0, 0, 0);
        let common: f64 = StandardNormal.sample(&mut rng);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                rho.sqrt() * common + (1.0 - rho).sqrt() * z
            })
            .collect();
        let outcomes = xs
            .iter()
            .map(|&x| {
                let k = b.quantizer.cell_of(x);
                sample_outcome(&b.ia.indices_of(k), &b.channels, &mut rng).unwrap()
            })
            .collect();
        (xs, outcomes)
    }

    #[test]
    fn first_iteration_is_the_no_si_decoder_in_both_modes() {
        let b = tiny();
        let cross = CrossTableSet::build(&b).unwrap();
        let ladder = CorrelationLadder::default();
        let level = ladder.quantize(0.8).unwrap();
        for seed in 0..20 {
            let (_, outcomes) = scenario_outcomes(&b, 0.8, 3, seed);
            let setup = SymmetricSetup {
                bundle: &b,
                cross: &cross,
                si_map: &[1, 0, 1],
                rho_levels: &[level; 3],
            };
            let plain: Vec<f64> = outcomes
                .iter()
                .map(|o| decode(o, SiContext::None, &b).unwrap().1)
                .collect();
            for mode in [SymMode::Estimated, SymMode::Soft] {
                let r = run_decoder(&outcomes, &setup, mode, 1, 1e-6).unwrap();
                assert_eq!(r.estimates, plain);
                let r = run_decoder(&outcomes, &setup, mode, 10, 1e-6).unwrap();
                assert_eq!(r.first_iteration, plain);
            }
        }
    }

    #[test]
    fn independent_sources_are_stable_after_the_first_iteration() {
        let b = tiny();
        let cross = CrossTableSet::build(&b).unwrap();
        for seed in 0..10 {
            let (_, outcomes) = scenario_outcomes(&b, 0.0, 2, seed);
            let setup = SymmetricSetup {
                bundle: &b,
                cross: &cross,
                si_map: &[1, 0],
                rho_levels: &[0, 0],
            };
            for mode in [SymMode::Estimated, SymMode::Soft] {
                let r = run_decoder(&outcomes, &setup, mode, 10, 1e-6).unwrap();
                assert_eq!(r.estimates, r.first_iteration);
                assert_eq!(r.iterations, 2);
            }
        }
    }

    #[test]
    fn estimated_mode_reaches_a_fixed_point_on_a_noiseless_instance() {
        // coarse SI quantizer: the neighbor estimate never changes sign
        let b = bundle_with(4, 2, &[2, 2], &[0, 1, 3, 2], 0.0, 0.0);
        let cross = CrossTableSet::build(&b).unwrap();
        for seed in 0..20 {
            let (_, outcomes) = scenario_outcomes(&b, 0.8, 2, seed);
            let setup = SymmetricSetup {
                bundle: &b,
                cross: &cross,
                si_map: &[1, 0],
                rho_levels: &[4, 4],
            };
            let s1 = initial_state(&outcomes, &b).unwrap();
            let s2 = estimated_si_iterate(&s1, &outcomes, &setup).unwrap();
            let s3 = estimated_si_iterate(&s2, &outcomes, &setup).unwrap();
            assert_eq!(s2.estimates, s3.estimates);
        }
    }

    #[test]
    fn noiseless_modes_agree_without_correlation() {
        let b = bundle_with(4, 8, &[2, 2], &[0, 1, 3, 2], 0.0, 0.0);
        let cross = CrossTableSet::build(&b).unwrap();
        let (mut de, mut ds) = (0.0, 0.0);
        for seed in 0..50 {
            let (xs, outcomes) = scenario_outcomes(&b, 0.0, 2, seed);
            let setup = SymmetricSetup {
                bundle: &b,
                cross: &cross,
                si_map: &[1, 0],
                rho_levels: &[0, 0],
            };
            let e = run_decoder(&outcomes, &setup, SymMode::Estimated, 10, 1e-6).unwrap();
            let s = run_decoder(&outcomes, &setup, SymMode::Soft, 10, 1e-6).unwrap();
            assert!(e.iterations <= 2 && s.iterations <= 2);
            for u in 0..2 {
                de += (xs[u] - e.estimates[u]).powi(2);
                ds += (xs[u] - s.estimates[u]).powi(2);
            }
        }
        assert!((de - ds).abs() < 1e-6);
    }

    #[test]
    fn single_source_is_the_no_si_decoder() {
        let b = tiny();
        let cross = CrossTableSet::build(&b).unwrap();
        let (_, outcomes) = scenario_outcomes(&b, 0.5, 1, 3);
        let setup = SymmetricSetup {
            bundle: &b,
            cross: &cross,
            si_map: &[0],
            rho_levels: &[0],
        };
        let r = run_decoder(&outcomes, &setup, SymMode::Soft, 10, 1e-6).unwrap();
        assert_eq!(
            r.estimates[0],
            decode(&outcomes[0], SiContext::None, &b).unwrap().1
        );
    }

    #[test]
    fn posteriors_stay_normalized() {
        let b = bundle_with(8, 16, &[2, 2], &[0, 1, 3, 2, 1, 0, 2, 3], 0.05, 0.1);
        let cross = CrossTableSet::build(&b).unwrap();
        for seed in 0..10 {
            let (_, outcomes) = scenario_outcomes(&b, 0.9, 3, seed);
            let setup = SymmetricSetup {
                bundle: &b,
                cross: &cross,
                si_map: &[1, 2, 0],
                rho_levels: &[5, 5, 5],
            };
            let mut state = initial_state(&outcomes, &b).unwrap();
            for _ in 0..5 {
                state = soft_si_iterate(&state, &outcomes, &setup).unwrap();
                for p in &state.posteriors {
                    assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn invalid_si_map_is_rejected() {
        let b = tiny();
        let cross = CrossTableSet::build(&b).unwrap();
        let (_, outcomes) = scenario_outcomes(&b, 0.5, 2, 1);
        let setup = SymmetricSetup {
            bundle: &b,
            cross: &cross,
            si_map: &[0, 0],
            rho_levels: &[0, 0],
        };
        assert!(run_decoder(&outcomes, &setup, SymMode::Soft, 10, 1e-6).is_err());
    }
}
