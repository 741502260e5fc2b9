//! Deterministic-annealing design of the index assignment.

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, DescriptionChannel, TupleSpace};
use crate::error::{Error, Result};
use crate::prob::{CorrelationLadder, GridSpec, JointGaussianPair};
use crate::quantizer::{JointCellMoments, ScalarQuantizer};

use super::eval::{evaluate_distortion, outcome_space_for, weights_and_distortion, OutcomeSpace};
use super::{
    argmax_low, ia_entropy, moments_for, CodecBundle, DesignMetadata, IndexAssignment, SiTables,
};

/// Cooling schedule and restart settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// Cooling factor applied after each temperature step.
    pub gamma: f64,
    /// Stop once `T < t_min_ratio · T_init`.
    pub t_min_ratio: f64,
    /// Relative distortion change that ends the inner loop.
    pub inner_tol: f64,
    pub inner_cap: usize,
    /// Initial temperature gives rows with at least this fraction of `log₂ L` bits.
    pub init_entropy_fraction: f64,
    pub restarts: usize,
    /// Relative amplitude of the random jitter applied to the rows after each
    /// cooling step. The uniform assignment is a fixed point of the update, so
    /// some asymmetry has to be kept alive at high temperature.
    pub perturbation: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            t_min_ratio: 1e-6,
            inner_tol: 1e-5,
            inner_cap: 50,
            init_entropy_fraction: 0.95,
            restarts: 3,
            perturbation: 1e-3,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && self.t_min_ratio > 0.0
            && self.t_min_ratio < 1.0
            && self.inner_tol >= 0.0
            && self.inner_cap >= 1
            && self.init_entropy_fraction > 0.0
            && self.init_entropy_fraction < 1.0
            && self.restarts >= 1
            && (0.0..1.0).contains(&self.perturbation);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid annealing schedule {self:?}"
            )))
        }
    }
}

/// Everything the annealer needs besides the schedule and the seed.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    pub quantizer: ScalarQuantizer,
    pub si_quantizer: ScalarQuantizer,
    /// Source/SI statistics the encoder is designed for.
    pub pair: JointGaussianPair,
    pub channels: Vec<DescriptionChannel>,
    pub ladder: CorrelationLadder,
    pub grid: GridSpec,
}

/// Per-temperature record of one annealing run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignTrace {
    pub temperatures: Vec<f64>,
    pub distortions: Vec<f64>,
    pub entropies: Vec<f64>,
    pub inner_iterations: Vec<usize>,
    pub monotonicity_violations: usize,
    pub cap_hits: usize,
}

/// Soft update `P(I|X̃_k) ∝ exp(−𝒲(I,k) / (T·P(X̃_k)))`.
pub fn gibbs_update(
    weights: &[f64],
    temperature: f64,
    cell_probs: &[f64],
    space: &TupleSpace,
) -> Result<IndexAssignment> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let l = space.len();
    let k_count = cell_probs.len();
    if weights.len() != k_count * l {
        return Err(Error::LengthMismatch {
            expected: k_count * l,
            actual: weights.len(),
        });
    }
    let mut table = Vec::with_capacity(k_count * l);
    for (row, &pk) in weights.chunks(l).zip(cell_probs) {
        let scale = temperature * pk;
        let logits: Vec<f64> = row.iter().map(|w| -w / scale).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            // zero effective temperature: put the whole row on the minimum
            let mut unit = vec![0.0; l];
            unit[argmin_low(row)] = 1.0;
            table.extend(unit);
            continue;
        }
        let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let s: f64 = exps.iter().sum();
        table.extend(exps.iter().map(|e| e / s));
    }
    Ok(IndexAssignment::from_rows_unchecked(
        k_count,
        space.clone(),
        table,
    ))
}

fn argmin_low(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v < row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise argmax; ties go to the lowest tuple.
pub fn harden(ia: &IndexAssignment) -> IndexAssignment {
    let map: Vec<usize> = (0..ia.cells()).map(|k| argmax_low(ia.row(k))).collect();
    IndexAssignment::from_map(ia.space().clone(), &map).expect("argmax is in range")
}

/// Smallest temperature (to bisection precision) whose update has at least
/// `target` bits of conditional entropy.
fn initial_temperature(
    weights: &[f64],
    cell_probs: &[f64],
    space: &TupleSpace,
    target: f64,
) -> Result<f64> {
    let entropy = |t: f64| -> Result<f64> {
        Ok(ia_entropy(
            &gibbs_update(weights, t, cell_probs, space)?,
            cell_probs,
        ))
    };
    let mut hi = 1.0;
    while entropy(hi)? < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidParameter(
                "could not find an initial temperature".into(),
            ));
        }
    }
    let mut lo = hi;
    while lo > 1e-300 && entropy(lo)? >= target {
        lo *= 0.5;
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if entropy(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn perturb<R: Rng + ?Sized>(ia: &IndexAssignment, amplitude: f64, rng: &mut R) -> IndexAssignment {
    let l = ia.tuples();
    let mut table = ia.table().to_vec();
    for row in table.chunks_mut(l) {
        for v in row.iter_mut() {
            *v *= 1.0 + amplitude * (2.0 * rng.random::<f64>() - 1.0);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    IndexAssignment::from_rows_unchecked(ia.cells(), ia.space().clone(), table)
}

struct RunResult {
    soft: IndexAssignment,
    soft_distortion: f64,
    hard: IndexAssignment,
    hard_distortion: f64,
    trace: DesignTrace,
}

fn anneal_once(
    moments: &JointCellMoments,
    outcomes: &OutcomeSpace,
    cell_probs: &[f64],
    space: &TupleSpace,
    schedule: &AnnealSchedule,
    seed: u64,
    restart: usize,
) -> Result<RunResult> {
    let mut rng = stream_rng(seed, restart as u64, 0, 0);
    let k_count = cell_probs.len();
    let mut ia = IndexAssignment::random(k_count, space.clone(), &mut rng);
    let mut trace = DesignTrace::default();
    let eval = |ia: &IndexAssignment| {
        let dec = SiTables::from_moments(ia, moments);
        weights_and_distortion(ia, moments, outcomes, &dec)
    };
    let (mut w, mut d) = eval(&ia);
    let l = space.len();
    if l > 1 {
        let target = schedule.init_entropy_fraction * (l as f64).log2();
        let t_init = initial_temperature(&w, cell_probs, space, target)?;
        let t_min = schedule.t_min_ratio * t_init;
        let mut t = t_init;
        while t >= t_min {
            let mut iterations = 0;
            let mut settled = false;
            while iterations < schedule.inner_cap {
                iterations += 1;
                let next = gibbs_update(&w, t, cell_probs, space)?;
                let (w_next, d_next) = eval(&next);
                if d_next > d * (1.0 + 1e-12) {
                    trace.monotonicity_violations += 1;
                    debug!("distortion rose from {d} to {d_next} at T={t}");
                }
                let rel = (d - d_next).abs() / d.max(f64::MIN_POSITIVE);
                ia = next;
                w = w_next;
                d = d_next;
                if rel < schedule.inner_tol {
                    settled = true;
                    break;
                }
            }
            if !settled {
                trace.cap_hits += 1;
            }
            trace.temperatures.push(t);
            trace.distortions.push(d);
            trace.entropies.push(ia_entropy(&ia, cell_probs));
            trace.inner_iterations.push(iterations);
            t *= schedule.gamma;
            if schedule.perturbation > 0.0 && t >= t_min {
                ia = perturb(&ia, schedule.perturbation, &mut rng);
                (w, d) = eval(&ia);
            }
        }
    }
    let hard = harden(&ia);
    let hard_distortion = evaluate_distortion(&hard, moments, outcomes).d_av;
    Ok(RunResult {
        soft: ia,
        soft_distortion: d,
        hard,
        hard_distortion,
        trace,
    })
}

/// Anneals an index assignment for `problem`, keeping the best of the restarts.
///
/// Returns the hard assignment, its metadata and the trace of the winning restart.
pub fn anneal_assignment(
    problem: &DesignProblem,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<(IndexAssignment, DesignMetadata, DesignTrace)> {
    schedule.validate()?;
    let outcomes = outcome_space_for(&problem.channels)?;
    let space = TupleSpace::from_channels(&problem.channels)?;
    let moments = moments_for(
        &problem.quantizer,
        &problem.si_quantizer,
        &problem.pair,
        &problem.grid,
    );
    let cell_probs = &problem.quantizer.cell_probs;
    let runs = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| anneal_once(&moments, &outcomes, cell_probs, &space, schedule, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.hard_distortion < runs[best].hard_distortion {
            best = i;
        }
    }
    let run = runs.into_iter().nth(best).expect("at least one restart");
    let mut warnings = Vec::new();
    if run.trace.cap_hits > 0 {
        warnings.push(format!(
            "inner loop reached the iteration cap at {} temperatures",
            run.trace.cap_hits
        ));
    }
    if run.trace.monotonicity_violations > 0 {
        warnings.push(format!(
            "distortion increased in {} inner iterations",
            run.trace.monotonicity_violations
        ));
    }
    let rising = run
        .trace
        .entropies
        .windows(2)
        .skip(1)
        .filter(|w| w[1] > w[0] + 1e-9)
        .count();
    if rising > 0 {
        warnings.push(format!("assignment entropy rose at {rising} cooling steps"));
    }
    for w in &warnings {
        warn!("{w}");
    }
    debug_assert!(run.soft.cells() == run.hard.cells());
    let metadata = DesignMetadata {
        seed,
        schedule: *schedule,
        grid: problem.grid,
        soft_distortion: run.soft_distortion,
        hard_distortion: run.hard_distortion,
        hardening_gap: run.hard_distortion - run.soft_distortion,
        best_restart: best,
        converged: run.trace.cap_hits == 0,
        monotonicity_violations: run.trace.monotonicity_violations,
        warnings,
    };
    Ok((run.hard, metadata, run.trace))
}

/// Full design: anneal, harden and build the decoder tables for every ladder level.
pub fn design_annealed(
    problem: &DesignProblem,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<CodecBundle> {
    let (ia, metadata, _) = anneal_assignment(problem, schedule, seed)?;
    CodecBundle::assemble(
        problem.quantizer.clone(),
        problem.si_quantizer.clone(),
        ia,
        problem.channels.clone(),
        problem.pair.rho,
        &problem.ladder,
        metadata,
    )
}
