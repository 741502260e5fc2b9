//! Index assignments, decoder tables and the persisted codec bundle.

mod anneal;
mod eval;

pub use anneal::{
    anneal_assignment, design_annealed, gibbs_update, harden, AnnealSchedule, DesignProblem,
    DesignTrace,
};
pub use eval::{
    da_weights, evaluate_distortion, evaluate_with_decoder, outcome_space_for, DistortionReport,
    OutcomeSpace, PatternDistortion,
};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{DescriptionChannel, TupleSpace};
use crate::error::{Error, Result};
use crate::prob::{CorrelationLadder, GridSpec, JointGaussianPair};
use crate::quantizer::{JointCellMoments, ScalarQuantizer};

const ROW_TOL: f64 = 1e-9;

/// Row-stochastic `K × L` table `P(I | X̃_k)` over index tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexAssignment {
    cells: usize,
    space: TupleSpace,
    table: Vec<f64>,
    hard: bool,
}

impl IndexAssignment {
    /// Validates shape, range and row sums.
    pub fn new(cells: usize, space: TupleSpace, table: Vec<f64>) -> Result<Self> {
        let l = space.len();
        if table.len() != cells * l {
            return Err(Error::LengthMismatch {
                expected: cells * l,
                actual: table.len(),
            });
        }
        if table.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "index assignment entries must lie in [0, 1]".into(),
            ));
        }
        for (k, row) in table.chunks(l).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidParameter(format!(
                    "row {k} of index assignment sums to {s}"
                )));
            }
        }
        let hard = table.iter().all(|&v| v == 0.0 || v == 1.0);
        Ok(Self {
            cells,
            space,
            table,
            hard,
        })
    }

    /// Deterministic assignment sending cell `k` to tuple `map[k]`.
    pub fn from_map(space: TupleSpace, map: &[usize]) -> Result<Self> {
        let l = space.len();
        let mut table = vec![0.0; map.len() * l];
        for (k, &t) in map.iter().enumerate() {
            if t >= l {
                return Err(Error::InvalidParameter(format!(
                    "tuple {t} out of range for {l} tuples"
                )));
            }
            table[k * l + t] = 1.0;
        }
        Ok(Self {
            cells: map.len(),
            space,
            table,
            hard: true,
        })
    }

    pub fn uniform(cells: usize, space: TupleSpace) -> Self {
        let l = space.len();
        Self {
            cells,
            table: vec![1.0 / l as f64; cells * l],
            hard: l == 1,
            space,
        }
    }

    /// Rows drawn from a symmetric Dirichlet(1).
    pub fn random<R: Rng + ?Sized>(cells: usize, space: TupleSpace, rng: &mut R) -> Self {
        let l = space.len();
        let mut table = Vec::with_capacity(cells * l);
        for _ in 0..cells {
            let draws: Vec<f64> = (0..l).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let s: f64 = draws.iter().sum();
            table.extend(draws.iter().map(|d| d / s));
        }
        Self {
            cells,
            space,
            table,
            hard: false,
        }
    }

    /// Builds from rows already known to be stochastic.
    pub(crate) fn from_rows_unchecked(cells: usize, space: TupleSpace, table: Vec<f64>) -> Self {
        let hard = table.iter().all(|&v| v == 0.0 || v == 1.0);
        Self {
            cells,
            space,
            table,
            hard,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn tuples(&self) -> usize {
        self.space.len()
    }

    pub fn space(&self) -> &TupleSpace {
        &self.space
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn is_hard(&self) -> bool {
        self.hard
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let l = self.tuples();
        &self.table[k * l..(k + 1) * l]
    }

    pub fn get(&self, k: usize, tuple: usize) -> f64 {
        self.table[k * self.tuples() + tuple]
    }

    /// Most likely tuple of cell `k` (the sent tuple for a hard assignment);
    /// ties go to the lowest tuple.
    pub fn tuple_of(&self, k: usize) -> usize {
        argmax_low(self.row(k))
    }

    /// Per-description indices sent for cell `k` under a hard assignment.
    pub fn indices_of(&self, k: usize) -> Vec<usize> {
        self.space.decode(self.tuple_of(k))
    }

    /// Number of tuples with nonzero column mass.
    pub fn used_tuples(&self) -> usize {
        let l = self.tuples();
        (0..l)
            .filter(|&t| (0..self.cells).any(|k| self.table[k * l + t] > 0.0))
            .count()
    }

    /// `P(I) = Σ_k P(I|k) P(k)`.
    pub fn tuple_probs(&self, cell_probs: &[f64]) -> Vec<f64> {
        let l = self.tuples();
        let mut out = vec![0.0; l];
        for (row, &p) in self.table.chunks(l).zip(cell_probs) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v * p;
            }
        }
        out
    }
}

pub(crate) fn argmax_low(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// `ℋ(I|K) = −Σ P(I, X̃_k) log₂ P(I | X̃_k)` in bits.
pub fn ia_entropy(ia: &IndexAssignment, cell_probs: &[f64]) -> f64 {
    let l = ia.tuples();
    -ia.table
        .chunks(l)
        .zip(cell_probs)
        .map(|(row, &pk)| {
            pk * row
                .iter()
                .filter(|&&v| v > 0.0)
                .map(|&v| v * v.log2())
                .sum::<f64>()
        })
        .sum::<f64>()
}

/// Decoder tables for one correlation value: `P(I|Ỹ_j)` and `C(I|Ỹ_j)` for
/// every SI level `j`, stored row-major `N_SI × L`.
///
/// A tuple with zero prior has codebook value 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiTables {
    pub si_levels: usize,
    pub tuples: usize,
    pub prior: Vec<f64>,
    pub codebook: Vec<f64>,
}

impl SiTables {
    pub fn prior(&self, level: usize) -> &[f64] {
        &self.prior[level * self.tuples..(level + 1) * self.tuples]
    }

    pub fn codebook(&self, level: usize) -> &[f64] {
        &self.codebook[level * self.tuples..(level + 1) * self.tuples]
    }

    /// Tables of a decoder that ignores its SI level.
    pub fn repeated(prior: &[f64], codebook: &[f64], si_levels: usize) -> Self {
        Self {
            si_levels,
            tuples: prior.len(),
            prior: prior.repeat(si_levels),
            codebook: codebook.repeat(si_levels),
        }
    }

    /// Builds from joint cell moments of the source quantizer and SI quantizer.
    pub fn from_moments(ia: &IndexAssignment, moments: &JointCellMoments) -> Self {
        let l = ia.tuples();
        let n_si = moments.cols;
        let si_probs = moments.col_mass();
        let mut prior = vec![0.0; n_si * l];
        let mut codebook = vec![0.0; n_si * l];
        for j in 0..n_si {
            let mut mass = vec![0.0; l];
            let mut first = vec![0.0; l];
            for k in 0..moments.rows {
                let a = moments.mass[moments.idx(k, j)];
                let b = moments.first[moments.idx(k, j)];
                for (t, &p) in ia.row(k).iter().enumerate() {
                    if p > 0.0 {
                        mass[t] += p * a;
                        first[t] += p * b;
                    }
                }
            }
            for t in 0..l {
                if mass[t] > 0.0 {
                    prior[j * l + t] = mass[t] / si_probs[j];
                    codebook[j * l + t] = first[t] / mass[t];
                }
            }
        }
        Self {
            si_levels: n_si,
            tuples: l,
            prior,
            codebook,
        }
    }
}

/// `P(I)` and `C(I)` without side information, from exact cell moments.
pub fn no_si_tables(ia: &IndexAssignment, quantizer: &ScalarQuantizer) -> (Vec<f64>, Vec<f64>) {
    let l = ia.tuples();
    let centroids = quantizer.centroids();
    let mut mass = vec![0.0; l];
    let mut first = vec![0.0; l];
    for k in 0..ia.cells() {
        let pk = quantizer.cell_probs[k];
        for (t, &p) in ia.row(k).iter().enumerate() {
            if p > 0.0 {
                mass[t] += p * pk;
                first[t] += p * pk * centroids[k];
            }
        }
    }
    let codebook = mass
        .iter()
        .zip(&first)
        .map(|(&m, &f)| if m > 0.0 { f / m } else { 0.0 })
        .collect();
    (mass, codebook)
}

/// Decoder tables for one pair of source and SI quantizers at the correlation of `pair`.
///
/// At zero correlation every SI level reuses the no-SI tables exactly.
pub fn build_decoder_tables(
    quantizer: &ScalarQuantizer,
    si_quantizer: &ScalarQuantizer,
    ia: &IndexAssignment,
    pair: &JointGaussianPair,
    grid: &GridSpec,
) -> SiTables {
    if pair.rho == 0.0 {
        let (prior, codebook) = no_si_tables(ia, quantizer);
        return SiTables::repeated(&prior, &codebook, si_quantizer.levels());
    }
    let moments = moments_for(quantizer, si_quantizer, pair, grid);
    SiTables::from_moments(ia, &moments)
}

/// Joint cell moments on a grid aligned to the source quantizer.
pub fn moments_for(
    quantizer: &ScalarQuantizer,
    si_quantizer: &ScalarQuantizer,
    pair: &JointGaussianPair,
    grid: &GridSpec,
) -> JointCellMoments {
    let sample_grid = grid.grid_for(&pair.source(), &quantizer.thresholds);
    JointCellMoments::compute(quantizer, si_quantizer, pair, &sample_grid)
}

/// Decoder tables for every level of a correlation ladder plus the no-SI variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderTables {
    pub ladder: CorrelationLadder,
    pub levels: Vec<SiTables>,
    pub no_si_prior: Vec<f64>,
    pub no_si_codebook: Vec<f64>,
}

impl DecoderTables {
    pub fn build(
        quantizer: &ScalarQuantizer,
        si_quantizer: &ScalarQuantizer,
        ia: &IndexAssignment,
        ladder: &CorrelationLadder,
        grid: &GridSpec,
    ) -> Result<Self> {
        let levels = ladder
            .levels()
            .par_iter()
            .map(|&rho| {
                let pair = JointGaussianPair::unit(rho)?;
                Ok(build_decoder_tables(
                    quantizer,
                    si_quantizer,
                    ia,
                    &pair,
                    grid,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (no_si_prior, no_si_codebook) = no_si_tables(ia, quantizer);
        Ok(Self {
            ladder: ladder.clone(),
            levels,
            no_si_prior,
            no_si_codebook,
        })
    }

    pub fn tuples(&self) -> usize {
        self.no_si_prior.len()
    }

    pub fn si_levels(&self) -> usize {
        self.levels.first().map_or(0, |t| t.si_levels)
    }

    /// `(P(I|Ỹ), C(I|Ỹ))` for a correlation level and SI level, or the no-SI pair.
    pub fn lookup(&self, si: SiContext) -> Result<(&[f64], &[f64])> {
        match si {
            SiContext::None => Ok((&self.no_si_prior, &self.no_si_codebook)),
            SiContext::Level {
                rho_level,
                si_level,
            } => {
                let t = self.levels.get(rho_level).ok_or_else(|| {
                    Error::InvalidParameter(format!("no tables for correlation level {rho_level}"))
                })?;
                if si_level >= t.si_levels {
                    return Err(Error::InvalidParameter(format!(
                        "SI level {si_level} out of range for {} levels",
                        t.si_levels
                    )));
                }
                Ok((t.prior(si_level), t.codebook(si_level)))
            }
        }
    }

    /// Per-SI-level tables of one decoder configuration.
    pub fn si_tables(&self, decoder: DecoderSi) -> Result<SiTables> {
        match decoder {
            DecoderSi::Blind => Ok(SiTables::repeated(
                &self.no_si_prior,
                &self.no_si_codebook,
                self.si_levels(),
            )),
            DecoderSi::Ladder(level) => self.levels.get(level).cloned().ok_or_else(|| {
                Error::InvalidParameter(format!("no tables for correlation level {level}"))
            }),
        }
    }
}

/// Side information available to one decoding call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiContext {
    None,
    Level { rho_level: usize, si_level: usize },
}

/// Which tables a decoder uses across all SI levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecoderSi {
    Blind,
    Ladder(usize),
}

/// Settings and diagnostics recorded when a codec is designed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetadata {
    pub seed: u64,
    pub schedule: AnnealSchedule,
    pub grid: GridSpec,
    pub soft_distortion: f64,
    pub hard_distortion: f64,
    pub hardening_gap: f64,
    pub best_restart: usize,
    pub converged: bool,
    pub monotonicity_violations: usize,
    pub warnings: Vec<String>,
}

/// A designed codec: quantizers, hard index assignment, channels and decoder tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecBundle {
    pub quantizer: ScalarQuantizer,
    pub si_quantizer: ScalarQuantizer,
    pub ia: IndexAssignment,
    pub channels: Vec<DescriptionChannel>,
    pub design_rho: f64,
    pub tables: DecoderTables,
    pub metadata: DesignMetadata,
}

impl CodecBundle {
    /// Assembles a bundle around an existing hard assignment.
    pub fn assemble(
        quantizer: ScalarQuantizer,
        si_quantizer: ScalarQuantizer,
        ia: IndexAssignment,
        channels: Vec<DescriptionChannel>,
        design_rho: f64,
        ladder: &CorrelationLadder,
        metadata: DesignMetadata,
    ) -> Result<Self> {
        if !ia.is_hard() {
            return Err(Error::InvalidParameter(
                "a codec bundle needs a hard index assignment".into(),
            ));
        }
        if ia.space().counts() != channels.iter().map(|c| c.index_count).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(
                "index alphabets do not match the channels".into(),
            ));
        }
        let tables = DecoderTables::build(&quantizer, &si_quantizer, &ia, ladder, &metadata.grid)?;
        Ok(Self {
            quantizer,
            si_quantizer,
            ia,
            channels,
            design_rho,
            tables,
            metadata,
        })
    }

    /// Same codec over different channels with the same index alphabets.
    ///
    /// Decoder tables do not depend on the channels, so they are kept.
    pub fn with_channels(&self, channels: Vec<DescriptionChannel>) -> Result<Self> {
        let counts: Vec<usize> = channels.iter().map(|c| c.index_count).collect();
        if counts != self.ia.space().counts() {
            return Err(Error::InvalidParameter(
                "index alphabets do not match the channels".into(),
            ));
        }
        Ok(Self {
            channels,
            ..self.clone()
        })
    }

    /// Same encoder with a Lloyd SI quantizer of `levels` cells and rebuilt tables.
    pub fn with_si_levels(&self, levels: usize) -> Result<Self> {
        let si_quantizer = ScalarQuantizer::lloyd(&self.si_quantizer.source, levels)?;
        Self::assemble(
            self.quantizer.clone(),
            si_quantizer,
            self.ia.clone(),
            self.channels.clone(),
            self.design_rho,
            &self.tables.ladder,
            self.metadata.clone(),
        )
    }

    pub fn ladder(&self) -> &CorrelationLadder {
        &self.tables.ladder
    }

    /// Analytic distortion with the source/SI pair at `rho_real` and the decoder
    /// using `decoder` tables.
    pub fn evaluate(&self, rho_real: f64, decoder: DecoderSi) -> Result<DistortionReport> {
        let pair = JointGaussianPair::unit(rho_real)?;
        let moments = moments_for(
            &self.quantizer,
            &self.si_quantizer,
            &pair,
            &self.metadata.grid,
        );
        let outcomes = OutcomeSpace::new(&self.channels)?;
        let dec = self.tables.si_tables(decoder)?;
        Ok(evaluate_with_decoder(&self.ia, &moments, &outcomes, &dec))
    }

    /// Recomputes the stored tables and returns the largest absolute difference.
    pub fn table_drift(&self) -> Result<f64> {
        let fresh = DecoderTables::build(
            &self.quantizer,
            &self.si_quantizer,
            &self.ia,
            &self.tables.ladder,
            &self.metadata.grid,
        )?;
        let mut drift: f64 = 0.0;
        for (a, b) in fresh.levels.iter().zip(&self.tables.levels) {
            for (x, y) in a
                .prior
                .iter()
                .zip(&b.prior)
                .chain(a.codebook.iter().zip(&b.codebook))
            {
                drift = drift.max((x - y).abs());
            }
        }
        Ok(drift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::GaussianSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(counts: &[usize]) -> TupleSpace {
        TupleSpace::new(counts.to_vec()).unwrap()
    }

    #[test]
    fn ia_validation() {
        assert!(IndexAssignment::new(2, space(&[2]), vec![0.5, 0.5, 1.0, 0.1]).is_err());
        assert!(IndexAssignment::new(1, space(&[2]), vec![1.2, -0.2]).is_err());
        assert!(IndexAssignment::new(1, space(&[2]), vec![1.0]).is_err());
        let ia = IndexAssignment::new(2, space(&[2]), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(ia.is_hard());
        assert_eq!(ia.tuple_of(0), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = IndexAssignment::random(5, space(&[2, 3]), &mut rng);
        for k in 0..5 {
            assert!((r.row(k).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_cases() {
        let probs = [0.2, 0.3, 0.5];
        let hard = IndexAssignment::from_map(space(&[2, 2]), &[0, 3, 1]).unwrap();
        assert_eq!(ia_entropy(&hard, &probs), 0.0);
        let uni = IndexAssignment::uniform(3, space(&[2, 2]));
        assert!((ia_entropy(&uni, &probs) - 2.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let soft = IndexAssignment::random(3, space(&[2, 2]), &mut rng);
        let mut direct = 0.0;
        for k in 0..3 {
            for t in 0..4 {
                let p = soft.get(k, t);
                direct -= probs[k] * p * p.log2();
            }
        }
        assert!((ia_entropy(&soft, &probs) - direct).abs() < 1e-12);
    }

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn tables_without_correlation_reproduce_codewords() {
        let q = ScalarQuantizer::lloyd(&GaussianSource::standard(), 4).unwrap();
        let q_si = ScalarQuantizer::lloyd(&GaussianSource::standard(), 8).unwrap();
        let ia = IndexAssignment::from_map(space(&[2, 2]), &[2, 0, 3, 1]).unwrap();
        let pair = JointGaussianPair::unit(0.0).unwrap();
        let t = build_decoder_tables(&q, &q_si, &ia, &pair, &grid());
        for j in 0..8 {
            for k in 0..4 {
                let tuple = ia.tuple_of(k);
                assert!((t.prior(j)[tuple] - q.cell_probs[k]).abs() < 1e-12);
                assert!((t.codebook(j)[tuple] - q.codewords[k]).abs() < 1e-9);
            }
        }
        // the grid route at a tiny correlation agrees with the exact shortcut
        let near = JointGaussianPair::unit(1e-12).unwrap();
        let t2 = build_decoder_tables(&q, &q_si, &ia, &near, &grid());
        for (a, b) in t.codebook.iter().zip(&t2.codebook) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn binned_codebook_is_weighted_centroid() {
        let q = ScalarQuantizer::lloyd(&GaussianSource::standard(), 4).unwrap();
        let q_si = ScalarQuantizer::lloyd(&GaussianSource::standard(), 4).unwrap();
        // cells 0 and 3 share tuple 0
        let ia = IndexAssignment::from_map(space(&[3]), &[0, 1, 2, 0]).unwrap();
        let pair = JointGaussianPair::unit(0.8).unwrap();
        let t = build_decoder_tables(&q, &q_si, &ia, &pair, &grid());
        let fine = GridSpec {
            half_range: 9.0,
            max_width: 0.01,
            order: 8,
        }
        .grid_for(&GaussianSource::standard(), &q.thresholds);
        for j in 0..4 {
            let f = q_si.si_conditional_density(&pair, j, &fine).unwrap();
            let cell = |k: usize| {
                let (lo, hi) = q.bounds(k);
                let mut m0 = 0.0;
                let mut m1 = 0.0;
                for ((x, w), v) in fine.points().iter().zip(fine.weights()).zip(&f) {
                    if *x > lo && *x <= hi {
                        m0 += w * v;
                        m1 += w * v * x;
                    }
                }
                (m0, m1 / m0)
            };
            let ((p0, c0), (p3, c3)) = (cell(0), cell(3));
            let expected = (p0 * c0 + p3 * c3) / (p0 + p3);
            assert!((t.codebook(j)[0] - expected).abs() < 1e-9, "level {j}");
            assert!((t.prior(j)[0] - (p0 + p3)).abs() < 1e-9);
            assert!((t.prior(j).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unused_tuples_have_zero_prior_and_codebook() {
        let q = ScalarQuantizer::lloyd(&GaussianSource::standard(), 3).unwrap();
        let q_si = ScalarQuantizer::lloyd(&GaussianSource::standard(), 4).unwrap();
        let ia = IndexAssignment::from_map(space(&[2, 2]), &[0, 1, 3]).unwrap();
        assert_eq!(ia.used_tuples(), 3);
        let pair = JointGaussianPair::unit(0.6).unwrap();
        let t = build_decoder_tables(&q, &q_si, &ia, &pair, &grid());
        for j in 0..4 {
            assert_eq!(t.prior(j)[2], 0.0);
            assert_eq!(t.codebook(j)[2], 0.0);
        }
    }

    #[test]
    fn ladder_tables_are_normalized() {
        let q = ScalarQuantizer::lloyd(&GaussianSource::standard(), 8).unwrap();
        let q_si = ScalarQuantizer::lloyd(&GaussianSource::standard(), 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ia = IndexAssignment::random(8, space(&[2, 2]), &mut rng);
        let tables =
            DecoderTables::build(&q, &q_si, &ia, &CorrelationLadder::default(), &grid()).unwrap();
        for level in &tables.levels {
            for j in 0..16 {
                assert!((level.prior(j).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(level.codebook(j).iter().all(|c| c.is_finite()));
            }
        }
        assert!((tables.no_si_prior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
