//! Sensor positions, pairwise correlations and joint sampling of the field.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, DescriptionChannel};
use crate::error::{Error, Result};
use crate::prob::CorrelationLadder;

/// Smallest eigenvalue kept when the correlation matrix must be repaired.
pub const EIGEN_FLOOR: f64 = 1e-9;

/// Source stream reserved for scenario generation.
const SCENARIO_STREAM: u64 = u64::MAX;

/// Sensors in the unit square with correlation `exp(−d / α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsnScenario {
    pub positions: Vec<[f64; 2]>,
    pub alpha: f64,
    pub pairwise_rho: Vec<Vec<f64>>,
    /// Description channels used by every source.
    pub channels: Vec<DescriptionChannel>,
    pub seed: u64,
}

/// Uniform random positions drawn from `seed`.
pub fn generate_scenario(
    n_nodes: usize,
    alpha: f64,
    channels: Vec<DescriptionChannel>,
    seed: u64,
) -> Result<WsnScenario> {
    if n_nodes < 2 {
        return Err(Error::InvalidParameter(
            "a scenario needs at least two nodes".into(),
        ));
    }
    let mut rng = stream_rng(seed, SCENARIO_STREAM, 0, 0);
    let positions = (0..n_nodes)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    WsnScenario::from_positions(positions, alpha, channels, seed)
}

impl WsnScenario {
    pub fn from_positions(
        positions: Vec<[f64; 2]>,
        alpha: f64,
        channels: Vec<DescriptionChannel>,
        seed: u64,
    ) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidParameter(
                "a scenario needs at least two nodes".into(),
            ));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if positions.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter(
                "positions must lie in the unit square".into(),
            ));
        }
        if channels.is_empty() {
            return Err(Error::InvalidParameter("no description channels".into()));
        }
        let pairwise_rho = positions
            .iter()
            .map(|a| {
                positions
                    .iter()
                    .map(|b| (-(a[0] - b[0]).hypot(a[1] - b[1]) / alpha).exp())
                    .collect()
            })
            .collect();
        Ok(Self {
            positions,
            alpha,
            pairwise_rho,
            channels,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn rho(&self, u: usize, t: usize) -> f64 {
        self.pairwise_rho[u][t]
    }

    /// Correlation to each node's nearest neighbor.
    pub fn nearest_neighbor_rho(&self) -> Vec<f64> {
        (0..self.len())
            .map(|u| {
                (0..self.len())
                    .filter(|&t| t != u)
                    .map(|t| self.rho(u, t))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    /// Ladder level nearest the median nearest-neighbor correlation, the default
    /// design correlation of a shared codec.
    pub fn nominal_rho(&self, ladder: &CorrelationLadder) -> Result<f64> {
        Ok(ladder.level(ladder.quantize(self.median_nn_rho())?))
    }

    /// Median of [`WsnScenario::nearest_neighbor_rho`] (lower median for even counts).
    pub fn median_nn_rho(&self) -> f64 {
        let mut r = self.nearest_neighbor_rho();
        r.sort_by(f64::total_cmp);
        r[(r.len() - 1) / 2]
    }
}

/// Zero-mean Gaussian vector with a given correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianField {
    factor: DMatrix<f64>,
    /// True when the matrix was not positive definite and had its spectrum floored.
    pub projected: bool,
}

impl GaussianField {
    pub fn new(corr: &[Vec<f64>]) -> Result<Self> {
        let n = corr.len();
        if corr.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(
                "correlation matrix is not square".into(),
            ));
        }
        let m = DMatrix::from_fn(n, n, |i, j| corr[i][j]);
        if let Some(ch) = m.clone().cholesky() {
            let l = ch.l();
            if (0..n).all(|i| l[(i, i)] > EIGEN_FLOOR.sqrt()) {
                return Ok(Self {
                    factor: l,
                    projected: false,
                });
            }
        }
        let eig = SymmetricEigen::new(m);
        let floored = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
        let repaired =
            &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
        // restore the unit diagonal
        let d = DVector::from_fn(n, |i, _| 1.0 / repaired[(i, i)].sqrt());
        let repaired = DMatrix::from_fn(n, n, |i, j| repaired[(i, j)] * d[i] * d[j]);
        let factor = repaired
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("correlation matrix cannot be repaired".into()))?
            .l();
        Ok(Self {
            factor,
            projected: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.factor * z).iter().copied().collect()
    }

    /// Correlation matrix actually sampled from.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let c = &self.factor * self.factor.transpose();
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| c[(i, j)]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chans() -> Vec<DescriptionChannel> {
        vec![DescriptionChannel::bsc(0.01, 0.05, 4).unwrap(); 2]
    }

    #[test]
    fn correlation_from_distance() {
        let s =
            WsnScenario::from_positions(vec![[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]], 2.0, chans(), 0)
                .unwrap();
        assert_eq!(s.rho(0, 2), 1.0);
        assert!((s.rho(0, 1) - 0.49307).abs() < 1e-5);
        assert_eq!(s.rho(1, 1), 1.0);
    }

    #[test]
    fn scenarios_are_reproducible() {
        let a = generate_scenario(10, 2.0, chans(), 42).unwrap();
        let b = generate_scenario(10, 2.0, chans(), 42).unwrap();
        let c = generate_scenario(10, 2.0, chans(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.positions, c.positions);
        assert!(generate_scenario(1, 2.0, chans(), 0).is_err());
    }

    #[test]
    fn nearest_neighbor_correlation() {
        let s =
            WsnScenario::from_positions(vec![[0.0, 0.0], [0.1, 0.0], [0.5, 0.0]], 2.0, chans(), 0)
                .unwrap();
        let nn = s.nearest_neighbor_rho();
        assert_eq!(nn[0], s.rho(0, 1));
        assert_eq!(nn[2], s.rho(2, 1));
        assert_eq!(s.median_nn_rho(), s.rho(0, 1));
    }

    #[test]
    fn coincident_nodes_are_projected() {
        let s =
            WsnScenario::from_positions(vec![[0.2, 0.2], [0.2, 0.2], [0.9, 0.1]], 2.0, chans(), 0)
                .unwrap();
        let f = GaussianField::new(&s.pairwise_rho).unwrap();
        assert!(f.projected);
        let c = f.covariance();
        for i in 0..3 {
            assert!((c[i][i] - 1.0).abs() < 1e-9);
        }
        assert!((c[0][1] - 1.0).abs() < 1e-6);
        let mut rng = stream_rng(1, 0, 0, 0);
        let x = f.sample(&mut rng);
        assert!((x[0] - x[1]).abs() < 1e-3);
    }

    #[test]
    fn sample_correlation_matches() {
        let s = generate_scenario(4, 2.0, chans(), 5).unwrap();
        let f = GaussianField::new(&s.pairwise_rho).unwrap();
        assert!(!f.projected);
        let mut rng = stream_rng(2, 0, 0, 0);
        let n = 200_000;
        let mut c01 = 0.0;
        let mut v0 = 0.0;
        for _ in 0..n {
            let x = f.sample(&mut rng);
            c01 += x[0] * x[1];
            v0 += x[0] * x[0];
        }
        assert!((v0 / n as f64 - 1.0).abs() < 0.02);
        assert!((c01 / n as f64 - s.rho(0, 1)).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn rho_matrix_invariants(n in 2usize..12, seed in 0u64..1000) {
            let s = generate_scenario(n, 2.0, chans(), seed).unwrap();
            for u in 0..n {
                prop_assert_eq!(s.rho(u, u), 1.0);
                for t in 0..n {
                    prop_assert_eq!(s.rho(u, t), s.rho(t, u));
                    prop_assert!(s.rho(u, t) > 0.0 && s.rho(u, t) <= 1.0);
                }
                prop_assert!(s.positions[u].iter().all(|c| (0.0..=1.0).contains(c)));
            }
        }
    }
}
