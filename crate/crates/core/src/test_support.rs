//! Fixtures shared by unit tests.

use crate::channel::{DescriptionChannel, TupleSpace};
use crate::codec::{AnnealSchedule, CodecBundle, DesignMetadata, IndexAssignment};
use crate::prob::{CorrelationLadder, GaussianSource, GridSpec};
use crate::quantizer::ScalarQuantizer;

/// Bundle around a fixed hard assignment on BSC channels.
pub(crate) fn bundle_with(
    k: usize,
    n_si: usize,
    counts: &[usize],
    map: &[usize],
    p: f64,
    mu: f64,
) -> CodecBundle {
    let q = ScalarQuantizer::lloyd(&GaussianSource::standard(), k).unwrap();
    let q_si = ScalarQuantizer::lloyd(&GaussianSource::standard(), n_si).unwrap();
    let channels: Vec<_> = counts
        .iter()
        .map(|&n| DescriptionChannel::bsc(p, mu, n).unwrap())
        .collect();
    let space = TupleSpace::new(counts.to_vec()).unwrap();
    let ia = IndexAssignment::from_map(space, map).unwrap();
    let metadata = DesignMetadata {
        seed: 0,
        schedule: AnnealSchedule::default(),
        grid: GridSpec::default(),
        soft_distortion: 0.0,
        hard_distortion: 0.0,
        hardening_gap: 0.0,
        best_restart: 0,
        converged: true,
        monotonicity_violations: 0,
        warnings: vec![],
    };
    CodecBundle::assemble(
        q,
        q_si,
        ia,
        channels,
        0.0,
        &CorrelationLadder::default(),
        metadata,
    )
    .unwrap()
}
