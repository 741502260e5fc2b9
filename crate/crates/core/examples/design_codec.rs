//! Anneal an index assignment for two noisy lossy descriptions and inspect it.

use cdmd::channel::DescriptionChannel;
use cdmd::codec::{anneal_assignment, AnnealSchedule, DecoderSi, DesignProblem};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;

fn main() -> cdmd::Result<()> {
    let source = GaussianSource::standard();
    let problem = DesignProblem {
        quantizer: ScalarQuantizer::lloyd(&source, 16)?,
        si_quantizer: ScalarQuantizer::lloyd(&source, 128)?,
        pair: JointGaussianPair::unit(0.8)?,
        channels: vec![DescriptionChannel::bsc(0.01, 0.05, 4)?; 2],
        ladder: CorrelationLadder::default(),
        grid: GridSpec::default(),
    };
    let schedule = AnnealSchedule::default();
    let (ia, meta, trace) = anneal_assignment(&problem, &schedule, 7)?;
    println!(
        "{} temperatures, final T = {:.3e}",
        trace.temperatures.len(),
        trace.temperatures.last().unwrap()
    );
    println!(
        "soft D = {:.5}, hard D = {:.5}",
        meta.soft_distortion, meta.hard_distortion
    );
    for k in 0..ia.cells() {
        println!("cell {k:>2} -> indices {:?}", ia.indices_of(k));
    }

    let bundle = cdmd::codec::design_annealed(&problem, &schedule, 7)?;
    let report = bundle.evaluate(0.8, DecoderSi::Ladder(4))?;
    println!(
        "D_SE {:.3} dB, D_Ch {:.3} dB, D_av {:.3} dB",
        10.0 * report.d_se.log10(),
        10.0 * report.d_ch.log10(),
        report.d_av_db()
    );
    for p in &report.per_pattern {
        println!(
            "  received {:?}: P = {:.4}, D = {:.5}",
            p.received, p.probability, p.distortion
        );
    }
    Ok(())
}
