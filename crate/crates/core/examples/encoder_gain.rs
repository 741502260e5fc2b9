//! Gain of designing the encoder for the side information versus an SI-blind
//! encoder, with and without SI at the decoder.

use cdmd::channel::DescriptionChannel;
use cdmd::codec::{design_annealed, AnnealSchedule, CodecBundle, DecoderSi, DesignProblem};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;

fn design(rho: f64) -> cdmd::Result<CodecBundle> {
    let source = GaussianSource::standard();
    let problem = DesignProblem {
        quantizer: ScalarQuantizer::lloyd(&source, 16)?,
        si_quantizer: ScalarQuantizer::lloyd(&source, 128)?,
        pair: JointGaussianPair::unit(rho)?,
        channels: vec![DescriptionChannel::bsc(0.0, 0.05, 4)?; 2],
        ladder: CorrelationLadder::default(),
        grid: GridSpec::default(),
    };
    design_annealed(&problem, &AnnealSchedule::default(), 1)
}

fn main() -> cdmd::Result<()> {
    let blind = design(0.0)?;
    println!(
        "{:>5} {:>9} {:>9} {:>9}",
        "rho", "D dB", "gain1 dB", "gain2 dB"
    );
    for rho in [0.2, 0.4, 0.6, 0.8, 0.9] {
        let aware = design(rho)?;
        let level = DecoderSi::Ladder(aware.ladder().quantize(rho)?);
        let d = aware.evaluate(rho, level)?.d_av_db();
        let d1 = blind.evaluate(rho, level)?.d_av_db();
        let d2 = blind.evaluate(rho, DecoderSi::Blind)?.d_av_db();
        println!("{rho:>5} {d:>9.3} {:>9.3} {:>9.3}", d1 - d, d2 - d);
    }
    Ok(())
}
