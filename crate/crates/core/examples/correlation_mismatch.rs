//! Penalty when the encoder is designed for a different correlation than the
//! one the source and decoder see.

use cdmd::channel::DescriptionChannel;
use cdmd::codec::{design_annealed, AnnealSchedule, DecoderSi, DesignProblem};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;

fn main() -> cdmd::Result<()> {
    let source = GaussianSource::standard();
    let rho_real = 0.8;
    let mut rows = Vec::new();
    for rho_enc in [0.5, 0.65, 0.8, 0.9, 0.95] {
        let problem = DesignProblem {
            quantizer: ScalarQuantizer::lloyd(&source, 16)?,
            si_quantizer: ScalarQuantizer::lloyd(&source, 128)?,
            pair: JointGaussianPair::unit(rho_enc)?,
            channels: vec![DescriptionChannel::bsc(0.005, 0.05, 4)?; 2],
            ladder: CorrelationLadder::default(),
            grid: GridSpec::default(),
        };
        let b = design_annealed(&problem, &AnnealSchedule::default(), 1)?;
        let dec = DecoderSi::Ladder(b.ladder().quantize(rho_real)?);
        rows.push((rho_enc, b.evaluate(rho_real, dec)?.d_av_db()));
    }
    let matched = rows.iter().find(|r| r.0 == rho_real).unwrap().1;
    for (rho_enc, d) in rows {
        println!(
            "rho_enc {rho_enc:<5} D_av {d:.3} dB  penalty {:+.3} dB",
            d - matched
        );
    }
    Ok(())
}
