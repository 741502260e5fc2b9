//! Distortion versus SI quantizer size for one encoder.

use cdmd::channel::DescriptionChannel;
use cdmd::codec::{design_annealed, AnnealSchedule, DecoderSi, DesignProblem};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;

fn main() -> cdmd::Result<()> {
    let source = GaussianSource::standard();
    let problem = DesignProblem {
        quantizer: ScalarQuantizer::lloyd(&source, 16)?,
        si_quantizer: ScalarQuantizer::lloyd(&source, 128)?,
        pair: JointGaussianPair::unit(0.8)?,
        channels: vec![DescriptionChannel::bsc(0.005, 0.05, 4)?; 2],
        ladder: CorrelationLadder::default(),
        grid: GridSpec::default(),
    };
    let encoder = design_annealed(&problem, &AnnealSchedule::default(), 1)?;
    let rhos = [0.4, 0.6, 0.8, 0.9, 0.95];
    print!("{:>6}", "N_SI");
    for r in rhos {
        print!(" {:>9}", format!("rho {r}"));
    }
    println!();
    for n_si in [2, 4, 8, 16, 32, 64, 128, 256, 1024] {
        let b = encoder.with_si_levels(n_si)?;
        print!("{n_si:>6}");
        for rho in rhos {
            let d = b.evaluate(rho, DecoderSi::Ladder(b.ladder().quantize(rho)?))?;
            print!(" {:>9.3}", d.d_av_db());
        }
        println!();
    }
    Ok(())
}
