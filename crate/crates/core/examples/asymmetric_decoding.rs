//! Decode single draws with and without side information, then run a
//! Monte-Carlo comparison of the two decoders.

use cdmd::asym::decode;
use cdmd::channel::{sample_outcome, stream_rng, DescriptionChannel};
use cdmd::codec::{design_annealed, AnnealSchedule, DecoderSi, DesignProblem, SiContext};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;
use cdmd::simulator::{run_asym_experiment, AsymConfig, AsymVariant};
use rand_distr::{Distribution, StandardNormal};

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
    let bundle = design_annealed(&problem, &AnnealSchedule::default(), 1)?;
    let rho_level = bundle.ladder().quantize(0.8)?;

    let mut rng = stream_rng(5, 0, 0, 0);
    for _ in 0..5 {
        let y: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = 0.8 * y + 0.6 * z;
        let idx = bundle.ia.indices_of(bundle.quantizer.cell_of(x));
        let outcome = sample_outcome(&idx, &bundle.channels, &mut rng)?;
        let si = SiContext::Level {
            rho_level,
            si_level: bundle.si_quantizer.cell_of(y),
        };
        let (_, with_si) = decode(&outcome, si, &bundle)?;
        let (_, blind) = decode(&outcome, SiContext::None, &bundle)?;
        println!(
            "x {x:+.3}  sent {idx:?}  received {:?}  x_hat {with_si:+.3} (no SI {blind:+.3})",
            outcome.flags()
        );
    }

    let variants = [
        AsymVariant {
            label: "with SI".into(),
            bundle: &bundle,
            decoder: DecoderSi::Ladder(rho_level),
        },
        AsymVariant {
            label: "no SI".into(),
            bundle: &bundle,
            decoder: DecoderSi::Blind,
        },
    ];
    let config = AsymConfig {
        rho_real: 0.8,
        trials: 50_000,
        seed: 1,
    };
    let run = run_asym_experiment(&variants, &config)?;
    for r in &run.results {
        println!(
            "{}: D_av {:.3} dB ± {:.3}",
            r.label,
            r.d_av_db,
            r.d_av.se_db()
        );
    }
    let gap = run.paired_db(1, 0);
    println!("SI gain {:.3} ± {:.3} dB", gap.mean, gap.se);
    Ok(())
}
