//! Side-information source selection by distance, mutual information and
//! expected distortion on one sensor field.

use cdmd::channel::{loss_patterns, DescriptionChannel};
use cdmd::codec::{design_annealed, AnnealSchedule, DesignProblem};
use cdmd::prob::{CorrelationLadder, GaussianSource, GridSpec, JointGaussianPair};
use cdmd::quantizer::ScalarQuantizer;
use cdmd::selection::{select_max_mi, select_min_distance, select_min_distortion, Candidates};
use cdmd::simulator::{generate_scenario, SymContext};

fn main() -> cdmd::Result<()> {
    let channels = vec![DescriptionChannel::bsc(0.005, 0.05, 4)?; 2];
    let source = GaussianSource::standard();
    let problem = DesignProblem {
        quantizer: ScalarQuantizer::lloyd(&source, 16)?,
        si_quantizer: ScalarQuantizer::lloyd(&source, 32)?,
        pair: JointGaussianPair::unit(0.6)?,
        channels: channels.clone(),
        ladder: CorrelationLadder::default(),
        grid: GridSpec::default(),
    };
    let ctx = SymContext::new(
        design_annealed(&problem, &AnnealSchedule::default(), 1)?,
        None,
    )?;
    let field = generate_scenario(8, 2.0, channels, 3)?;
    let ladder = ctx.bundle.ladder();
    let levels = field
        .pairwise_rho
        .iter()
        .map(|row| row.iter().map(|&r| ladder.quantize(r)).collect())
        .collect::<cdmd::Result<Vec<Vec<usize>>>>()?;
    let candidates = Candidates {
        levels: &levels,
        rho: &field.pairwise_rho,
    };

    // node 0 lost description 2, everyone else received both
    let patterns_list = loss_patterns(2);
    let all = patterns_list
        .iter()
        .position(|p| p.iter().all(|&r| r))
        .unwrap();
    let partial = patterns_list
        .iter()
        .position(|p| *p == vec![true, false])
        .unwrap();
    let mut patterns = vec![all; field.len()];
    patterns[1] = partial;

    let by_distance = select_min_distance(&field.positions)?;
    let by_mi = select_max_mi(&ctx.selection, candidates, &patterns)?;
    let by_distortion = select_min_distortion(&ctx.selection, candidates, &patterns)?;
    println!("node  distance  mutual-info  min-distortion");
    for u in 0..field.len() {
        println!(
            "{u:>4}  {:>8}  {:>11}  {:>14}",
            by_distance.map[u], by_mi.map[u], by_distortion.map[u]
        );
    }
    Ok(())
}
