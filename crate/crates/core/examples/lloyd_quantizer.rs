//! Lloyd-Max quantizers of a unit Gaussian at a few sizes.

use cdmd::prob::GaussianSource;
use cdmd::quantizer::ScalarQuantizer;

fn main() -> cdmd::Result<()> {
    let source = GaussianSource::standard();
    for k in [2, 4, 8, 16, 64, 256] {
        let (q, report) = ScalarQuantizer::lloyd_with_report(&source, k)?;
        println!(
            "K = {k:>3}: MSE {:.3} dB after {} iterations (converged: {})",
            10.0 * q.mse().log10(),
            report.iterations,
            report.converged
        );
    }
    let q = ScalarQuantizer::lloyd(&source, 4)?;
    println!("K = 4 codewords {:?}", q.codewords);
    println!("K = 4 thresholds {:?}", q.thresholds);
    Ok(())
}
