//! Minimum average distortion of two descriptions with decoder side information,
//! swept over the loss probability.

use cdmd::bound::{beta, min_avg_distortion, BoundQuery};

fn main() -> cdmd::Result<()> {
    let (rho, r1, r2) = (0.8, 2.3, 2.3);
    println!("rho = {rho}, R1 = {r1}, R2 = {r2}");
    println!(
        "beta = {:.3} dB",
        10.0 * beta(&BoundQuery::unit(rho, r1, r2, 0.0, 0.0)?)?.log10()
    );
    println!(
        "{:>6} {:>10} {:>8} {:>8} {:>9}",
        "mu", "D_min dB", "D1", "D2", "D12"
    );
    for mu in [0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001] {
        let q = BoundQuery::unit(rho, r1, r2, mu, mu)?;
        let b = min_avg_distortion(&q)?;
        println!(
            "{mu:>6} {:>10.3} {:>8.5} {:>8.5} {:>9.6}",
            b.d_min_av_db, b.d1, b.d2, b.d12
        );
    }
    Ok(())
}
