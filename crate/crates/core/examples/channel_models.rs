//! Binary symmetric and BPSK/AWGN description channels with packet loss.

use cdmd::channel::{bits_for, stream_rng, ChannelKind, DescriptionChannel, Payload};

fn main() -> cdmd::Result<()> {
    let bsc = DescriptionChannel::bsc(0.05, 0.1, 8)?;
    let awgn = DescriptionChannel::awgn(0.5, 0.1, 8)?;
    println!("8 indices use {} bits", bits_for(8));
    let mut rng = stream_rng(1, 0, 0, 0);
    for _ in 0..4 {
        match bsc.transmit(0, 5, &mut rng)? {
            Some(Payload::Index(j)) => println!("BSC: sent 5, received {j}"),
            _ => println!("BSC: lost"),
        }
    }
    for _ in 0..3 {
        match awgn.transmit(0, 5, &mut rng)? {
            Some(Payload::Soft(v)) => println!("AWGN: sent 5, received {v:.3?}"),
            _ => println!("AWGN: lost"),
        }
    }
    if let ChannelKind::Bsc { p } = awgn.hard_decision().kind {
        println!("hard decisions on the AWGN link see a BSC with p = {p:.4}");
    }
    let m = bsc.transition_matrix()?;
    println!("BSC P(J=0 | I=0) = {:.4}, P(J=1 | I=0) = {:.4}", m[0], m[1]);
    Ok(())
}
