//! Partial sums of alpha_n^p and the dimension-one profile for a few sequences.

use cantor_doubling::analysis::{dim1_profile, lp_partial_sums};
use cantor_doubling::construction::AlphaSeq;
use cantor_doubling::numerics::rat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seqs = [
        AlphaSeq::constant(rat(1, 3)),
        AlphaSeq::geometric(rat(1, 1), rat(1, 2)),
        AlphaSeq::Harmonic { shift: 1 },
    ];
    for seq in &seqs {
        println!("{seq:?}");
        for p in [rat(1, 2), rat(1, 1), rat(2, 1)] {
            let s = lp_partial_sums(seq, &p, 1024)?;
            let last = s.partial.last().expect("nonempty");
            println!("  p = {p:<3} sum {:>14.6}  tail ratio {:.3}  {:?}", last.to_f64(), s.increment_ratio, s.growth);
        }
        let d = dim1_profile(seq, 256)?;
        println!("  log2 prod(1 - alpha_k) / n at n = 256: {:.5} ({:?})", d.values.last().expect("nonempty").to_f64(), d.trend);
    }
    Ok(())
}
