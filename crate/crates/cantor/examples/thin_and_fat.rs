//! Mass left on the n-th stage of the construction: shrinking to zero
//! for the middle-thirds set, levelling off when the gaps shrink fast.

use std::sync::Arc;

use cantor_doubling::analysis::cantor_mass_profile;
use cantor_doubling::construction::{middle_interval, middle_thirds, AlphaSeq};
use cantor_doubling::numerics::rat;
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (quartering, _) = middle_interval(AlphaSeq::geometric(rat(1, 1), rat(1, 4)))?;
    let sets = [("alpha = 1/3", middle_thirds()), ("alpha = 4^-n", quartering)];
    for (name, c) in sets {
        let mu = TMeasure::build(Arc::new(c), rat(1, 2))?;
        let prof = cantor_mass_profile(&mu, 16)?;
        println!("{name}, p = 1/2");
        for n in (1..=16).step_by(3) {
            println!(
                "  mu(C_{n:<2}) = {:.8}  next step removes {:.3e} ({:.4} of it)",
                prof.mass(n).to_f64(),
                prof.decrement(n).to_f64(),
                prof.relative_decrement(n)?.to_f64()
            );
        }
    }
    Ok(())
}
