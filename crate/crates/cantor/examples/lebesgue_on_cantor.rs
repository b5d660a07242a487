//! Lebesgue measure of a fat Cantor set, and adding it to another measure.

use std::sync::Arc;

use cantor_doubling::construction::{middle_interval, AlphaSeq, IntervalR};
use cantor_doubling::measure::{Lebesgue, MeasureOracle};
use cantor_doubling::midpoint::{add_lebesgue, lebesgue_on_c};
use cantor_doubling::numerics::{pow2, rat};
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seq = AlphaSeq::geometric(rat(1, 2), rat(1, 2));
    let (c, _) = middle_interval(seq.clone())?;
    for (a, b) in [(0, 4), (0, 1), (1, 3), (3, 4)] {
        let q = IntervalR::closed(rat(a, 4), rat(b, 4))?;
        let l = lebesgue_on_c(&c, &seq, &q, 30)?;
        println!("|C ∩ {q}| in {} (certified lower end: {})", l.bounds, l.lower_certified);
    }

    let mu = TMeasure::build(Arc::new(c), rat(2, 1))?;
    let sum = add_lebesgue(mu, Lebesgue { lo: rat(0, 1), hi: rat(1, 1) })?;
    let q = IntervalR::closed(rat(0, 1), rat(1, 8))?;
    println!("mu + Lebesgue on {q}: {}", sum.mass(&q, &pow2(-40))?);
    println!("total {}", sum.total(&pow2(-40))?);
    Ok(())
}
