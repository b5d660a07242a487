//! Build the doubling measure on a Cantor construction and query it.

use std::sync::Arc;

use cantor_doubling::construction::{middle_thirds, IntervalR};
use cantor_doubling::numerics::{pow2, rat, Rat};
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = std::env::args().nth(1).map(|s| s.parse::<Rat>()).transpose()?.unwrap_or(rat(1, 2));
    let mu = TMeasure::build(Arc::new(middle_thirds()), p.clone())?;
    println!("p = {p}, eta = {}, nice constant {}", mu.eta(), mu.nice_constant());

    let eps = pow2(-40);
    for k in 0..=8 {
        let t = rat(k, 8);
        println!("F({t}) = {}", mu.cdf(&t, &eps)?);
    }

    // how the root is split: the end pieces, then the gaps and intervals between them
    let d = mu.distribution(&rat(0, 1), &rat(1, 1))?.expect("root");
    println!("left end {} carries {}", d.k_left.0, d.k_left.1);
    for piece in &d.middle {
        let kind = if piece.is_gap { "gap" } else { "interval" };
        println!("  {kind} [{}, {}] carries {}", piece.lo, piece.hi, piece.mass);
    }
    println!("right end {} carries {}", d.k_right.0, d.k_right.1);

    let q = IntervalR::closed(rat(1, 9), rat(2, 9))?;
    println!("mass of the gap {q}: {}", mu.measure_of(&q, &eps)?);
    println!("{}", serde_json::to_string_pretty(&mu.ledger())?);
    Ok(())
}
