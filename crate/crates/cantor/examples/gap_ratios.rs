//! How much of each interval's mass its gap takes, against the gap's relative length.

use std::sync::Arc;

use cantor_doubling::analysis::ratio_report;
use cantor_doubling::construction::middle_thirds;
use cantor_doubling::numerics::rat;
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [rat(1, 2), rat(1, 1), rat(2, 1)] {
        let mu = TMeasure::build(Arc::new(middle_thirds()), p.clone())?;
        for depth in [4, 8] {
            let r = ratio_report(&mu, depth)?;
            println!(
                "p = {p} depth {depth}: {} nodes, ratio in [{:.4}, {:.4}], spread {:.4}",
                r.rows.len(),
                r.min.to_f64(),
                r.max.to_f64(),
                r.spread.to_f64()
            );
        }
    }
    Ok(())
}
