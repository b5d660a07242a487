//! Largest ratio of adjacent intervals, scale by scale.

use std::sync::Arc;

use cantor_doubling::analysis::doubling_report;
use cantor_doubling::construction::middle_thirds;
use cantor_doubling::numerics::{pow2, rat, Rat};
use cantor_doubling::power_measure::PowerMeasure;
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scales: Vec<Rat> = (2..=10).map(|j| pow2(-j)).collect();
    let seed = 1;

    let power = PowerMeasure::new(&rat(2, 1))?;
    let mu = TMeasure::build(Arc::new(middle_thirds()), rat(1, 2))?;
    let reports = [
        ("t^2 on [0, 1]", doubling_report(&power, &scales, 200, seed).map_err(|e| e.error)?),
        ("middle thirds, p = 1/2", doubling_report(&mu, &scales, 200, seed).map_err(|e| e.error)?),
    ];
    for (name, r) in reports {
        println!("{name} ({})", r.sampling);
        for row in &r.rows {
            println!("  r = {:<8} {:>4} pairs  max {:.5}  at {}", row.scale.to_string(), row.samples, row.max_ratio.to_f64(), row.worst_at);
        }
        println!("  overall {:.5}", r.global_max().expect("rows").to_f64());
    }
    Ok(())
}
