//! Atoms whose masses fall off like 2^(-n^2) give a measure on the midpoint
//! space that is not doubling: the ratio grows without bound as balls shrink.

use std::sync::Arc;

use cantor_doubling::construction::middle_thirds;
use cantor_doubling::midpoint::{m_doubling_report, make_mspace, MeasureOnM};
use cantor_doubling::numerics::{pow2, rat, Rat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = Arc::new(make_mspace(Arc::new(middle_thirds()))?);
    let masses = (1..=8i64).map(|n| pow2(-n * n)).collect();
    let nu = MeasureOnM::atomic(m, masses)?;
    let scales: Vec<Rat> = (1..=6).map(|k| rat(1, 2) * num_traits::pow(rat(1, 3), k)).collect();
    let r = m_doubling_report(&nu, &scales, 60, 3).map_err(|e| e.error)?;
    for row in &r.rows {
        println!("radius {:<10} max ratio {:>12.2}", row.scale.to_string(), row.max_ratio.to_f64());
    }
    Ok(())
}
