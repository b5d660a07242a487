//! Balls around the gap midpoints of the middle-thirds set with sub-balls
//! inside the gaps; checks both covering conditions and the mass each level
//! of sub-balls receives.

use std::sync::Arc;

use cantor_doubling::analysis::{porosity_check, porosity_mass_test, CantorSet};
use cantor_doubling::construction::{middle_thirds, AlphaSeq};
use cantor_doubling::midpoint::{make_mspace, midpoint_porosity_cover};
use cantor_doubling::numerics::{pow2, rat};
use cantor_doubling::theorem_measure::TMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = Arc::new(middle_thirds());
    let m = make_mspace(c.clone())?;
    let cover = midpoint_porosity_cover(&m, &AlphaSeq::constant(rat(1, 3)), 8)?;
    let verdict = porosity_check(&cover, &CantorSet { c: &c, max_level: 40 }, 1)?;
    println!("{} balls", cover.len());
    println!("{}", serde_json::to_string_pretty(&verdict)?);

    let mu = TMeasure::build(c, rat(1, 2))?;
    for row in porosity_mass_test(&mu, &cover, &rat(1, 2), &rat(1, 10), &pow2(-30))? {
        println!("level {}: sub-balls carry {:.6}, threshold {:.6}, flagged {}", row.n, row.sum.to_f64(), row.threshold.to_f64(), row.flagged);
    }
    Ok(())
}
