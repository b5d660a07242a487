//! A porous Cantor set through a given closed set, with the sums of
//! alpha_n^p growing by at least one per block.

use std::sync::Arc;

use cantor_doubling::construction::{check_porous, embed_porous, materialize, FiniteSet};
use cantor_doubling::numerics::rat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let e = FiniteSet::points(vec![rat(1, 3), rat(1, 2)]);
    let p = rat(1, 2);
    let (c, seq, cert) = embed_porous(Arc::new(e), &p, 3)?;
    for (b, total) in cert.blocks.iter().zip(&cert.cumulative) {
        println!("{} levels with alpha {}: block sum {}, running total {}", b.levels, b.alpha, b.sum, total);
    }
    let depth: u32 = cert.blocks.iter().map(|b| b.levels).sum();
    println!("gaps avoid the set: {}", cert.avoids_set);
    println!("porous to level {depth}: {}", check_porous(&c, &seq, depth)?.holds);

    // a spec file the other commands can read back
    let spec = materialize(&c, 6, Some(&seq))?;
    let text = serde_json::to_string(&spec)?;
    println!("{}", text.chars().take(200).collect::<String>());
    Ok(())
}
