//! Middle-interval Cantor sets and their structural checks.

use cantor_doubling::construction::{
    check_nice, check_porous, check_regular, check_thick, expand, gap_separation_exact, middle_interval,
    ConstructionSpec, AlphaSeq,
};
use cantor_doubling::numerics::rat;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seq in [
        AlphaSeq::constant(rat(1, 3)),
        AlphaSeq::geometric(rat(1, 2), rat(1, 2)),
        AlphaSeq::Harmonic { shift: 1 },
    ] {
        let (c, _) = middle_interval(seq.clone())?;
        let profile = expand(&c, 6)?;
        println!("{seq:?}");
        println!("  nodes per level  {:?}", profile.counts);
        println!("  longest interval {:?}", profile.max_lengths.iter().map(|l| l.to_string()).collect::<Vec<_>>());
        println!("  niceness         {}", check_nice(&c, 6)?);
        println!("  gap separation   {}", gap_separation_exact(&c, 6)?);
        println!("  porous {}  thick {}", check_porous(&c, &seq, 6)?.holds, check_thick(&c, &seq, 6)?.holds);
        let (lo, hi) = check_regular(&c, &seq, 6)?;
        println!("  regular between  {lo} and {hi}");
    }

    // the same set from a spec file
    let spec = ConstructionSpec::from_json(r#"{"kind":"middle_interval","sequence":{"formula":"constant","r":"1/3"}}"#)?;
    let built = spec.build()?;
    let first = &built.construction.roots()[0];
    println!("root {} has gap {:?}", first.describe(), built.construction.gap(first)?);
    Ok(())
}
