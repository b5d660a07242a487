//! Collapse each gap of a Cantor set to its midpoint, carry Lebesgue measure
//! over as atoms, then spread the atoms back into the gaps.

use std::sync::Arc;

use cantor_doubling::construction::{middle_interval, AlphaSeq};
use cantor_doubling::measure::{Lebesgue, MeasureOracle};
use cantor_doubling::midpoint::{atom_table, forward, inverse, m_doubling_report, make_mspace};
use cantor_doubling::numerics::{pow2, rat, Rat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (c, _) = middle_interval(AlphaSeq::geometric(rat(1, 2), rat(1, 2)))?;
    let m = Arc::new(make_mspace(Arc::new(c))?);
    let nu = Arc::new(forward(Arc::new(Lebesgue { lo: rat(0, 1), hi: rat(1, 1) }), m.clone())?);
    let eps = pow2(-50);

    let atoms = atom_table(&nu, 3, &eps)?;
    let back = inverse(nu.clone(), None, 6)?;
    println!("whitney ratio t = {}, separation {}", back.t(), back.separation());
    for row in &atoms {
        let gap = row.atom.gap();
        println!("atom at {:<6} mass {:.8}  gap {gap} gets {:.8}", row.atom.x.to_string(), row.mass.to_f64(), back.mass(&gap, &eps)?.to_f64());
    }

    let scales: Vec<Rat> = (2..=7).map(|j| pow2(-j)).collect();
    let r = m_doubling_report(&nu, &scales, 60, 2).map_err(|e| e.error)?;
    for row in &r.rows {
        println!("ball radius {:<6} max ratio {:.4}", row.scale.to_string(), row.max_ratio.to_f64());
    }
    Ok(())
}
