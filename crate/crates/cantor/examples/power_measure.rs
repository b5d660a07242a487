//! The doubling measure on [0, 1] with mass t^p near 0.

use cantor_doubling::measure::MeasureOracle;
use cantor_doubling::numerics::{format_rat, pow2, rat};
use cantor_doubling::power_measure::PowerMeasure;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for p in [rat(1, 2), rat(1, 1), rat(2, 1)] {
        let pm = PowerMeasure::new(&p)?;
        println!("p = {p}, breakpoints 2^(-{}k)", pm.m());
        for k in 0..4 {
            println!("  mu[0, {}] = {}", format_rat(&pm.breakpoint(k)), pm.breakpoint_mass(k)?);
        }
        for t in [rat(1, 10), rat(3, 8), rat(1, 2), rat(9, 10)] {
            println!("  cdf({t}) = {}", pm.cdf(&t)?);
        }
        let total = pm.total(&pow2(-40))?;
        println!("  total {total}");
    }
    Ok(())
}
