//! Certified logarithms.

use super::dyadic::{Dyadic, Round};
use super::rat::{rat, Rat};
use super::scalar::Scalar;
use super::NumericsError;

/// `2 atanh(z)` for `0 <= z <= 1/3`, with explicit truncation bound.
fn two_atanh(z: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    let zs = Scalar::from_rat_prec(z, prec + 8);
    let z2 = &zs * &zs;
    let mut term = zs.clone();
    let mut sum = Scalar::zero().with_prec(prec + 8);
    // (1/9)^K <= 2^-(prec+8)
    let terms = (prec as usize + 8) * 10 / 31 + 2;
    for k in 0..terms {
        let d = Scalar::from_int(2 * k as i64 + 1);
        sum = &sum + &term.div(&d)?;
        term = &term * &z2;
    }
    // remainder <= z^(2K+1) / ((2K+1)(1 - z^2))
    let k = terms as i64;
    let zr = Dyadic::from_rat(z, prec + 8, Round::Up);
    let mut tail = Dyadic::one();
    for _ in 0..(2 * k + 1) {
        tail = tail.mul(&zr).round(prec + 8, Round::Up);
    }
    let tail = tail.div(&Dyadic::from_int(2 * k + 1), prec + 8, Round::Up);
    let tail = tail.mul(&Dyadic::from_rat(&rat(9, 8), 16, Round::Up));
    let widen = Scalar::from_bounds(Dyadic::zero(), tail, prec + 8)?;
    let two = Scalar::from_int(2);
    Ok(&two * &(&sum + &widen))
}

fn ln_rat(x: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    if *x <= rat(0, 1) {
        return Err(NumericsError::Domain(format!("log of nonpositive {x}")));
    }
    let e = super::rat::log2_floor(x);
    let m = x / super::rat::pow2(e);
    let ln2 = two_atanh(&rat(1, 3), prec)?;
    let z = (&m - rat(1, 1)) / (&m + rat(1, 1));
    let lnm = two_atanh(&z, prec)?;
    Ok(&(&Scalar::from_int(e) * &ln2) + &lnm)
}

/// `log2(x)` for a rational `x > 0`; exact for powers of two.
pub fn log2_rat(x: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    if let Some(e) = super::rat::exact_log2(x) {
        return Ok(Scalar::from_int(e));
    }
    let e = super::rat::log2_floor(x);
    let m = x / super::rat::pow2(e);
    let ln2 = two_atanh(&rat(1, 3), prec)?;
    let z = (&m - rat(1, 1)) / (&m + rat(1, 1));
    let frac = two_atanh(&z, prec)?.div(&ln2)?;
    Ok(&Scalar::from_int(e) + &frac)
}

/// Natural logarithm of a positive rational.
pub fn ln_bounds(x: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    ln_rat(x, prec)
}

/// `log2` of an enclosure with positive lower bound (monotone hull).
pub fn log2_scalar(x: &Scalar, prec: u32) -> Result<Scalar, NumericsError> {
    if !x.lower().is_positive() {
        return Err(NumericsError::Domain("log of enclosure touching zero".into()));
    }
    let lo = log2_rat(&x.lower_rat(), prec)?;
    if x.is_exact() {
        return Ok(lo);
    }
    let hi = log2_rat(&x.upper_rat(), prec)?;
    Ok(lo.hull(&hi))
}
