//! Certified rational powers.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::dyadic::Dyadic;
use super::rat::{log2_floor, Rat};
use super::scalar::{Scalar, DEFAULT_PREC};
use super::NumericsError;

/// `v^(1/b)` enclosed with about `prec` significant bits; exact when the root is dyadic.
fn root_bounds(v: &Rat, b: u32, prec: u32) -> (Dyadic, Dyadic) {
    if b == 1 {
        let s = Scalar::from_rat_prec(v, prec);
        return (s.lower().clone(), s.upper().clone());
    }
    let e = Integer::div_floor(&log2_floor(v), &(b as i64));
    let k = prec as i64 + 2 - e;
    let shift = b as i64 * k;
    let (num, den) = if shift >= 0 {
        (v.numer() << (shift as u64), v.denom().clone())
    } else {
        (v.numer().clone(), v.denom() << ((-shift) as u64))
    };
    let (nf, rem) = num.div_rem(&den);
    let nc = if rem.is_zero() { nf.clone() } else { &nf + 1 };
    let r0 = nf.nth_root(b);
    let mut r1 = nc.nth_root(b);
    if num_traits::pow(r1.clone(), b as usize) < nc {
        r1 += 1;
    }
    (Dyadic::new(r0, -k), Dyadic::new(r1, -k))
}

fn split_exponent(p: &Rat) -> Result<(BigInt, u32), NumericsError> {
    let b = p.denom().to_u32().ok_or(NumericsError::ExponentTooLarge)?;
    Ok((p.numer().clone(), b))
}

/// `base^p` with roughly `prec` bits of relative accuracy, no recipe attached.
pub fn pow_prec(base: &Rat, p: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    if base.is_negative() {
        return Err(NumericsError::Domain(format!("negative base {base}")));
    }
    if p.is_zero() {
        return Ok(Scalar::one());
    }
    if base.is_zero() {
        return if p.is_positive() {
            Ok(Scalar::zero())
        } else {
            Err(NumericsError::Domain("zero to a negative power".into()))
        };
    }
    let (a, b) = split_exponent(p)?;
    let a_abs = a.abs().to_u32().ok_or(NumericsError::ExponentTooLarge)?;
    let mut v = Rat::from_integer(num_traits::pow(base.numer().clone(), a_abs as usize))
        / Rat::from_integer(num_traits::pow(base.denom().clone(), a_abs as usize));
    if a.is_negative() {
        v = v.recip();
    }
    let (lo, hi) = root_bounds(&v, b, prec + 4);
    let s = Scalar::from_bounds(lo, hi, prec)?;
    Ok(s)
}

/// `base^p` to absolute width at most `tol`; refinable to tighter tolerances.
pub fn pow_bounds(base: &Rat, p: &Rat, tol: &Rat) -> Result<Scalar, NumericsError> {
    if !tol.is_positive() {
        return Err(NumericsError::Domain("tolerance must be positive".into()));
    }
    let mut prec = DEFAULT_PREC;
    let out = loop {
        let s = pow_prec(base, p, prec)?;
        if s.width().to_rat() <= *tol {
            break s;
        }
        if prec > 1 << 16 {
            return Err(NumericsError::Refinement { achieved: s.width().to_decimal(6, super::Round::Up) });
        }
        prec *= 2;
    };
    let (b, e) = (base.clone(), p.clone());
    Ok(out.with_recipe(Arc::new(move |t: &Rat| pow_bounds(&b, &e, t))))
}

/// Integer power of an enclosure with nonnegative bounds.
pub fn powi_nonneg(x: &Scalar, n: u32) -> Scalar {
    let mut acc = Scalar::one().with_prec(x.prec());
    for _ in 0..n {
        acc = &acc * x;
    }
    acc
}

/// Enclosure of `x^p` for an enclosure `x` with positive lower bound, monotone in `x`.
pub fn pow_scalar(x: &Scalar, p: &Rat, prec: u32) -> Result<Scalar, NumericsError> {
    if x.is_exact() {
        return pow_prec(&x.lower_rat(), p, prec);
    }
    if x.lower().is_negative() {
        return Err(NumericsError::Domain("negative base".into()));
    }
    let lo = pow_prec(&x.lower_rat(), p, prec)?;
    let hi = pow_prec(&x.upper_rat(), p, prec)?;
    if p.is_negative() {
        Scalar::from_bounds(hi.lower().clone(), lo.upper().clone(), prec)
    } else {
        Scalar::from_bounds(lo.lower().clone(), hi.upper().clone(), prec)
    }
}

/// `base^p` as a rational when it is one.
pub fn exact_pow(base: &Rat, p: &Rat) -> Option<Rat> {
    if base.is_negative() {
        return None;
    }
    let a = p.numer().abs().to_usize()?;
    let b = p.denom().to_u32()?;
    let root = |n: &BigInt| -> Option<BigInt> {
        let r = n.nth_root(b);
        (num_traits::pow(r.clone(), b as usize) == *n).then_some(r)
    };
    let r = Rat::new(root(base.numer())?, root(base.denom())?);
    if r.is_zero() && p.is_negative() {
        return None;
    }
    let v = num_traits::pow(r, a);
    Some(if p.is_negative() { v.recip() } else { v })
}

/// True iff `base^p >= 1`, decided exactly by raising both sides to the denominator of `p`.
pub fn pow_ge_one(base: &Rat, p: &Rat) -> bool {
    let a = p.numer();
    let Some(a) = a.abs().to_u32() else { return false };
    let v = Rat::from_integer(num_traits::pow(base.numer().clone(), a as usize))
        / Rat::from_integer(num_traits::pow(base.denom().clone(), a as usize));
    if p.is_negative() {
        v <= Rat::one()
    } else {
        v >= Rat::one()
    }
}
