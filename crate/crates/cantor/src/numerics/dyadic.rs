//! Dyadic rationals `m * 2^e` with directed rounding.

use std::cmp::Ordering;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::rat::{pow2, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// `mant * 2^exp`, normalized so that `mant` is odd (or zero with `exp == 0`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mant: BigInt,
    exp: i64,
}

fn floor_shift(m: &BigInt, s: u64) -> BigInt {
    if m.sign() == Sign::Minus {
        let mag = -m;
        let q: BigInt = (mag + ((BigInt::one() << s) - 1u32)) >> s;
        -q
    } else {
        m >> s
    }
}

impl Dyadic {
    pub fn new(mant: BigInt, exp: i64) -> Self {
        match mant.trailing_zeros() {
            None => Dyadic { mant: BigInt::zero(), exp: 0 },
            Some(0) => Dyadic { mant, exp },
            Some(tz) => Dyadic { mant: mant >> tz, exp: exp + tz as i64 },
        }
    }

    pub fn zero() -> Self {
        Dyadic { mant: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { mant: BigInt::one(), exp: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    pub fn pow2(e: i64) -> Self {
        Dyadic { mant: BigInt::one(), exp: e }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mant.is_positive()
    }

    /// Significant bits of the mantissa.
    pub fn bits(&self) -> u64 {
        self.mant.bits()
    }

    /// `floor(log2 |x|)`; `None` for zero.
    pub fn log2_floor(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64 - 1)
        }
    }

    /// Keep at most `prec` significant bits, rounding in `dir`.
    pub fn round(&self, prec: u32, dir: Round) -> Dyadic {
        let bits = self.mant.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let s = bits - prec as u64;
        let m = match dir {
            Round::Down => floor_shift(&self.mant, s),
            Round::Up => -floor_shift(&(-&self.mant), s),
        };
        Dyadic::new(m, self.exp + s as i64)
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { mant: -&self.mant, exp: self.exp }
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { mant: self.mant.abs(), exp: self.exp }
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(o.exp);
        let a = &self.mant << ((self.exp - e) as u64);
        let b = &o.mant << ((o.exp - e) as u64);
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, o: &Dyadic) -> Dyadic {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        if self.is_zero() || o.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { mant: &self.mant * &o.mant, exp: self.exp + o.exp }
    }

    pub fn mul_pow2(&self, e: i64) -> Dyadic {
        if self.is_zero() {
            return self.clone();
        }
        Dyadic { mant: self.mant.clone(), exp: self.exp + e }
    }

    pub fn to_rat(&self) -> Rat {
        Rat::from_integer(self.mant.clone()) * pow2(self.exp)
    }

    /// Exact conversion when the denominator of `r` is a power of two.
    pub fn from_rat_exact(r: &Rat) -> Option<Dyadic> {
        let d = r.denom();
        let tz = d.trailing_zeros()?;
        if d.bits() - 1 != tz {
            return None;
        }
        Some(Dyadic::new(r.numer().clone(), -(tz as i64)))
    }

    /// `r` rounded to `prec` significant bits; exact dyadics are only rounded
    /// when they exceed `prec` bits.
    pub fn from_rat(r: &Rat, prec: u32, dir: Round) -> Dyadic {
        if let Some(d) = Dyadic::from_rat_exact(r) {
            return d.round(prec, dir);
        }
        let n = r.numer();
        let d = r.denom();
        // choose k so that |n| 2^k / d has at least prec + 1 bits
        let k = prec as i64 + 2 + d.bits() as i64 - n.bits() as i64;
        let (num, den) = if k >= 0 {
            (n << (k as u64), d.clone())
        } else {
            (n.clone(), d << ((-k) as u64))
        };
        let q = match dir {
            Round::Down => num.div_floor(&den),
            Round::Up => -((-num).div_floor(&den)),
        };
        Dyadic::new(q, -k).round(prec, dir)
    }

    /// `self / o` rounded to `prec` bits.
    pub fn div(&self, o: &Dyadic, prec: u32, dir: Round) -> Dyadic {
        assert!(!o.is_zero(), "division by zero dyadic");
        if self.is_zero() {
            return Dyadic::zero();
        }
        // shift so the integer quotient carries at least prec + 1 bits
        let k = (prec as i64 + 2 + o.mant.bits() as i64 - self.mant.bits() as i64).max(0);
        let num = &self.mant << (k as u64);
        let q = match dir {
            Round::Down => num.div_floor(&o.mant),
            Round::Up => -((-num).div_floor(&o.mant)),
        };
        Dyadic::new(q, self.exp - o.exp - k).round(prec, dir)
    }

    /// Scientific decimal string rounded in `dir` to `digits` significant
    /// digits; exact whenever the full expansion fits.
    pub fn to_decimal(&self, digits: usize, dir: Round) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let neg = self.is_negative();
        // value = mant * 2^exp = N / 10^s with N integer
        let (big, s) = if self.exp >= 0 {
            (self.mant.abs() << (self.exp as u64), 0i64)
        } else {
            let s = -self.exp;
            (self.mant.abs() * num_traits::pow(BigInt::from(5), s as usize), s)
        };
        let text = big.to_str_radix(10);
        let len = text.len();
        let (mut kept, inexact) = if len > digits {
            let kept: BigInt = text[..digits].parse().expect("digits");
            let rest = &text[digits..];
            (kept, rest.bytes().any(|b| b != b'0'))
        } else {
            (big.clone(), false)
        };
        let shift = len.saturating_sub(digits) as i64;
        // magnitude rounding: away from zero for (Up, positive) or (Down, negative)
        if inexact && ((dir == Round::Up) != neg) {
            kept += 1;
        }
        let mut ks = kept.to_str_radix(10);
        let mut exp10 = shift - s + ks.len() as i64 - 1;
        let trimmed = ks.trim_end_matches('0');
        if trimmed.is_empty() {
            ks = "0".into();
        } else {
            ks = trimmed.to_string();
        }
        if ks == "0" {
            exp10 = 0;
        }
        let mut out = String::new();
        if neg {
            out.push('-');
        }
        out.push_str(&ks[..1]);
        if ks.len() > 1 {
            out.push('.');
            out.push_str(&ks[1..]);
        }
        if exp10 != 0 {
            out.push_str(&format!("e{exp10}"));
        }
        out
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, o: &Self) -> Ordering {
        let sa = self.mant.sign();
        let sb = o.mant.sign();
        if sa != sb {
            return sa.cmp(&sb);
        }
        if self.is_zero() {
            return Ordering::Equal;
        }
        // same sign: compare magnitudes via leading exponents first
        let la = self.exp + self.mant.bits() as i64;
        let lb = o.exp + o.mant.bits() as i64;
        let mag = if la != lb {
            la.cmp(&lb)
        } else {
            let e = self.exp.min(o.exp);
            let a = self.mant.abs() << ((self.exp - e) as u64);
            let b = o.mant.abs() << ((o.exp - e) as u64);
            a.cmp(&b)
        };
        if sa == Sign::Minus { mag.reverse() } else { mag }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rat::rat;

    #[test]
    fn rounding_is_directed() {
        let third_lo = Dyadic::from_rat(&rat(1, 3), 64, Round::Down);
        let third_hi = Dyadic::from_rat(&rat(1, 3), 64, Round::Up);
        assert!(third_lo.to_rat() < rat(1, 3));
        assert!(third_hi.to_rat() > rat(1, 3));
        assert!(third_hi.to_rat() - third_lo.to_rat() <= pow2(-64));
        let neg_lo = Dyadic::from_rat(&rat(-1, 3), 64, Round::Down);
        assert!(neg_lo.to_rat() < rat(-1, 3));
    }

    #[test]
    fn exact_conversion() {
        let d = Dyadic::from_rat(&rat(3, 8), 2, Round::Down);
        assert_eq!(d.to_rat(), rat(3, 8));
        assert_eq!(Dyadic::from_rat(&rat(5, 8), 2, Round::Down).to_rat(), rat(1, 2));
        assert_eq!(Dyadic::from_rat(&rat(5, 8), 2, Round::Up).to_rat(), rat(3, 4));
    }

    #[test]
    fn ordering() {
        let a = Dyadic::from_rat(&rat(3, 8), 10, Round::Down);
        let b = Dyadic::from_rat(&rat(1, 2), 10, Round::Down);
        assert!(a < b);
        assert!(a.neg() > b.neg());
        assert!(Dyadic::zero() < a);
        assert_eq!(a.add(&b).to_rat(), rat(7, 8));
    }

    #[test]
    fn decimal_strings() {
        assert_eq!(Dyadic::from_rat(&rat(1, 8), 10, Round::Down).to_decimal(40, Round::Down), "1.25e-1");
        assert_eq!(Dyadic::from_int(3).to_decimal(40, Round::Down), "3");
        let t = Dyadic::from_rat(&rat(1, 3), 64, Round::Down);
        let lo = t.to_decimal(5, Round::Down);
        let hi = t.to_decimal(5, Round::Up);
        assert_eq!(lo, "3.3333e-1");
        assert_eq!(hi, "3.3334e-1");
        assert_eq!(Dyadic::from_int(-2).to_decimal(3, Round::Down), "-2");
    }
}
