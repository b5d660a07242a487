//! Exact rationals and their text form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::NumericsError;

/// Exact rational in canonical form (reduced, positive denominator).
pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// `2^e` for any integer `e`.
pub fn pow2(e: i64) -> Rat {
    if e >= 0 {
        Rat::from_integer(BigInt::one() << (e as usize))
    } else {
        Rat::new(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

/// Always `num/den`, also for integers.
pub fn format_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `n`, `n/d`, and finite decimals such as `-0.125` or `2.5e-3`.
pub fn parse_rat(s: &str) -> Result<Rat, NumericsError> {
    let t = s.trim();
    let bad = || NumericsError::Parse(s.to_string());
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rat::new(n, d));
    }
    parse_decimal(t).ok_or_else(bad)
}

fn parse_decimal(t: &str) -> Option<Rat> {
    let (body, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i64>().ok()?),
        None => (t, 0),
    };
    let (neg, body) = match body.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, body.strip_prefix('+').unwrap_or(body)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exp - frac.len() as i64;
    if scale.abs() > 100_000 {
        return None;
    }
    let ten = BigInt::from(10);
    let mut r = Rat::from_integer(digits);
    if scale >= 0 {
        r *= Rat::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= Rat::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// `floor(log2 |r|)` for nonzero `r`.
pub fn log2_floor(r: &Rat) -> i64 {
    debug_assert!(!r.is_zero());
    let n = r.numer().abs();
    let d = r.denom();
    let mut e = n.bits() as i64 - d.bits() as i64;
    // 2^e <= n/d < 2^(e+1) after at most one correction
    let (num, den) = if e >= 0 {
        (n.clone(), d.clone() << (e as usize))
    } else {
        (n.clone() << ((-e) as usize), d.clone())
    };
    if num < den {
        e -= 1;
    }
    e
}

/// Exact power-of-two test; returns the exponent.
pub fn exact_log2(r: &Rat) -> Option<i64> {
    if !r.is_positive() {
        return None;
    }
    let n = r.numer();
    let d = r.denom();
    let is_p2 = |x: &BigInt| x.trailing_zeros() == Some(x.bits() - 1);
    match (n.is_one(), d.is_one()) {
        (_, true) if is_p2(n) => Some(n.bits() as i64 - 1),
        (true, _) if is_p2(d) => Some(-(d.bits() as i64 - 1)),
        _ => None,
    }
}

/// Denominator is a power of two.
pub fn is_dyadic(r: &Rat) -> bool {
    let d = r.denom();
    d.trailing_zeros() == Some(d.bits() - 1)
}

pub fn rat_min(a: &Rat, b: &Rat) -> Rat {
    if a <= b { a.clone() } else { b.clone() }
}

pub fn rat_max(a: &Rat, b: &Rat) -> Rat {
    if a >= b { a.clone() } else { b.clone() }
}

/// Smallest integer `>= r`.
pub fn ceil_int(r: &Rat) -> BigInt {
    r.numer().div_ceil(r.denom())
}

/// Approximate value, only for heuristics and display.
pub fn rat_to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rat("1/3").unwrap(), rat(1, 3));
        assert_eq!(parse_rat("0.2").unwrap(), rat(1, 5));
        assert_eq!(parse_rat("-2.5e-3").unwrap(), rat(-1, 400));
        assert_eq!(parse_rat("7").unwrap(), rat_int(7));
        assert_eq!(parse_rat(".5").unwrap(), rat(1, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("abc").is_err());
        assert!(parse_rat("").is_err());
        assert_eq!(format_rat(&rat(6, 4)), "3/2");
        assert_eq!(format_rat(&rat_int(2)), "2/1");
    }

    #[test]
    fn log2_helpers() {
        assert_eq!(log2_floor(&rat(1, 3)), -2);
        assert_eq!(log2_floor(&rat(1, 4)), -2);
        assert_eq!(log2_floor(&rat(5, 1)), 2);
        assert_eq!(exact_log2(&rat(1, 64)), Some(-6));
        assert_eq!(exact_log2(&rat(8, 1)), Some(3));
        assert_eq!(exact_log2(&rat(3, 4)), None);
        assert!(is_dyadic(&rat(3, 8)));
        assert!(!is_dyadic(&rat(1, 3)));
    }
}
