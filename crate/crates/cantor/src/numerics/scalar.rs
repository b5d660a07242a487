//! Certified real enclosures with dyadic endpoints.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::dyadic::{Dyadic, Round};
use super::rat::{log2_floor, Rat};
use super::NumericsError;

/// Working precision in bits unless a caller asks for more.
pub const DEFAULT_PREC: u32 = 128;

/// Exact results are kept unrounded up to this many mantissa bits.
const EXACT_BITS: u64 = 2048;

/// Re-evaluates a quantity to a requested absolute tolerance.
pub type Recipe = Arc<dyn Fn(&Rat) -> Result<Scalar, NumericsError> + Send + Sync>;

/// A real number known to lie in `[lower, upper]`.
#[derive(Clone)]
pub struct Scalar {
    lo: Dyadic,
    hi: Dyadic,
    prec: u32,
    recipe: Option<Recipe>,
}

impl PartialEq for Scalar {
    fn eq(&self, o: &Self) -> bool {
        self.lo == o.lo && self.hi == o.hi
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.to_decimal(20, Round::Down), self.hi.to_decimal(20, Round::Up))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Scalar {
    pub fn from_bounds(lo: Dyadic, hi: Dyadic, prec: u32) -> Result<Self, NumericsError> {
        if lo > hi {
            return Err(NumericsError::InvalidBounds);
        }
        Ok(Scalar { lo, hi, prec, recipe: None })
    }

    pub fn exact(d: Dyadic) -> Self {
        Scalar { lo: d.clone(), hi: d, prec: DEFAULT_PREC, recipe: None }
    }

    pub fn zero() -> Self {
        Scalar::exact(Dyadic::zero())
    }

    pub fn one() -> Self {
        Scalar::exact(Dyadic::one())
    }

    pub fn from_int(n: i64) -> Self {
        Scalar::exact(Dyadic::from_int(n))
    }

    pub fn from_rat(r: &Rat) -> Self {
        Scalar::from_rat_prec(r, DEFAULT_PREC)
    }

    /// Exact for dyadic `r`, otherwise outward rounded to `prec` bits.
    pub fn from_rat_prec(r: &Rat, prec: u32) -> Self {
        if let Some(d) = Dyadic::from_rat_exact(r) {
            if d.bits() <= EXACT_BITS.max(prec as u64) {
                return Scalar { lo: d.clone(), hi: d, prec, recipe: None };
            }
        }
        Scalar {
            lo: Dyadic::from_rat(r, prec, Round::Down),
            hi: Dyadic::from_rat(r, prec, Round::Up),
            prec,
            recipe: None,
        }
    }

    pub fn with_recipe(mut self, recipe: Recipe) -> Self {
        self.recipe = Some(recipe);
        self
    }

    pub fn lower(&self) -> &Dyadic {
        &self.lo
    }

    pub fn upper(&self) -> &Dyadic {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo)
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn lower_rat(&self) -> Rat {
        self.lo.to_rat()
    }

    pub fn upper_rat(&self) -> Rat {
        self.hi.to_rat()
    }

    /// Approximate midpoint, for display and heuristics only.
    pub fn to_f64(&self) -> f64 {
        let m = self.lo.add(&self.hi).mul_pow2(-1);
        super::rat::rat_to_f64(&m.to_rat())
    }

    pub fn contains_rat(&self, r: &Rat) -> bool {
        self.lo.to_rat() <= *r && *r <= self.hi.to_rat()
    }

    pub fn contains(&self, o: &Scalar) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn overlaps(&self, o: &Scalar) -> bool {
        self.lo <= o.hi && o.lo <= self.hi
    }

    pub fn certainly_lt(&self, o: &Scalar) -> bool {
        self.hi < o.lo
    }

    pub fn certainly_le(&self, o: &Scalar) -> bool {
        self.hi <= o.lo
    }

    pub fn certainly_positive(&self) -> bool {
        self.lo.is_positive()
    }

    /// Same enclosure, computed at a different working precision.
    pub fn with_prec(mut self, prec: u32) -> Self {
        self.prec = prec;
        self
    }

    fn finish(lo: Dyadic, hi: Dyadic, prec: u32) -> Scalar {
        if lo == hi && lo.bits() <= EXACT_BITS.max(prec as u64) {
            return Scalar { lo, hi, prec, recipe: None };
        }
        Scalar { lo: lo.round(prec, Round::Down), hi: hi.round(prec, Round::Up), prec, recipe: None }
    }

    pub fn mul_rat(&self, r: &Rat) -> Scalar {
        self * &Scalar::from_rat_prec(r, self.prec)
    }

    /// Interval quotient; fails if the divisor may vanish.
    pub fn div(&self, o: &Scalar) -> Result<Scalar, NumericsError> {
        if !o.lo.is_positive() && !o.hi.is_negative() {
            return Err(NumericsError::DivisionByZero);
        }
        let prec = self.prec.max(o.prec);
        if self.is_exact() && o.is_exact() {
            let q = self.lo.to_rat() / o.lo.to_rat();
            return Ok(Scalar::from_rat_prec(&q, prec));
        }
        let cands = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let lo = cands.iter().map(|(a, b)| a.div(b, prec, Round::Down)).min().expect("nonempty");
        let hi = cands.iter().map(|(a, b)| a.div(b, prec, Round::Up)).max().expect("nonempty");
        Ok(Scalar { lo, hi, prec, recipe: None })
    }

    /// Elementwise maximum of two enclosures.
    pub fn max(&self, o: &Scalar) -> Scalar {
        Scalar {
            lo: self.lo.clone().max(o.lo.clone()),
            hi: self.hi.clone().max(o.hi.clone()),
            prec: self.prec.max(o.prec),
            recipe: None,
        }
    }

    pub fn min(&self, o: &Scalar) -> Scalar {
        Scalar {
            lo: self.lo.clone().min(o.lo.clone()),
            hi: self.hi.clone().min(o.hi.clone()),
            prec: self.prec.max(o.prec),
            recipe: None,
        }
    }

    /// Smallest enclosure containing both.
    pub fn hull(&self, o: &Scalar) -> Scalar {
        Scalar {
            lo: self.lo.clone().min(o.lo.clone()),
            hi: self.hi.clone().max(o.hi.clone()),
            prec: self.prec.max(o.prec),
            recipe: None,
        }
    }

    /// Clamp the lower bound at zero (for quantities known to be nonnegative).
    pub fn clamp_nonneg(mut self) -> Scalar {
        if self.lo.is_negative() {
            self.lo = Dyadic::zero();
        }
        if self.hi.is_negative() {
            self.hi = Dyadic::zero();
        }
        self
    }

    /// Width at most `tol`, re-evaluating through the recipe when needed.
    pub fn refine(&self, tol: &Rat) -> Result<Scalar, NumericsError> {
        if self.width().to_rat() <= *tol {
            return Ok(self.clone());
        }
        match &self.recipe {
            Some(r) => {
                let out = r(tol)?;
                if out.width().to_rat() <= *tol {
                    Ok(out.with_recipe(r.clone()))
                } else {
                    Err(NumericsError::Refinement { achieved: out.width().to_decimal(6, Round::Up) })
                }
            }
            None => Err(NumericsError::Refinement { achieved: self.width().to_decimal(6, Round::Up) }),
        }
    }

    /// Sum whose recipe refines every addend to `tol / n`.
    pub fn sum_refinable(parts: Vec<Scalar>) -> Scalar {
        let mut acc = Scalar::zero();
        for p in &parts {
            acc = &acc + p;
        }
        let parts = Arc::new(parts);
        let recipe: Recipe = Arc::new(move |tol: &Rat| {
            let n = Rat::from_integer(parts.len().max(1).into());
            let mut each = tol / (n * Rat::from_integer(2.into()));
            for _ in 0..8 {
                let prec = bits_for(&each);
                let mut acc = Scalar::zero().with_prec(prec);
                for p in parts.iter() {
                    acc = &acc + &p.refine(&each)?.with_prec(prec);
                }
                if acc.width().to_rat() <= *tol {
                    return Ok(acc);
                }
                each /= Rat::from_integer(4.into());
            }
            Err(NumericsError::Refinement { achieved: "sum".into() })
        });
        acc.with_recipe(recipe)
    }
}

/// Working precision sufficient for absolute tolerance `tol` on quantities of size <= 2^64.
pub fn bits_for(tol: &Rat) -> u32 {
    let e = if *tol > Rat::from_integer(0.into()) { -log2_floor(tol) } else { 0 };
    (e.max(0) as u32 + 80).max(DEFAULT_PREC)
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, o: &Scalar) -> Scalar {
        Scalar::finish(self.lo.add(&o.lo), self.hi.add(&o.hi), self.prec.max(o.prec))
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, o: &Scalar) -> Scalar {
        Scalar::finish(self.lo.sub(&o.hi), self.hi.sub(&o.lo), self.prec.max(o.prec))
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, o: &Scalar) -> Scalar {
        let prec = self.prec.max(o.prec);
        if !self.lo.is_negative() && !o.lo.is_negative() {
            return Scalar::finish(self.lo.mul(&o.lo), self.hi.mul(&o.hi), prec);
        }
        let c = [self.lo.mul(&o.lo), self.lo.mul(&o.hi), self.hi.mul(&o.lo), self.hi.mul(&o.hi)];
        let lo = c.iter().min().expect("nonempty").clone();
        let hi = c.iter().max().expect("nonempty").clone();
        Scalar::finish(lo, hi, prec)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar { lo: self.hi.neg(), hi: self.lo.neg(), prec: self.prec, recipe: None }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Scalar {
            type Output = Scalar;
            fn $m(self, o: Scalar) -> Scalar {
                (&self).$m(&o)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $m(self, o: &Scalar) -> Scalar {
                (&self).$m(o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(it: I) -> Scalar {
        it.fold(Scalar::zero(), |a, b| &a + &b)
    }
}
