//! Doubling measure on `[0, 1]` with `μ[0, r] ≍ r^p`.
//!
//! With `m = max(2, smallest m with mp > 1)` the breakpoints `2^{-km}` carry
//! cumulative mass `2^{-kmp}`; the measure is uniform between breakpoints,
//! the middle block `[2^{-m}, 1 - 2^{-m}]` is uniform too, and the whole thing
//! is symmetric about `1/2`.

use std::sync::Mutex;

use num_traits::{Signed, ToPrimitive, Zero};

use crate::construction::IntervalR;
use crate::measure::{MassBounds, MeasureError, MeasureOracle};
use crate::numerics::{pow2, pow_prec, rat, Rat, Scalar, DEFAULT_PREC};

pub struct PowerMeasure {
    p: Rat,
    m: u32,
    prec: u32,
    /// `2^{-kmp}` for `k = 0, 1, ...`
    breaks: Mutex<Vec<Scalar>>,
}

impl std::fmt::Debug for PowerMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PowerMeasure(p = {}, m = {})", self.p, self.m)
    }
}

impl PowerMeasure {
    pub fn new(p: &Rat) -> Result<Self, MeasureError> {
        PowerMeasure::with_prec(p, DEFAULT_PREC)
    }

    pub fn with_prec(p: &Rat, prec: u32) -> Result<Self, MeasureError> {
        if !p.is_positive() {
            return Err(MeasureError::Precondition(format!("exponent {p} must be positive")));
        }
        // smallest m with mp > 1, at least 2
        let m = (rat(1, 1) / p).floor().to_integer().to_u32().ok_or_else(|| MeasureError::Argument("exponent too small".into()))? + 1;
        let m = m.max(2);
        Ok(PowerMeasure { p: p.clone(), m, prec, breaks: Mutex::new(vec![Scalar::one()]) })
    }

    pub fn p(&self) -> &Rat {
        &self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    fn mp_integral(&self) -> bool {
        (Rat::from_integer(self.m.into()) * &self.p).is_integer()
    }

    /// Breakpoint `2^{-km}`.
    pub fn breakpoint(&self, k: u32) -> Rat {
        pow2(-(k as i64) * self.m as i64)
    }

    /// `μ[0, 2^{-km}] = 2^{-kmp}`.
    pub fn breakpoint_mass(&self, k: u32) -> Result<Scalar, MeasureError> {
        let mut b = self.breaks.lock().expect("breakpoint cache");
        while b.len() <= k as usize {
            let j = b.len() as u32;
            b.push(pow_prec(&self.breakpoint(j), &self.p, self.prec)?);
        }
        Ok(b[k as usize].clone())
    }

    /// `μ[0, t]` for `t` in `[0, 1]` (clamped outside).
    pub fn cdf(&self, t: &Rat) -> Result<Scalar, MeasureError> {
        let one = rat(1, 1);
        if !t.is_positive() {
            return Ok(Scalar::zero());
        }
        if *t >= one {
            return Ok(Scalar::one());
        }
        let x1 = self.breakpoint(1);
        if *t > &one - &x1 {
            let rest = self.cdf(&(&one - t))?;
            return Ok((&Scalar::one() - &rest).clamp_nonneg());
        }
        if *t >= x1 {
            let f1 = self.breakpoint_mass(1)?;
            let lam = (t - &x1) / (&one - rat(2, 1) * &x1);
            return Ok(self.interpolate(&f1, &(&Scalar::one() - &f1), &lam));
        }
        // locate k >= 1 with 2^{-(k+1)m} <= t <= 2^{-km}
        let mut k = ((-crate::numerics::log2_floor(t) - 1) / self.m as i64).max(1) as u32;
        while *t > self.breakpoint(k) {
            k -= 1;
        }
        while *t < self.breakpoint(k + 1) {
            k += 1;
        }
        let (xk, xk1) = (self.breakpoint(k), self.breakpoint(k + 1));
        let (fk, fk1) = (self.breakpoint_mass(k)?, self.breakpoint_mass(k + 1)?);
        if *t == xk {
            return Ok(fk);
        }
        if *t == xk1 {
            return Ok(fk1);
        }
        let lam = (t - &xk1) / (&xk - &xk1);
        Ok(self.interpolate(&fk1, &fk, &lam))
    }

    /// `(1 - λ) a + λ b` with `0 <= λ <= 1`.
    fn interpolate(&self, a: &Scalar, b: &Scalar, lam: &Rat) -> Scalar {
        if lam.is_zero() {
            return a.clone();
        }
        if self.mp_integral() && a.is_exact() && b.is_exact() {
            let v = a.lower_rat() + lam * (b.upper_rat() - a.lower_rat());
            return Scalar::from_rat_prec(&v, self.prec);
        }
        let l = Scalar::from_rat_prec(lam, self.prec);
        let one_minus = Scalar::from_rat_prec(&(rat(1, 1) - lam), self.prec);
        (&(&one_minus * a) + &(&l * b)).clamp_nonneg()
    }

    /// `μ[a, b]` for `0 <= a <= b <= 1`.
    pub fn mass_between(&self, a: &Rat, b: &Rat) -> Result<Scalar, MeasureError> {
        if a > b {
            return Err(MeasureError::Argument("reversed interval".into()));
        }
        Ok((&self.cdf(b)? - &self.cdf(a)?).clamp_nonneg())
    }

    /// The affine image on `[lo, hi]` scaled to total mass `total`.
    pub fn scaled_onto(self: &std::sync::Arc<Self>, lo: Rat, hi: Rat, total: Scalar) -> ScaledPower {
        ScaledPower { base: self.clone(), lo, hi, total }
    }
}

impl MeasureOracle for PowerMeasure {
    fn support(&self) -> (Rat, Rat) {
        (rat(0, 1), rat(1, 1))
    }

    fn mass(&self, q: &IntervalR, _eps: &Rat) -> Result<MassBounds, MeasureError> {
        let dom = IntervalR::closed(rat(0, 1), rat(1, 1))?;
        match q.intersection(&dom) {
            Some(i) => self.mass_between(&i.lo, &i.hi),
            None => Ok(Scalar::zero()),
        }
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        let mut v = Vec::new();
        let mut k = 1;
        while v.len() + 2 <= limit {
            let x = self.breakpoint(k);
            if x < scale / rat(64, 1) {
                break;
            }
            v.push(rat(1, 1) - &x);
            v.push(x);
            k += 1;
        }
        v.sort();
        v
    }
}

/// A [`PowerMeasure`] pushed onto `[lo, hi]` with total mass `total`.
#[derive(Clone)]
pub struct ScaledPower {
    base: std::sync::Arc<PowerMeasure>,
    pub lo: Rat,
    pub hi: Rat,
    pub total: Scalar,
}

impl ScaledPower {
    /// Mass of `[lo, t]`.
    pub fn cdf(&self, t: &Rat) -> Result<Scalar, MeasureError> {
        let rel = (t - &self.lo) / (&self.hi - &self.lo);
        Ok(&self.total * &self.base.cdf(&rel)?)
    }
}

impl MeasureOracle for ScaledPower {
    fn support(&self) -> (Rat, Rat) {
        (self.lo.clone(), self.hi.clone())
    }

    fn mass(&self, q: &IntervalR, _eps: &Rat) -> Result<MassBounds, MeasureError> {
        let dom = IntervalR::closed(self.lo.clone(), self.hi.clone())?;
        match q.intersection(&dom) {
            Some(i) => Ok((&self.cdf(&i.hi)? - &self.cdf(&i.lo)?).clamp_nonneg()),
            None => Ok(Scalar::zero()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_two_values() {
        let mu = PowerMeasure::new(&rat(2, 1)).unwrap();
        assert_eq!(mu.m(), 2);
        assert_eq!(mu.cdf(&rat(1, 4)).unwrap().lower_rat(), rat(1, 16));
        let c = mu.cdf(&rat(3, 8)).unwrap();
        assert!(c.is_exact());
        assert_eq!(c.lower_rat(), rat(1, 16) + rat(7, 8) * rat(1, 4));
        let m = mu.mass_between(&rat(1, 16), &rat(1, 4)).unwrap();
        assert!(m.is_exact());
        assert_eq!(m.lower_rat(), rat(1, 16) - rat(1, 256));
    }

    #[test]
    fn exponent_half_has_m_three() {
        let mu = PowerMeasure::new(&rat(1, 2)).unwrap();
        assert_eq!(mu.m(), 3);
        let f = mu.cdf(&rat(1, 8)).unwrap();
        // 2^{-3/2} = 0.35355339059327376220042218105242451964...
        let lo = crate::numerics::parse_rat("0.3535533905932737622004221810524245").unwrap();
        let hi = crate::numerics::parse_rat("0.3535533905932737622004221810524246").unwrap();
        assert!(f.lower_rat() <= hi && f.upper_rat() >= lo);
        assert!(f.width().to_rat() < pow2(-120));
    }

    #[test]
    fn lebesgue_when_p_is_one() {
        let mu = PowerMeasure::new(&rat(1, 1)).unwrap();
        for t in [rat(1, 7), rat(3, 1024), rat(5, 8), rat(99, 100)] {
            let c = mu.cdf(&t).unwrap();
            assert!(c.contains_rat(&t));
        }
        assert!(mu.cdf(&rat(3, 1024)).unwrap().is_exact());
    }
}
