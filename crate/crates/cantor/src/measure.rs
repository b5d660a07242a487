//! The query interface shared by all measures.

use thiserror::Error;

use crate::construction::{ConstructionError, IntervalR};
use crate::numerics::{NumericsError, Rat, Scalar};

/// Certified enclosure of a mass: `0 <= lower <= upper`.
pub type MassBounds = Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("budget exhausted ({reason}); best bounds {bounds:?}")]
    Budget { reason: String, bounds: Option<Scalar> },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl MeasureError {
    pub fn budget(reason: impl Into<String>) -> Self {
        MeasureError::Budget { reason: reason.into(), bounds: None }
    }
}

/// A finite Borel measure on a compact interval answering interval queries.
pub trait MeasureOracle: Send + Sync {
    /// Closed interval carrying all the mass.
    fn support(&self) -> (Rat, Rat);

    /// Mass of `q` with width at most about `eps` (plus rounding).
    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError>;

    fn total(&self, eps: &Rat) -> Result<MassBounds, MeasureError> {
        let (a, b) = self.support();
        self.mass(&IntervalR::closed(a, b)?, eps)
    }

    /// Points worth probing at a given scale (e.g. gap endpoints).
    fn special_points(&self, _scale: &Rat, _limit: usize) -> Vec<Rat> {
        Vec::new()
    }
}

/// Lebesgue measure on a closed interval.
pub struct Lebesgue {
    pub lo: Rat,
    pub hi: Rat,
}

impl MeasureOracle for Lebesgue {
    fn support(&self) -> (Rat, Rat) {
        (self.lo.clone(), self.hi.clone())
    }

    fn mass(&self, q: &IntervalR, _eps: &Rat) -> Result<MassBounds, MeasureError> {
        let dom = IntervalR::closed(self.lo.clone(), self.hi.clone())?;
        Ok(match q.intersection(&dom) {
            Some(i) => Scalar::from_rat(&i.len()),
            None => Scalar::zero(),
        })
    }
}

/// Sum of two measures on the same support.
pub struct SumMeasure<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: MeasureOracle, B: MeasureOracle> SumMeasure<A, B> {
    pub fn new(a: A, b: B) -> Result<Self, MeasureError> {
        if a.support() != b.support() {
            return Err(MeasureError::Argument("supports differ".into()));
        }
        Ok(SumMeasure { a, b })
    }
}

impl<A: MeasureOracle, B: MeasureOracle> MeasureOracle for SumMeasure<A, B> {
    fn support(&self) -> (Rat, Rat) {
        self.a.support()
    }

    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        let half = eps / Rat::from_integer(2.into());
        Ok(&self.a.mass(q, &half)? + &self.b.mass(q, &half)?)
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        let mut v = self.a.special_points(scale, limit);
        v.extend(self.b.special_points(scale, limit));
        v.sort();
        v.dedup();
        v.truncate(limit);
        v
    }
}

impl<T: MeasureOracle + ?Sized> MeasureOracle for std::sync::Arc<T> {
    fn support(&self) -> (Rat, Rat) {
        (**self).support()
    }

    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        (**self).mass(q, eps)
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        (**self).special_points(scale, limit)
    }
}
