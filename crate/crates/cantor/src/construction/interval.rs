use serde::{Deserialize, Serialize};

use crate::numerics::{format_rat, rat_max, rat_min, rat_serde, Rat};

use super::ConstructionError;

/// Which endpoints belong to the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Closed,
    Open,
    ClosedOpen,
    OpenClosed,
}

impl IntervalKind {
    fn lo_closed(self) -> bool {
        matches!(self, IntervalKind::Closed | IntervalKind::ClosedOpen)
    }

    fn hi_closed(self) -> bool {
        matches!(self, IntervalKind::Closed | IntervalKind::OpenClosed)
    }

    fn from_ends(lo_closed: bool, hi_closed: bool) -> Self {
        match (lo_closed, hi_closed) {
            (true, true) => IntervalKind::Closed,
            (false, false) => IntervalKind::Open,
            (true, false) => IntervalKind::ClosedOpen,
            (false, true) => IntervalKind::OpenClosed,
        }
    }
}

/// Real interval with rational endpoints. `lo == hi` is a degenerate interval:
/// a point when closed, empty otherwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalR {
    #[serde(with = "rat_serde")]
    pub lo: Rat,
    #[serde(with = "rat_serde")]
    pub hi: Rat,
    pub kind: IntervalKind,
}

impl IntervalR {
    pub fn new(lo: Rat, hi: Rat, kind: IntervalKind) -> Result<Self, ConstructionError> {
        if lo > hi {
            return Err(ConstructionError::InvalidInterval(format!(
                "{} > {}",
                format_rat(&lo),
                format_rat(&hi)
            )));
        }
        Ok(IntervalR { lo, hi, kind })
    }

    pub fn closed(lo: Rat, hi: Rat) -> Result<Self, ConstructionError> {
        IntervalR::new(lo, hi, IntervalKind::Closed)
    }

    pub fn open(lo: Rat, hi: Rat) -> Result<Self, ConstructionError> {
        IntervalR::new(lo, hi, IntervalKind::Open)
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn center(&self) -> Rat {
        (&self.lo + &self.hi) / Rat::from_integer(2.into())
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi && self.kind != IntervalKind::Closed
    }

    pub fn contains_point(&self, x: &Rat) -> bool {
        let above = if self.kind.lo_closed() { *x >= self.lo } else { *x > self.lo };
        let below = if self.kind.hi_closed() { *x <= self.hi } else { *x < self.hi };
        above && below
    }

    pub fn intersection(&self, o: &IntervalR) -> Option<IntervalR> {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo.clone(), self.kind.lo_closed())
        } else if o.lo > self.lo {
            (o.lo.clone(), o.kind.lo_closed())
        } else {
            (self.lo.clone(), self.kind.lo_closed() && o.kind.lo_closed())
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi.clone(), self.kind.hi_closed())
        } else if o.hi < self.hi {
            (o.hi.clone(), o.kind.hi_closed())
        } else {
            (self.hi.clone(), self.kind.hi_closed() && o.kind.hi_closed())
        };
        if lo < hi || (lo == hi && lo_closed && hi_closed) {
            Some(IntervalR { lo, hi, kind: IntervalKind::from_ends(lo_closed, hi_closed) })
        } else {
            None
        }
    }

    pub fn intersects(&self, o: &IntervalR) -> bool {
        self.intersection(o).is_some()
    }

    /// Set inclusion `self ⊆ o`.
    pub fn is_subset_of(&self, o: &IntervalR) -> bool {
        if self.is_empty() {
            return true;
        }
        let lo_ok = self.lo > o.lo || (self.lo == o.lo && (o.kind.lo_closed() || !self.kind.lo_closed()));
        let hi_ok = self.hi < o.hi || (self.hi == o.hi && (o.kind.hi_closed() || !self.kind.hi_closed()));
        lo_ok && hi_ok
    }

    pub fn closure(&self) -> IntervalR {
        IntervalR { lo: self.lo.clone(), hi: self.hi.clone(), kind: IntervalKind::Closed }
    }

    /// Smallest interval containing both.
    pub fn hull(&self, o: &IntervalR) -> IntervalR {
        IntervalR { lo: rat_min(&self.lo, &o.lo), hi: rat_max(&self.hi, &o.hi), kind: IntervalKind::Closed }
    }

    /// Distance from `x` to the closure.
    pub fn dist_to(&self, x: &Rat) -> Rat {
        if *x < self.lo {
            &self.lo - x
        } else if *x > self.hi {
            x - &self.hi
        } else {
            Rat::from_integer(0.into())
        }
    }
}

impl std::fmt::Display for IntervalR {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = if self.kind.lo_closed() { '[' } else { '(' };
        let r = if self.kind.hi_closed() { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", format_rat(&self.lo), format_rat(&self.hi))
    }
}
