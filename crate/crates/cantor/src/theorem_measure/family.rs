//! The gap family `𝒢_K` of a closed interval `K = [a, b]` with endpoints in the set:
//! gaps of covering intervals through `a` or `b`, plus the largest gap meeting
//! each dyadic annulus at either end.
//!
//! The family is enumerated lazily. After `extend(side, k)` every family gap
//! meeting `[a + 2^{-k_l}|K|, b - 2^{-k_r}|K|]` is known.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::construction::{Construction, FoundGap, IntervalR, Node};
use crate::measure::MeasureError;
use crate::numerics::{pow2, Rat};

/// End of an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

struct SideState {
    k: u32,
    chain: Vec<Arc<Node>>,
    chain_done: bool,
    annuli: Vec<Option<FoundGap>>,
}

pub(crate) struct Family {
    a: Rat,
    b: Rat,
    len: Rat,
    host: Arc<Node>,
    pub(crate) gaps: BTreeMap<Rat, (Rat, u32)>,
    sides: [SideState; 2],
}

pub(crate) struct Limits {
    pub max_annulus: u32,
    pub max_search_nodes: usize,
}

impl Family {
    pub(crate) fn new(a: Rat, b: Rat, host: Arc<Node>) -> Self {
        let len = &b - &a;
        let side = || SideState { k: 0, chain: vec![host.clone()], chain_done: false, annuli: vec![None, None] };
        Family { a, b, len, host: host.clone(), gaps: BTreeMap::new(), sides: [side(), side()] }
    }

    fn idx(s: Side) -> usize {
        match s {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub(crate) fn depth(&self, s: Side) -> u32 {
        self.sides[Family::idx(s)].k
    }

    /// `2^{-k} |K|`
    pub(crate) fn delta(&self, k: u32) -> Rat {
        &self.len * pow2(-(k as i64))
    }

    fn add(&mut self, lo: &Rat, hi: &Rat, level: u32) {
        if lo < hi && *lo >= self.a && *hi <= self.b {
            self.gaps.entry(lo.clone()).or_insert((hi.clone(), level));
        }
    }

    fn annulus(&self, s: Side, j: u32) -> IntervalR {
        let inner = self.delta(j);
        let outer = self.delta(j - 1);
        let (lo, hi) = match s {
            Side::Left => (&self.a + &inner, &self.a + &outer),
            Side::Right => (&self.b - &outer, &self.b - &inner),
        };
        IntervalR::closed(lo, hi).expect("annulus ordered")
    }

    fn reaches(&self, s: Side, g: &FoundGap, delta: &Rat) -> bool {
        match s {
            Side::Left => g.hi > &self.a + delta,
            Side::Right => g.lo < &self.b - delta,
        }
    }

    fn next_chain(&self, c: &Construction, s: Side, n: &Node) -> Result<Option<Arc<Node>>, MeasureError> {
        for ch in c.children(n)? {
            let hit = match s {
                Side::Left => ch.lo <= self.a && self.a < ch.hi,
                Side::Right => ch.lo < self.b && self.b <= ch.hi,
            };
            if hit {
                return Ok(Some(ch));
            }
        }
        Ok(None)
    }

    /// Deepest chain node containing the annulus, to start searches close by.
    fn search_root(&self, s: Side, ann: &IntervalR) -> Arc<Node> {
        let st = &self.sides[Family::idx(s)];
        st.chain
            .iter()
            .rev()
            .find(|n| n.lo <= ann.lo && ann.hi <= n.hi)
            .cloned()
            .unwrap_or_else(|| self.host.clone())
    }

    pub(crate) fn extend(&mut self, c: &Construction, s: Side, k: u32, lim: &Limits) -> Result<(), MeasureError> {
        let i = Family::idx(s);
        if self.sides[i].k >= k {
            return Ok(());
        }
        let delta = self.delta(k);
        // covering intervals through the endpoint, down to length delta
        while !self.sides[i].chain_done {
            let n = self.sides[i].chain.last().expect("chain nonempty").clone();
            if n.len() <= delta {
                break;
            }
            if let Some((g0, g1)) = c.gap(&n)? {
                self.add(&g0, &g1, n.level);
            }
            match self.next_chain(c, s, &n)? {
                Some(next) => self.sides[i].chain.push(next),
                None => self.sides[i].chain_done = true,
            }
        }
        // annuli j = 2..=k, then deeper ones while their gap still reaches in
        let mut j = 2;
        loop {
            if j > lim.max_annulus {
                return Err(MeasureError::budget(format!("annulus index above {}", lim.max_annulus)));
            }
            if self.sides[i].annuli.len() <= j as usize {
                let ann = self.annulus(s, j);
                let start = self.search_root(s, &ann);
                let found = c.largest_gap_meeting(&start, &ann, lim.max_search_nodes)?;
                if let Some(g) = &found {
                    self.add(&g.lo, &g.hi, g.level);
                }
                self.sides[i].annuli.push(found);
            }
            if j > k {
                match &self.sides[i].annuli[j as usize] {
                    Some(g) if self.reaches(s, g, &delta) => {}
                    _ => break,
                }
            }
            j += 1;
        }
        self.sides[i].k = k;
        Ok(())
    }

    /// Inner edge of the certified region on a side.
    pub(crate) fn frontier(&self, s: Side) -> Rat {
        let d = self.delta(self.depth(s));
        match s {
            Side::Left => &self.a + d,
            Side::Right => &self.b - d,
        }
    }
}
