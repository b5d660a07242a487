use std::sync::{Arc, RwLock};

use crate::numerics::{rat, Rat};

use super::alpha::AlphaSeq;
use super::node::{Construction, Generator, Node, RawChild, RawExpansion};
use super::ConstructionError;

/// Middle-interval construction `C(α_n)`: every level-`k` interval of length
/// `ℓ_k` loses its open middle part of relative length `α_k`.
pub struct MiddleInterval {
    seq: AlphaSeq,
    lengths: RwLock<Vec<Rat>>,
}

impl MiddleInterval {
    pub fn new(seq: AlphaSeq) -> Result<Self, ConstructionError> {
        seq.alpha(1)?;
        Ok(MiddleInterval { seq, lengths: RwLock::new(vec![rat(1, 1)]) })
    }

    pub fn seq(&self) -> &AlphaSeq {
        &self.seq
    }

    /// `ℓ_k = 2^{-k+1} ∏_{n<k} (1 - α_n)`.
    pub fn length(&self, k: u32) -> Result<Rat, ConstructionError> {
        let idx = k.max(1) as usize - 1;
        if let Some(l) = self.lengths.read().expect("lengths lock").get(idx) {
            return Ok(l.clone());
        }
        let mut w = self.lengths.write().expect("lengths lock");
        while w.len() <= idx {
            let n = w.len() as u32;
            let a = self.seq.alpha(n)?;
            let next = &w[w.len() - 1] * (rat(1, 1) - a) / rat(2, 1);
            w.push(next);
        }
        Ok(w[idx].clone())
    }
}

impl Generator for MiddleInterval {
    fn expand(&self, node: &Node) -> Result<Option<RawExpansion>, ConstructionError> {
        let child = self.length(node.level + 1)?;
        let g0 = &node.lo + &child;
        let g1 = &node.hi - &child;
        Ok(Some(RawExpansion {
            gap: Some((g0.clone(), g1.clone())),
            children: vec![
                RawChild { lo: node.lo.clone(), hi: g0, tag: 0 },
                RawChild { lo: g1, hi: node.hi.clone(), tag: 0 },
            ],
        }))
    }

    fn subtree_gap_bound(&self, node: &Node) -> Rat {
        let len = node.len();
        if self.seq.nonincreasing_from(node.level) {
            // own gap is the largest: α_k ℓ_k decreases with k
            match self.seq.alpha(node.level) {
                Ok(a) => a * len,
                Err(_) => len,
            }
        } else {
            len
        }
    }

    fn trusted(&self) -> bool {
        true
    }

    fn translation_class(&self, node: &Node) -> Option<u64> {
        Some(node.level as u64)
    }
}

/// `C(α_n)` on `[0, 1]`.
pub fn middle_interval(seq: AlphaSeq) -> Result<(Construction, Arc<MiddleInterval>), ConstructionError> {
    let g = Arc::new(MiddleInterval::new(seq)?);
    let c = Construction::new(vec![(rat(0, 1), rat(1, 1), 0)], g.clone())?;
    Ok((c, g))
}

/// The middle-thirds construction.
pub fn middle_thirds() -> Construction {
    middle_interval(AlphaSeq::Constant(rat(1, 3))).expect("valid sequence").0
}
