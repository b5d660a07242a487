use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::{rat_serde, Rat};

use super::node::{Construction, Generator, Node, RawChild, RawExpansion};
use super::ConstructionError;

/// One listed node: closed interval and optional open gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitNode {
    #[serde(with = "pair_serde")]
    pub interval: (Rat, Rat),
    #[serde(with = "opt_pair_serde", default)]
    pub gap: Option<(Rat, Rat)>,
}

mod pair_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct P(#[serde(with = "rat_serde")] Rat, #[serde(with = "rat_serde")] Rat);

    pub fn serialize<S: Serializer>(p: &(Rat, Rat), s: S) -> Result<S::Ok, S::Error> {
        P(p.0.clone(), p.1.clone()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(Rat, Rat), D::Error> {
        let P(a, b) = P::deserialize(d)?;
        Ok((a, b))
    }
}

mod opt_pair_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct P(#[serde(with = "rat_serde")] Rat, #[serde(with = "rat_serde")] Rat);

    pub fn serialize<S: Serializer>(p: &Option<(Rat, Rat)>, s: S) -> Result<S::Ok, S::Error> {
        p.as_ref().map(|(a, b)| P(a.clone(), b.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(Rat, Rat)>, D::Error> {
        Ok(Option::<P>::deserialize(d)?.map(|P(a, b)| (a, b)))
    }
}

/// Finite construction listed level by level. A node whose gap is given but
/// whose level is the last one gets the two complementary closed pieces as leaves.
pub struct Explicit {
    levels: Vec<Vec<ExplicitNode>>,
    children: Vec<Vec<Vec<usize>>>,
    index: Vec<HashMap<(Rat, Rat), usize>>,
}

impl Explicit {
    pub fn new(levels: Vec<Vec<ExplicitNode>>) -> Result<Self, ConstructionError> {
        if levels.is_empty() || levels[0].is_empty() {
            return Err(ConstructionError::InvalidInterval("explicit construction without nodes".into()));
        }
        let mut children = Vec::new();
        let mut index = Vec::new();
        for (k, lv) in levels.iter().enumerate() {
            let mut idx = HashMap::new();
            for (i, n) in lv.iter().enumerate() {
                if n.interval.0 > n.interval.1 {
                    return Err(ConstructionError::InvalidInterval(format!("level {} node {i}", k + 1)));
                }
                idx.insert(n.interval.clone(), i);
            }
            index.push(idx);
            let mut ch = vec![Vec::new(); lv.len()];
            if let Some(next) = levels.get(k + 1) {
                for (j, c) in next.iter().enumerate() {
                    let parent = lv.iter().position(|p| p.interval.0 <= c.interval.0 && c.interval.1 <= p.interval.1);
                    match parent {
                        Some(p) => ch[p].push(j),
                        None => {
                            return Err(ConstructionError::Structure {
                                node: format!("level {} node {j}", k + 2),
                                reason: "not nested in any parent".into(),
                            })
                        }
                    }
                }
            }
            children.push(ch);
        }
        Ok(Explicit { levels, children, index })
    }

    pub fn construction(levels: Vec<Vec<ExplicitNode>>) -> Result<Construction, ConstructionError> {
        let g = Arc::new(Explicit::new(levels)?);
        let roots = g.levels[0].iter().enumerate().map(|(i, n)| (n.interval.0.clone(), n.interval.1.clone(), i as u64)).collect();
        Construction::new(roots, g)
    }

    pub fn levels(&self) -> &[Vec<ExplicitNode>] {
        &self.levels
    }
}

const LEAF_TAG: u64 = u64::MAX;

impl Generator for Explicit {
    fn expand(&self, node: &Node) -> Result<Option<RawExpansion>, ConstructionError> {
        if node.tag == LEAF_TAG {
            return Ok(None);
        }
        let k = node.level as usize - 1;
        let Some(lv) = self.levels.get(k) else { return Ok(None) };
        let i = match lv.get(node.tag as usize) {
            Some(n) if n.interval == (node.lo.clone(), node.hi.clone()) => node.tag as usize,
            _ => *self.index[k].get(&(node.lo.clone(), node.hi.clone())).ok_or_else(|| {
                ConstructionError::Structure { node: node.describe(), reason: "unknown node".into() }
            })?,
        };
        let me = &lv[i];
        let kids: Vec<RawChild> = if k + 1 < self.levels.len() {
            self.children[k][i]
                .iter()
                .map(|&j| {
                    let c = &self.levels[k + 1][j];
                    RawChild { lo: c.interval.0.clone(), hi: c.interval.1.clone(), tag: j as u64 }
                })
                .collect()
        } else {
            match &me.gap {
                Some((a, b)) => vec![
                    RawChild { lo: node.lo.clone(), hi: a.clone(), tag: LEAF_TAG },
                    RawChild { lo: b.clone(), hi: node.hi.clone(), tag: LEAF_TAG },
                ],
                None => return Ok(None),
            }
        };
        if me.gap.is_none() && kids.is_empty() {
            return Ok(None);
        }
        Ok(Some(RawExpansion { gap: me.gap.clone(), children: kids }))
    }
}
