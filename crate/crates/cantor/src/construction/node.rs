use std::sync::{Arc, OnceLock};

use crate::numerics::{format_rat, Rat};

use super::interval::IntervalR;
use super::ConstructionError;

/// A covering interval `I_{n,i}` (closed). Expansion is lazy.
pub struct Node {
    pub lo: Rat,
    pub hi: Rat,
    pub level: u32,
    /// Opaque payload owned by the generator.
    pub tag: u64,
    expansion: OnceLock<Result<Option<Arc<Expansion>>, ConstructionError>>,
}

/// The open gap of a node together with the children tiling the rest.
pub struct Expansion {
    /// `None` for an empty hole (point nodes, isolated points).
    pub gap: Option<(Rat, Rat)>,
    pub children: Vec<Arc<Node>>,
}

/// Generator output before validation.
#[derive(Clone, Debug)]
pub struct RawExpansion {
    pub gap: Option<(Rat, Rat)>,
    pub children: Vec<RawChild>,
}

#[derive(Clone, Debug)]
pub struct RawChild {
    pub lo: Rat,
    pub hi: Rat,
    pub tag: u64,
}

impl Node {
    pub fn new(lo: Rat, hi: Rat, level: u32, tag: u64) -> Self {
        Node { lo, hi, level, tag, expansion: OnceLock::new() }
    }

    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }

    pub fn interval(&self) -> IntervalR {
        IntervalR::closed(self.lo.clone(), self.hi.clone()).expect("node endpoints ordered")
    }

    pub fn contains(&self, x: &Rat) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn describe(&self) -> String {
        format!("level {} [{}, {}]", self.level, format_rat(&self.lo), format_rat(&self.hi))
    }
}

/// Produces children and gaps of nodes.
pub trait Generator: Send + Sync {
    /// `Ok(None)` marks a leaf of a finite construction.
    fn expand(&self, node: &Node) -> Result<Option<RawExpansion>, ConstructionError>;

    /// Upper bound on the length of every gap in the subtree of `node`, itself included.
    fn subtree_gap_bound(&self, node: &Node) -> Rat {
        node.len()
    }

    /// Built-in generators skip per-expansion validation.
    fn trusted(&self) -> bool {
        false
    }

    /// Nodes sharing a class have translated copies of each other's subtrees.
    fn translation_class(&self, _node: &Node) -> Option<u64> {
        None
    }
}

pub(crate) fn validate(node: &Node, raw: &RawExpansion) -> Result<(), ConstructionError> {
    let bad = |what: &str| ConstructionError::Structure { node: node.describe(), reason: what.to_string() };
    // pieces in order: children and the gap must tile [lo, hi]
    let mut pieces: Vec<(&Rat, &Rat, bool)> = raw.children.iter().map(|c| (&c.lo, &c.hi, false)).collect();
    if let Some((g0, g1)) = &raw.gap {
        if g0 > g1 {
            return Err(bad("gap endpoints reversed"));
        }
        if *g0 < node.lo || *g1 > node.hi {
            return Err(bad("gap leaves the interval"));
        }
        if g0 < g1 {
            pieces.push((g0, g1, true));
        }
    }
    for c in &raw.children {
        if c.lo > c.hi {
            return Err(bad("child endpoints reversed"));
        }
        if c.lo < node.lo || c.hi > node.hi {
            return Err(bad("child not nested in parent"));
        }
    }
    pieces.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(b.1)));
    let mut at = &node.lo;
    for (lo, hi, _) in &pieces {
        if *lo < at {
            return Err(bad("children overlap each other or the gap"));
        }
        if *lo > at {
            return Err(bad("children and gap do not tile the interval"));
        }
        at = hi;
    }
    if *at != node.hi {
        return Err(bad("children and gap do not tile the interval"));
    }
    if node.lo < node.hi && raw.children.iter().any(|c| c.lo == node.lo && c.hi == node.hi) {
        return Err(bad("child equals parent"));
    }
    Ok(())
}

/// A Cantor construction: roots plus a lazy generator.
pub struct Construction {
    roots: Vec<Arc<Node>>,
    generator: Arc<dyn Generator>,
    cache_levels: u32,
}

/// Default number of levels whose expansions are cached.
pub const DEFAULT_CACHE_LEVELS: u32 = 16;

impl Construction {
    pub fn new(
        roots: Vec<(Rat, Rat, u64)>,
        generator: Arc<dyn Generator>,
    ) -> Result<Self, ConstructionError> {
        if roots.is_empty() {
            return Err(ConstructionError::InvalidInterval("no root intervals".into()));
        }
        let roots: Vec<Arc<Node>> =
            roots.into_iter().map(|(lo, hi, tag)| Arc::new(Node::new(lo, hi, 1, tag))).collect();
        for w in roots.windows(2) {
            if w[0].hi > w[1].lo {
                return Err(ConstructionError::Structure {
                    node: w[1].describe(),
                    reason: "root intervals overlap or are unsorted".into(),
                });
            }
        }
        for r in &roots {
            if r.lo > r.hi {
                return Err(ConstructionError::InvalidInterval(r.describe()));
            }
        }
        Ok(Construction { roots, generator, cache_levels: DEFAULT_CACHE_LEVELS })
    }

    /// Levels deeper than this are regenerated on demand instead of cached.
    pub fn with_cache_levels(mut self, levels: u32) -> Self {
        self.cache_levels = levels;
        self
    }

    pub fn roots(&self) -> &[Arc<Node>] {
        &self.roots
    }

    pub fn generator(&self) -> &Arc<dyn Generator> {
        &self.generator
    }

    /// `[min lo, max hi]` over the roots.
    pub fn hull(&self) -> (Rat, Rat) {
        (self.roots[0].lo.clone(), self.roots[self.roots.len() - 1].hi.clone())
    }

    fn build_expansion(&self, node: &Node) -> Result<Option<Arc<Expansion>>, ConstructionError> {
        let Some(raw) = self.generator.expand(node)? else { return Ok(None) };
        if !self.generator.trusted() {
            validate(node, &raw)?;
        }
        let children = raw
            .children
            .into_iter()
            .map(|c| Arc::new(Node::new(c.lo, c.hi, node.level + 1, c.tag)))
            .collect();
        Ok(Some(Arc::new(Expansion { gap: raw.gap, children })))
    }

    pub fn expansion(&self, node: &Node) -> Result<Option<Arc<Expansion>>, ConstructionError> {
        if node.level <= self.cache_levels {
            node.expansion.get_or_init(|| self.build_expansion(node)).clone()
        } else if let Some(e) = node.expansion.get() {
            e.clone()
        } else {
            self.build_expansion(node)
        }
    }

    /// Children of `node`; empty for leaves.
    pub fn children(&self, node: &Node) -> Result<Vec<Arc<Node>>, ConstructionError> {
        Ok(self.expansion(node)?.map(|e| e.children.clone()).unwrap_or_default())
    }

    pub fn gap(&self, node: &Node) -> Result<Option<(Rat, Rat)>, ConstructionError> {
        Ok(self.expansion(node)?.and_then(|e| e.gap.clone()))
    }

    /// All nodes of levels `1..=depth`, level by level in left-to-right order.
    pub fn levels(&self, depth: u32) -> Result<Vec<Vec<Arc<Node>>>, ConstructionError> {
        let mut out = Vec::new();
        let mut cur = self.roots.clone();
        for _ in 0..depth {
            if cur.is_empty() {
                break;
            }
            let mut next = Vec::new();
            for n in &cur {
                next.extend(self.children(n)?);
            }
            out.push(cur);
            cur = next;
        }
        Ok(out)
    }

    /// Visits every node of level `<= depth` depth-first, left to right.
    pub fn visit<F>(&self, depth: u32, mut f: F) -> Result<(), ConstructionError>
    where
        F: FnMut(&Node, Option<&Expansion>) -> Result<(), ConstructionError>,
    {
        let mut stack: Vec<Arc<Node>> = self.roots.iter().rev().cloned().collect();
        while let Some(n) = stack.pop() {
            if n.level > depth {
                continue;
            }
            let e = self.expansion(&n)?;
            f(&n, e.as_deref())?;
            if let Some(e) = e {
                if n.level < depth {
                    stack.extend(e.children.iter().rev().cloned());
                }
            }
        }
        Ok(())
    }

    /// Gaps of nodes with level `<= depth`, sorted, with their levels.
    pub fn gaps(&self, depth: u32) -> Result<Vec<(Rat, Rat, u32)>, ConstructionError> {
        let mut out = Vec::new();
        self.visit(depth, |n, e| {
            if let Some((a, b)) = e.and_then(|e| e.gap.as_ref()) {
                if a < b {
                    out.push((a.clone(), b.clone(), n.level));
                }
            }
            Ok(())
        })?;
        out.sort_by(|x, y| x.0.cmp(&y.0));
        Ok(out)
    }

    /// From `start`, the smallest descendant containing `[lo, hi]`.
    pub fn host(&self, start: &Arc<Node>, lo: &Rat, hi: &Rat, max_level: u32) -> Result<Arc<Node>, ConstructionError> {
        let mut cur = start.clone();
        'outer: while cur.level < max_level {
            for c in self.children(&cur)? {
                if c.lo <= *lo && *hi <= c.hi && !(c.is_point() && lo < hi) {
                    cur = c;
                    continue 'outer;
                }
            }
            break;
        }
        Ok(cur)
    }

    /// Root containing `[lo, hi]`, if any.
    pub fn root_containing(&self, lo: &Rat, hi: &Rat) -> Option<Arc<Node>> {
        self.roots.iter().find(|r| r.lo <= *lo && *hi <= r.hi).cloned()
    }

    /// Where a point sits, descending at most to `max_level` or until `stop`
    /// accepts the current cell.
    pub fn locate<F>(&self, x: &Rat, max_level: u32, mut stop: F) -> Result<Location, ConstructionError>
    where
        F: FnMut(&Node) -> bool,
    {
        let mut cur = match self.roots.iter().find(|r| r.contains(x)) {
            Some(r) => r.clone(),
            None => {
                let (lo, hi) = self.hull();
                if *x < lo || *x > hi {
                    return Ok(Location::Outside);
                }
                // between two roots
                return Ok(Location::BetweenRoots);
            }
        };
        loop {
            if *x == cur.lo || *x == cur.hi {
                return Ok(Location::InSet { level: cur.level });
            }
            if cur.level >= max_level || stop(&cur) {
                return Ok(Location::Cell(cur));
            }
            let Some(e) = self.expansion(&cur)? else {
                return Ok(Location::Cell(cur));
            };
            if let Some((a, b)) = &e.gap {
                if a < x && x < b {
                    return Ok(Location::InGap { lo: a.clone(), hi: b.clone(), level: cur.level });
                }
            }
            match e.children.iter().find(|c| c.contains(x)) {
                Some(c) => cur = c.clone(),
                None => {
                    return Err(ConstructionError::Structure {
                        node: cur.describe(),
                        reason: "point neither in a child nor in the gap".into(),
                    })
                }
            }
        }
    }

    /// Largest gap meeting the closed interval `window` among descendants of
    /// `start` (itself included); ties go to the leftmost. Searches at most
    /// `max_nodes` nodes.
    pub fn largest_gap_meeting(
        &self,
        start: &Arc<Node>,
        window: &IntervalR,
        max_nodes: usize,
    ) -> Result<Option<FoundGap>, ConstructionError> {
        let mut best: Option<FoundGap> = None;
        let mut frontier = vec![start.clone()];
        let mut visited = 0usize;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for n in frontier {
                if n.hi <= window.lo || n.lo >= window.hi || n.is_point() {
                    continue;
                }
                if let Some(b) = &best {
                    if self.generator.subtree_gap_bound(&n) < b.len() {
                        continue;
                    }
                }
                visited += 1;
                if visited > max_nodes {
                    return Err(ConstructionError::Budget(format!(
                        "gap search in [{}, {}] exceeded {max_nodes} nodes",
                        format_rat(&window.lo),
                        format_rat(&window.hi)
                    )));
                }
                let Some(e) = self.expansion(&n)? else { continue };
                if let Some((a, b)) = &e.gap {
                    if a < b && *a < window.hi && *b > window.lo {
                        let cand = FoundGap { lo: a.clone(), hi: b.clone(), level: n.level };
                        let better = match &best {
                            None => true,
                            Some(x) => cand.len() > x.len() || (cand.len() == x.len() && cand.lo < x.lo),
                        };
                        if better {
                            best = Some(cand);
                        }
                    }
                }
                next.extend(e.children.iter().cloned());
            }
            frontier = next;
        }
        Ok(best)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoundGap {
    pub lo: Rat,
    pub hi: Rat,
    pub level: u32,
}

impl FoundGap {
    pub fn len(&self) -> Rat {
        &self.hi - &self.lo
    }
}

/// Result of [`Construction::locate`].
pub enum Location {
    /// Endpoint of a covering interval, hence a point of the set.
    InSet { level: u32 },
    InGap { lo: Rat, hi: Rat, level: u32 },
    /// Undecided inside this covering interval.
    Cell(Arc<Node>),
    Outside,
    BetweenRoots,
}
