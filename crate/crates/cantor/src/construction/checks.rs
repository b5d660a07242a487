use serde::Serialize;

use crate::numerics::{format_rat, rat, Rat, Scalar};

use super::alpha::AlphaSeq;
use super::node::{Construction, Node};
use super::ConstructionError;

/// Node named in a failed check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeWitness {
    pub level: u32,
    pub interval: (String, String),
    pub gap: Option<(String, String)>,
}

impl NodeWitness {
    fn of(node: &Node, gap: Option<&(Rat, Rat)>) -> Self {
        NodeWitness {
            level: node.level,
            interval: (format_rat(&node.lo), format_rat(&node.hi)),
            gap: gap.map(|(a, b)| (format_rat(a), format_rat(b))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub holds: bool,
    pub depth: u32,
    pub witness: Option<NodeWitness>,
}

fn gap_len(g: Option<&(Rat, Rat)>) -> Rat {
    g.map(|(a, b)| b - a).unwrap_or_else(|| rat(0, 1))
}

/// `sup 2 dist(center(I), closure(J)) / |I|` over nodes up to `depth`; a value
/// below 1 certifies niceness with any constant above it.
pub fn check_nice(c: &Construction, depth: u32) -> Result<Scalar, ConstructionError> {
    let mut worst = rat(0, 1);
    c.visit(depth, |n, e| {
        let Some(e) = e else { return Ok(()) };
        if n.is_point() {
            return Ok(());
        }
        let (a, b) = match &e.gap {
            Some((a, b)) if a < b => (a, b),
            _ => {
                return Err(ConstructionError::NotApplicable(format!(
                    "degenerate gap at {}",
                    n.describe()
                )))
            }
        };
        let mid = (&n.lo + &n.hi) / rat(2, 1);
        let d = if mid < *a {
            a - &mid
        } else if mid > *b {
            &mid - b
        } else {
            rat(0, 1)
        };
        let v = rat(2, 1) * d / n.len();
        if v > worst {
            worst = v;
        }
        Ok(())
    })?;
    Ok(Scalar::from_rat(&worst))
}

fn check_each<F>(c: &Construction, depth: u32, mut ok: F) -> Result<Verdict, ConstructionError>
where
    F: FnMut(&Node, Option<&(Rat, Rat)>) -> Result<bool, ConstructionError>,
{
    let mut witness = None;
    c.visit(depth, |n, e| {
        if witness.is_some() {
            return Ok(());
        }
        let Some(e) = e else { return Ok(()) };
        let g = e.gap.as_ref();
        if !ok(n, g)? {
            witness = Some(NodeWitness::of(n, g));
        }
        Ok(())
    })?;
    Ok(Verdict { holds: witness.is_none(), depth, witness })
}

/// `|J_{n,i}| >= α_n |I_{n,i}|` for all nodes up to `depth`.
pub fn check_porous(c: &Construction, seq: &AlphaSeq, depth: u32) -> Result<Verdict, ConstructionError> {
    check_each(c, depth, |n, g| Ok(gap_len(g) >= seq.alpha(n.level)? * n.len()))
}

/// `|J_{n,i}| <= α_n |I_{n,i}|` for all nodes up to `depth`.
pub fn check_thick(c: &Construction, seq: &AlphaSeq, depth: u32) -> Result<Verdict, ConstructionError> {
    check_each(c, depth, |n, g| Ok(gap_len(g) <= seq.alpha(n.level)? * n.len()))
}

/// Best constants `λ <= |J|/(α_n |I|) <= Λ` over nondegenerate nodes up to `depth`.
pub fn check_regular(c: &Construction, seq: &AlphaSeq, depth: u32) -> Result<(Rat, Rat), ConstructionError> {
    let mut lo: Option<Rat> = None;
    let mut hi: Option<Rat> = None;
    c.visit(depth, |n, e| {
        let Some(e) = e else { return Ok(()) };
        if n.is_point() {
            return Ok(());
        }
        let r = gap_len(e.gap.as_ref()) / (seq.alpha(n.level)? * n.len());
        if lo.as_ref().is_none_or(|l| r < *l) {
            lo = Some(r.clone());
        }
        if hi.as_ref().is_none_or(|h| r > *h) {
            hi = Some(r);
        }
        Ok(())
    })?;
    match (lo, hi) {
        (Some(l), Some(h)) => Ok((l, h)),
        _ => Err(ConstructionError::NotApplicable("no nondegenerate nodes".into())),
    }
}

/// `|J| < (1 - c)/3 |I|` for every node, with `c` the niceness constant.
pub fn check_small_gaps(c: &Construction, c_nice: &Scalar, depth: u32) -> Result<Verdict, ConstructionError> {
    let bound = (rat(1, 1) - c_nice.upper_rat()) / rat(3, 1);
    check_each(c, depth, |n, g| Ok(n.is_point() || gap_len(g) < &bound * n.len()))
}

/// Minimum over adjacent gaps `J, J'` (levels `<= depth`) of `|K| / min(|J|, |J'|)`
/// where `K` is the closed interval between them.
pub fn gap_separation_exact(c: &Construction, depth: u32) -> Result<Rat, ConstructionError> {
    let gaps = c.gaps(depth)?;
    if gaps.len() < 2 {
        return Err(ConstructionError::NotApplicable("fewer than two gaps".into()));
    }
    let mut best: Option<Rat> = None;
    for w in gaps.windows(2) {
        let k = &w[1].0 - &w[0].1;
        let m = crate::numerics::rat_min(&(&w[0].1 - &w[0].0), &(&w[1].1 - &w[1].0));
        let v = k / m;
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    }
    Ok(best.expect("at least one pair"))
}

pub fn gap_separation(c: &Construction, depth: u32) -> Result<Scalar, ConstructionError> {
    Ok(Scalar::from_rat(&gap_separation_exact(c, depth)?))
}

/// Per-level node counts and maximal lengths.
#[derive(Clone, Debug, Serialize)]
pub struct ShrinkProfile {
    pub counts: Vec<usize>,
    #[serde(serialize_with = "ser_rats")]
    pub max_lengths: Vec<Rat>,
}

fn ser_rats<S: serde::Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
    crate::numerics::rat_vec_serde::serialize(v, s)
}

/// Materializes levels `1..=depth`, validating every expansion.
pub fn expand(c: &Construction, depth: u32) -> Result<ShrinkProfile, ConstructionError> {
    let mut counts = Vec::new();
    let mut max_lengths = Vec::new();
    let mut cur = c.roots().to_vec();
    for _ in 0..depth {
        if cur.is_empty() {
            break;
        }
        counts.push(cur.len());
        max_lengths.push(cur.iter().map(|n| n.len()).max().expect("nonempty"));
        let mut next = Vec::new();
        for n in &cur {
            if let Some(e) = c.expansion(n)? {
                let raw = super::node::RawExpansion {
                    gap: e.gap.clone(),
                    children: e
                        .children
                        .iter()
                        .map(|k| super::node::RawChild { lo: k.lo.clone(), hi: k.hi.clone(), tag: k.tag })
                        .collect(),
                };
                super::node::validate(n, &raw)?;
                next.extend(e.children.iter().cloned());
            }
        }
        cur = next;
    }
    for w in max_lengths.windows(2) {
        if w[1] > w[0] {
            return Err(ConstructionError::Structure {
                node: format!("level {}", counts.len()),
                reason: "maximal length increased".into(),
            });
        }
    }
    Ok(ShrinkProfile { counts, max_lengths })
}
