use std::sync::{Arc, Mutex};

use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::numerics::{format_rat, pow_prec, rat, rat_serde, rat_to_f64, Rat, Scalar, DEFAULT_PREC};

use super::alpha::AlphaSeq;
use super::checks::{check_porous, Verdict};
use super::node::{Construction, Generator, Node, RawChild, RawExpansion};
use super::ConstructionError;

/// Access to a closed nowhere dense set `E ⊂ [0, 1]`.
pub trait AvoidanceOracle: Send + Sync {
    /// An open interval inside the middle half of `[lo, hi]` that misses `E`.
    fn gap_in(&self, lo: &Rat, hi: &Rat) -> Option<(Rat, Rat)>;

    /// Whether `E` meets the open interval `(a, b)`.
    fn meets(&self, a: &Rat, b: &Rat) -> bool;
}

/// Finite union of points and closed intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteSet {
    #[serde(with = "crate::numerics::rat_vec_serde", default)]
    pub points: Vec<Rat>,
    #[serde(default)]
    pub intervals: Vec<ClosedPiece>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedPiece(#[serde(with = "rat_serde")] pub Rat, #[serde(with = "rat_serde")] pub Rat);

impl FiniteSet {
    pub fn points(points: Vec<Rat>) -> Self {
        FiniteSet { points, intervals: Vec::new() }
    }

    fn blocks(&self) -> Vec<(Rat, Rat)> {
        let mut b: Vec<(Rat, Rat)> = self.points.iter().map(|p| (p.clone(), p.clone())).collect();
        b.extend(self.intervals.iter().map(|ClosedPiece(s, t)| (s.clone(), t.clone())));
        b.sort();
        b
    }
}

impl AvoidanceOracle for FiniteSet {
    /// Largest component of the open middle half minus `E`; ties go left.
    fn gap_in(&self, lo: &Rat, hi: &Rat) -> Option<(Rat, Rat)> {
        let q = (hi - lo) / rat(4, 1);
        let (m0, m1) = (lo + &q, hi - &q);
        let mut best: Option<(Rat, Rat)> = None;
        let mut consider = |a: Rat, b: Rat| {
            if a < b && best.as_ref().is_none_or(|(x, y)| &b - &a > y - x) {
                best = Some((a, b));
            }
        };
        let mut at = m0.clone();
        for (s, t) in self.blocks() {
            if t < m0 || s > m1 {
                continue;
            }
            if s > at {
                consider(at.clone(), s.clone());
            }
            if t > at {
                at = t;
            }
        }
        consider(at, m1);
        best
    }

    fn meets(&self, a: &Rat, b: &Rat) -> bool {
        self.blocks().iter().any(|(s, t)| s < b && t > a)
    }
}

/// `M^{1-p} (r/2)^p >= 1` for `0 < p < 1`, via `M^{b-a} (r/2)^a >= 1` where `p = a/b`.
pub fn block_inequality(m: u64, r: &Rat, p: &Rat) -> bool {
    let (Some(a), Some(b)) = (p.numer().to_u32(), p.denom().to_u32()) else { return false };
    let lhs = num_traits::pow(Rat::from_integer(m.into()), (b - a) as usize) * num_traits::pow(r / rat(2, 1), a as usize);
    lhs >= rat(1, 1)
}

/// Smallest `M >= 1` with `M^{1-p} (r/2)^p >= 1`, decided in exact arithmetic.
pub fn block_length(r: &Rat, p: &Rat) -> Result<u32, ConstructionError> {
    let holds = |m: u64| block_inequality(m, r, p);
    let pf = rat_to_f64(p);
    let est = (2.0 / rat_to_f64(r)).powf(pf / (1.0 - pf));
    if !est.is_finite() || est > 1e9 {
        return Err(ConstructionError::Budget(format!("block length estimate {est:.3e} too large")));
    }
    let mut m = (est.floor() as u64).max(1);
    while m > 1 && holds(m - 1) {
        m -= 1;
    }
    while !holds(m) {
        m += 1;
    }
    Ok(m as u32)
}

#[derive(Clone, Debug)]
struct StepInterval {
    lo: Rat,
    hi: Rat,
    center: Rat,
    delta: Rat,
    gap: (Rat, Rat),
}

#[derive(Clone, Debug)]
struct Step {
    intervals: Vec<StepInterval>,
    m: u32,
    alpha: Rat,
    min_relative_gap: Rat,
}

/// Generator for the porous embedding: each step splits every current
/// interval at the center of an avoiding gap `G` and removes `G` in `2M`
/// equal pieces, paired from the middle outwards, over `M` levels.
pub struct Embedding {
    oracle: Arc<dyn AvoidanceOracle>,
    p: Rat,
    steps: Mutex<Vec<Arc<Step>>>,
}

const ROLE_LEFT: u64 = 0;
const ROLE_RIGHT: u64 = 1;
const ROLE_POINT: u64 = 2;

fn tag(role: u64, step: u64, j: u64, idx: u64) -> u64 {
    (role << 62) | (step << 54) | (j << 34) | idx
}

fn untag(t: u64) -> (u64, usize, u32, usize) {
    (t >> 62, ((t >> 54) & 0xff) as usize, ((t >> 34) & 0xf_ffff) as u32, (t & 0x3_ffff_ffff) as usize)
}

impl Embedding {
    fn make_step(&self, parents: &[(Rat, Rat)]) -> Result<Step, ConstructionError> {
        let mut intervals = Vec::with_capacity(parents.len());
        let mut rmin: Option<Rat> = None;
        for (lo, hi) in parents {
            let g = self.oracle.gap_in(lo, hi).ok_or_else(|| ConstructionError::Embedding {
                interval: format!("[{}, {}]", format_rat(lo), format_rat(hi)),
                reason: "oracle found no admissible gap".into(),
            })?;
            let len = hi - lo;
            let q = &len / rat(4, 1);
            let admissible = &g.1 - &g.0 <= &len / rat(2, 1)
                && g.0 >= *lo
                && g.1 <= *hi
                && g.0 < hi - &q
                && g.1 > lo + &q
                && !self.oracle.meets(&g.0, &g.1);
            if !admissible {
                return Err(ConstructionError::Embedding {
                    interval: format!("[{}, {}]", format_rat(lo), format_rat(hi)),
                    reason: "oracle gap not admissible".into(),
                });
            }
            let r = (&g.1 - &g.0) / &len;
            if rmin.as_ref().is_none_or(|x| r < *x) {
                rmin = Some(r);
            }
            intervals.push((lo.clone(), hi.clone(), g));
        }
        let rmin = rmin.ok_or_else(|| ConstructionError::Embedding { interval: "-".into(), reason: "empty step".into() })?;
        let m = block_length(&rmin, &self.p)?;
        let two_m = rat(2 * m as i64, 1);
        let alpha = &rmin / &two_m;
        let intervals = intervals
            .into_iter()
            .map(|(lo, hi, g)| StepInterval {
                center: (&g.0 + &g.1) / rat(2, 1),
                delta: (&g.1 - &g.0) / &two_m,
                lo,
                hi,
                gap: g,
            })
            .collect();
        Ok(Step { intervals, m, alpha, min_relative_gap: rmin })
    }

    fn step(&self, s: usize) -> Result<Arc<Step>, ConstructionError> {
        let mut steps = self.steps.lock().expect("steps lock");
        while steps.len() <= s {
            let parents: Vec<(Rat, Rat)> = match steps.last() {
                None => vec![(rat(0, 1), rat(1, 1))],
                Some(prev) => prev
                    .intervals
                    .iter()
                    .flat_map(|i| [(i.lo.clone(), i.gap.0.clone()), (i.gap.1.clone(), i.hi.clone())])
                    .collect(),
            };
            if steps.len() >= 255 || parents.len() > (1 << 30) {
                return Err(ConstructionError::Budget("too many embedding steps".into()));
            }
            let st = self.make_step(&parents)?;
            steps.push(Arc::new(st));
        }
        Ok(steps[s].clone())
    }

    fn halves(&self, s: usize, idx: usize) -> Result<Vec<RawChild>, ConstructionError> {
        let st = self.step(s)?;
        let i = &st.intervals[idx];
        Ok(vec![
            RawChild { lo: i.lo.clone(), hi: i.center.clone(), tag: tag(ROLE_LEFT, s as u64, 1, idx as u64) },
            RawChild { lo: i.center.clone(), hi: i.hi.clone(), tag: tag(ROLE_RIGHT, s as u64, 1, idx as u64) },
        ])
    }
}

impl Generator for Embedding {
    fn expand(&self, node: &Node) -> Result<Option<RawExpansion>, ConstructionError> {
        let (role, s, j, idx) = untag(node.tag);
        if role == ROLE_POINT {
            return Ok(Some(RawExpansion {
                gap: None,
                children: vec![RawChild { lo: node.lo.clone(), hi: node.hi.clone(), tag: node.tag }],
            }));
        }
        let st = self.step(s)?;
        let i = &st.intervals[idx];
        let jr = Rat::from_integer(j.into());
        let point_tag = tag(ROLE_POINT, 0, 0, 0);
        let last = j >= st.m;
        if role == ROLE_LEFT {
            let outer = &i.center - &i.delta * (&jr - rat(1, 1));
            let inner = &i.center - &i.delta * &jr;
            let mut kids = if last {
                self.halves(s + 1, 2 * idx)?
            } else {
                vec![RawChild { lo: i.lo.clone(), hi: inner.clone(), tag: tag(ROLE_LEFT, s as u64, j as u64 + 1, idx as u64) }]
            };
            kids.push(RawChild { lo: outer.clone(), hi: outer.clone(), tag: point_tag });
            Ok(Some(RawExpansion { gap: Some((inner, outer)), children: kids }))
        } else {
            let outer = &i.center + &i.delta * (&jr - rat(1, 1));
            let inner = &i.center + &i.delta * &jr;
            let mut kids = vec![RawChild { lo: outer.clone(), hi: outer.clone(), tag: point_tag }];
            if last {
                kids.extend(self.halves(s + 1, 2 * idx + 1)?);
            } else {
                kids.push(RawChild { lo: inner.clone(), hi: i.hi.clone(), tag: tag(ROLE_RIGHT, s as u64, j as u64 + 1, idx as u64) });
            }
            Ok(Some(RawExpansion { gap: Some((outer, inner)), children: kids }))
        }
    }
}

/// Per-block data of the certificate.
#[derive(Clone, Debug, Serialize)]
pub struct BlockCertificate {
    pub levels: u32,
    #[serde(with = "rat_serde")]
    pub alpha: Rat,
    #[serde(with = "rat_serde")]
    pub min_relative_gap: Rat,
    /// `Σ α_n^p` over the block.
    pub sum: Scalar,
    /// The block sum is at least 1, decided exactly.
    pub sum_at_least_one: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbedCertificate {
    #[serde(with = "rat_serde")]
    pub p: Rat,
    pub blocks: Vec<BlockCertificate>,
    /// Cumulative sums after each block.
    pub cumulative: Vec<Scalar>,
    pub porosity: Verdict,
    pub avoids_set: bool,
}

/// Porous construction containing `E`, with `Σ α_n^p` growing by at least 1 per block.
pub fn embed_porous(
    oracle: Arc<dyn AvoidanceOracle>,
    p: &Rat,
    blocks: u32,
) -> Result<(Construction, AlphaSeq, EmbedCertificate), ConstructionError> {
    if !p.is_positive() || *p >= rat(1, 1) {
        return Err(ConstructionError::Precondition(format!("exponent {} must lie in (0, 1)", format_rat(p))));
    }
    if blocks == 0 {
        return Err(ConstructionError::Precondition("at least one block".into()));
    }
    let gen = Arc::new(Embedding { oracle: oracle.clone(), p: p.clone(), steps: Mutex::new(Vec::new()) });
    let roots = gen.halves(0, 0)?.into_iter().map(|c| (c.lo, c.hi, c.tag)).collect();
    let construction = Construction::new(roots, gen.clone())?;

    let mut alphas = Vec::new();
    let mut certs = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = Scalar::zero();
    for s in 0..blocks as usize {
        let st = gen.step(s)?;
        let ap = pow_prec(&st.alpha, p, DEFAULT_PREC)?;
        let sum = &Scalar::from_int(st.m as i64) * &ap;
        // M α^p = M^{1-p} (r/2)^p
        let exact_ok = block_inequality(st.m as u64, &st.min_relative_gap, p);
        acc = &acc + &sum;
        cumulative.push(acc.clone());
        alphas.extend(std::iter::repeat_n(st.alpha.clone(), st.m as usize));
        certs.push(BlockCertificate {
            levels: st.m,
            alpha: st.alpha.clone(),
            min_relative_gap: st.min_relative_gap.clone(),
            sum,
            sum_at_least_one: exact_ok,
        });
    }
    let seq = AlphaSeq::Explicit(alphas.clone());
    let depth = alphas.len() as u32;
    let porosity = check_porous(&construction, &seq, depth)?;
    let mut avoids = true;
    construction.visit(depth, |_, e| {
        if let Some((a, b)) = e.and_then(|e| e.gap.as_ref()) {
            if a < b && oracle.meets(a, b) {
                avoids = false;
            }
        }
        Ok(())
    })?;
    if !avoids {
        return Err(ConstructionError::Embedding { interval: "-".into(), reason: "a gap meets the avoided set".into() });
    }
    let cert = EmbedCertificate { p: p.clone(), blocks: certs, cumulative, porosity, avoids_set: avoids };
    Ok((construction, seq, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_lengths() {
        assert_eq!(block_length(&rat(1, 4), &rat(1, 2)).unwrap(), 8);
        assert_eq!(block_length(&rat(1, 2), &rat(1, 2)).unwrap(), 4);
        assert_eq!(block_length(&rat(1, 2), &rat(1, 3)).unwrap(), 2);
    }

    #[test]
    fn oracle_picks_left_middle_piece() {
        let e = FiniteSet::points(vec![rat(1, 2)]);
        assert_eq!(e.gap_in(&rat(0, 1), &rat(1, 1)), Some((rat(1, 4), rat(1, 2))));
        assert!(e.meets(&rat(0, 1), &rat(1, 1)));
        assert!(!e.meets(&rat(1, 4), &rat(1, 2)));
    }

    #[test]
    fn roles_roundtrip() {
        let t = tag(ROLE_RIGHT, 3, 17, 12345);
        assert_eq!(untag(t), (ROLE_RIGHT, 3, 17, 12345));
    }

    #[test]
    fn half_point_two_blocks() {
        let e: Arc<dyn AvoidanceOracle> = Arc::new(FiniteSet::points(vec![rat(1, 2)]));
        let (c, seq, cert) = embed_porous(e, &rat(1, 2), 2).unwrap();
        assert_eq!(cert.blocks[0].levels, 8);
        assert_eq!(cert.blocks[0].alpha, rat(1, 64));
        assert!(cert.blocks[0].sum.is_exact());
        assert_eq!(cert.blocks[0].sum.lower_rat(), rat(1, 1));
        assert_eq!(cert.blocks[1].levels, 4);
        assert!(cert.blocks.iter().all(|b| b.sum_at_least_one));
        assert!(cert.porosity.holds);
        assert_eq!(c.roots()[0].hi, rat(3, 8));
        assert_eq!(c.gap(&c.roots()[0]).unwrap(), Some((rat(3, 8) - rat(1, 64), rat(3, 8))));
        crate::construction::expand(&c, 14).unwrap();
        assert!(crate::construction::check_porous(&c, &seq, 12).unwrap().holds);
    }

    #[test]
    fn negative_exponent_rejected() {
        let e: Arc<dyn AvoidanceOracle> = Arc::new(FiniteSet::default());
        assert!(embed_porous(e.clone(), &rat(1, 1), 1).is_err());
        assert!(embed_porous(e, &rat(-1, 2), 1).is_err());
    }
}

