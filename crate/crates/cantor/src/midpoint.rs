//! Midpoint Cantor spaces `M = C ∪ {x_J}`: measures carried over from the
//! line (atoms `ν{x_J} = μ(J)`), Whitney ladders to go back, and porosity
//! covers by balls around the atoms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{resolve_ratio, Ball, BallPair, CoverLevel, DoublingReport, Partial, PorosityCover, ScaleRow};
use crate::construction::{gap_separation_exact, AlphaSeq, Construction, ConstructionError, IntervalR, Location, Node};
use crate::measure::{MassBounds, MeasureError, MeasureOracle, SumMeasure};
use crate::numerics::{rat, rat_serde, Rat, Scalar};

const MAX_NODES: usize = 200_000;
const MAX_RUNGS: u32 = 10_000;

/// An isolated point of `M`: the centre of a gap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Atom {
    #[serde(with = "rat_serde")]
    pub lo: Rat,
    #[serde(with = "rat_serde")]
    pub hi: Rat,
    #[serde(with = "rat_serde")]
    pub x: Rat,
    pub level: u32,
}

impl Atom {
    pub fn radius(&self) -> Rat {
        (&self.hi - &self.lo) / rat(2, 1)
    }

    pub fn gap(&self) -> IntervalR {
        IntervalR::open(self.lo.clone(), self.hi.clone()).expect("nondegenerate gap")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PointKind {
    Atom(Atom),
    /// Endpoint of a covering interval of this level.
    InSet { level: u32 },
    NotInM,
    /// Still inside this covering interval at the depth limit.
    Undecided(u32),
}

/// The midpoint space of a construction, with the metric of the line.
pub struct MSpace {
    c: Arc<Construction>,
}

impl std::fmt::Debug for MSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a, b) = self.c.hull();
        write!(f, "MSpace([{a}, {b}])")
    }
}

/// Levels checked for degenerate gaps up front; deeper ones are checked on use.
const PROBE_LEVELS: u32 = 6;

pub fn make_mspace(c: Arc<Construction>) -> Result<MSpace, MeasureError> {
    let m = MSpace { c };
    let mut bad = None;
    m.c.visit(PROBE_LEVELS, |n, e| {
        if let Some((a, b)) = e.and_then(|e| e.gap.as_ref()) {
            if a >= b && bad.is_none() {
                bad = Some(n.describe());
            }
        }
        Ok(())
    })?;
    match bad {
        Some(n) => Err(MeasureError::Precondition(format!("degenerate gap in {n}"))),
        None => Ok(m),
    }
}

impl MSpace {
    pub fn construction(&self) -> &Arc<Construction> {
        &self.c
    }

    pub fn hull(&self) -> (Rat, Rat) {
        self.c.hull()
    }

    pub fn atom(&self, n: &Node) -> Result<Option<Atom>, MeasureError> {
        let Some((lo, hi)) = self.c.gap(n)? else { return Ok(None) };
        if lo >= hi {
            return Err(MeasureError::Precondition(format!("degenerate gap in {}", n.describe())));
        }
        let x = (&lo + &hi) / rat(2, 1);
        Ok(Some(Atom { lo, hi, x, level: n.level }))
    }

    /// Atoms of gaps of level `<= depth`, left to right.
    pub fn atoms(&self, depth: u32) -> Result<Vec<Atom>, MeasureError> {
        let mut out = Vec::new();
        let mut err = None;
        self.c.visit(depth, |n, _| {
            match self.atom(n) {
                Ok(Some(a)) => out.push(a),
                Ok(None) => {}
                Err(e) => err = err.take().or(Some(e)),
            }
            Ok(())
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        out.sort_by(|a, b| a.x.cmp(&b.x));
        Ok(out)
    }

    pub fn classify(&self, x: &Rat, max_level: u32) -> Result<PointKind, MeasureError> {
        Ok(match self.c.locate(x, max_level, |_| false)? {
            Location::InSet { level } => PointKind::InSet { level },
            Location::InGap { lo, hi, level } => {
                let mid = (&lo + &hi) / rat(2, 1);
                if *x == mid {
                    PointKind::Atom(Atom { lo, hi, x: mid, level })
                } else {
                    PointKind::NotInM
                }
            }
            Location::Cell(n) => PointKind::Undecided(n.level),
            Location::Outside | Location::BetweenRoots => PointKind::NotInM,
        })
    }
}

enum AtomRule {
    /// `ν{x_J} = μ(J)` and `ν|_C = μ|_C`.
    Forward(Arc<dyn MeasureOracle>),
    /// Level-`n` atoms weigh `masses[n - 1]`; nothing on `C` or deeper.
    ByLevel(Vec<Rat>),
}

/// A finite measure on `M`, queried through intervals of the line.
pub struct MeasureOnM {
    space: Arc<MSpace>,
    rule: AtomRule,
}

impl std::fmt::Debug for MeasureOnM {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.rule {
            AtomRule::Forward(_) => "forward".to_string(),
            AtomRule::ByLevel(v) => format!("atomic to level {}", v.len()),
        };
        write!(f, "MeasureOnM({:?}, {kind})", self.space)
    }
}

/// `ν = μ|_C + Σ_J μ(J) δ_{x_J}` for `μ` living on the hull of `C`.
pub fn forward(mu: Arc<dyn MeasureOracle>, m: Arc<MSpace>) -> Result<MeasureOnM, MeasureError> {
    if mu.support() != m.hull() {
        return Err(MeasureError::Argument("measure and space have different hulls".into()));
    }
    Ok(MeasureOnM { space: m, rule: AtomRule::Forward(mu) })
}

impl MeasureOnM {
    /// A purely atomic measure giving every level-`n` atom the mass
    /// `masses[n - 1]` (levels past the list carry nothing).
    pub fn atomic(m: Arc<MSpace>, masses: Vec<Rat>) -> Result<Self, MeasureError> {
        if masses.is_empty() || masses.iter().any(|x| !x.is_positive()) {
            return Err(MeasureError::Argument("atom masses must be positive".into()));
        }
        Ok(MeasureOnM { space: m, rule: AtomRule::ByLevel(masses) })
    }

    pub fn space(&self) -> &Arc<MSpace> {
        &self.space
    }

    fn c(&self) -> &Construction {
        &self.space.c
    }

    pub fn atom_mass(&self, a: &Atom, eps: &Rat) -> Result<MassBounds, MeasureError> {
        match &self.rule {
            AtomRule::Forward(mu) => mu.mass(&a.gap(), eps),
            AtomRule::ByLevel(v) => Ok(v.get(a.level as usize - 1).map(Scalar::from_rat).unwrap_or_else(Scalar::zero)),
        }
    }

    /// `ν(I ∩ M)` for a covering interval.
    pub fn node_mass(&self, n: &Arc<Node>, eps: &Rat) -> Result<MassBounds, MeasureError> {
        match &self.rule {
            AtomRule::Forward(mu) => mu.mass(&n.interval(), eps),
            AtomRule::ByLevel(v) => {
                let mut acc = Rat::zero();
                let mut stack = vec![n.clone()];
                while let Some(k) = stack.pop() {
                    if k.level as usize > v.len() {
                        continue;
                    }
                    if let Some(e) = self.c().expansion(&k)? {
                        if e.gap.is_some() {
                            acc += &v[k.level as usize - 1];
                        }
                        stack.extend(e.children.iter().cloned());
                    }
                }
                Ok(Scalar::from_rat(&acc))
            }
        }
    }

    /// `ν(B_M(x, r))` for the open ball; `x` has to be certified in `M`.
    pub fn ball_mass(&self, x: &Rat, r: &Rat, eps: &Rat) -> Result<MassBounds, MeasureError> {
        match self.space.classify(x, 200)? {
            PointKind::Atom(_) | PointKind::InSet { .. } => {}
            other => return Err(MeasureError::Argument(format!("{x} is not certified in M ({other:?})"))),
        }
        if !r.is_positive() {
            return Err(MeasureError::Argument("radius must be positive".into()));
        }
        self.mass(&IntervalR::open(x - r, x + r)?, eps)
    }

    /// Points of the support of `ν` near which balls of radius `r` are worth testing.
    fn sample_point(&self, r: &Rat, rng: &mut ChaCha8Rng, pick: usize) -> Result<Option<Rat>, MeasureError> {
        let roots = self.c().roots();
        let mut cur = roots[rng.gen_range(0..roots.len())].clone();
        let cap = match &self.rule {
            AtomRule::Forward(_) => 200,
            AtomRule::ByLevel(v) => v.len() as u32,
        };
        // descend to the scale, then a few levels past it
        let mut extra = rng.gen_range(0..=3u32);
        loop {
            if cur.level >= cap {
                break;
            }
            if cur.len() < r * rat(4, 1) {
                if extra == 0 {
                    break;
                }
                extra -= 1;
            }
            let Some(e) = self.c().expansion(&cur)? else { break };
            if e.children.is_empty() {
                break;
            }
            cur = e.children[rng.gen_range(0..e.children.len())].clone();
        }
        let atom = self.space.atom(&cur)?.map(|a| a.x);
        Ok(match (&self.rule, pick % 3) {
            (AtomRule::ByLevel(_), _) | (_, 2) => atom.or_else(|| matches!(self.rule, AtomRule::Forward(_)).then(|| cur.lo.clone())),
            (_, 0) => Some(cur.lo.clone()),
            _ => Some(cur.hi.clone()),
        })
    }

    /// Gap ladder masses depend on intervals outside the gap, so the width
    /// budget per query is split this many ways.
    fn cut(eps: &Rat) -> (Rat, Rat) {
        (eps / rat(8, 1), eps / rat(512, 1))
    }
}

impl MeasureOracle for MeasureOnM {
    fn support(&self) -> (Rat, Rat) {
        self.space.hull()
    }

    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        let (cut, tol) = MeasureOnM::cut(eps);
        let mut acc = Scalar::zero();
        let mut stack: Vec<Arc<Node>> = self.c().roots().to_vec();
        let mut seen = 0usize;
        while let Some(n) = stack.pop() {
            if !q.intersects(&n.interval()) {
                continue;
            }
            seen += 1;
            if seen > MAX_NODES {
                return Err(MeasureError::Budget { reason: "too many nodes for an M query".into(), bounds: Some(acc) });
            }
            if n.interval().is_subset_of(q) {
                acc = &acc + &self.node_mass(&n, &tol)?;
                continue;
            }
            let whole = self.node_mass(&n, &tol)?;
            if whole.upper().is_zero() {
                continue;
            }
            if whole.upper_rat() <= cut && matches!(self.rule, AtomRule::Forward(_)) {
                acc = &acc + &Scalar::from_bounds(crate::numerics::Dyadic::zero(), whole.upper().clone(), whole.prec())?;
                continue;
            }
            let Some(e) = self.c().expansion(&n)? else {
                if let (AtomRule::Forward(mu), Some(part)) = (&self.rule, q.intersection(&n.interval())) {
                    acc = &acc + &mu.mass(&part, &tol)?;
                }
                continue;
            };
            if let Some(a) = self.space.atom(&n)? {
                if q.contains_point(&a.x) {
                    acc = &acc + &self.atom_mass(&a, &tol)?;
                }
            }
            stack.extend(e.children.iter().cloned());
        }
        Ok(acc)
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        let mut out = Vec::new();
        let _ = self.c().visit(64, |n, e| {
            if out.len() >= limit || n.len() < *scale {
                return Ok(());
            }
            if let Some((a, b)) = e.and_then(|e| e.gap.as_ref()) {
                out.push(a.clone());
                out.push((a + b) / rat(2, 1));
                out.push(b.clone());
            }
            Ok(())
        });
        out.truncate(limit);
        out
    }
}

const M_SAMPLING: &str = "support points of nu by seeded random descent to the scale, endpoints and atoms in turn";

/// Largest `ν(B_M(x, 2r)) / ν(B_M(x, r))` over sampled centres `x` in the support of `ν`.
pub fn m_doubling_report(
    nu: &MeasureOnM,
    scales: &[Rat],
    samples: usize,
    seed: u64,
) -> Result<DoublingReport, Partial<DoublingReport>> {
    let mut report =
        DoublingReport { schema_version: crate::analysis::SCHEMA_VERSION, sampling: M_SAMPLING.into(), seed, rows: Vec::new() };
    for (idx, r) in scales.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut xs = Vec::with_capacity(samples);
        for i in 0..samples {
            match nu.sample_point(r, &mut rng, i) {
                Ok(Some(x)) => xs.push(x),
                Ok(None) => {}
                Err(error) => return Err(Partial { error, partial: report }),
            }
        }
        xs.sort();
        xs.dedup();
        let mut best: Option<(Scalar, Rat)> = None;
        for x in &xs {
            let q = (|| {
                let small = IntervalR::open(x - r, x + r)?;
                let big = IntervalR::open(x - r * rat(2, 1), x + r * rat(2, 1))?;
                resolve_ratio(&format!("{x}, radius {r}"), r * r / rat(64, 1), |eps| Ok((nu.mass(&big, eps)?, nu.mass(&small, eps)?)))
            })();
            let q = match q {
                Ok(q) => q,
                Err(error) => return Err(Partial { error, partial: report }),
            };
            best = match best {
                Some((b, at)) if b.upper() >= q.upper() => Some((b.max(&q), at)),
                Some((b, _)) => Some((b.max(&q), x.clone())),
                None => Some((q, x.clone())),
            };
        }
        if let Some((max_ratio, worst_at)) = best {
            report.rows.push(ScaleRow { scale: r.clone(), samples: xs.len(), max_ratio, worst_at });
        }
    }
    Ok(report)
}

/// Offsets from the centre of the rung `J_k^+` of a gap of radius `r`:
/// `[r(1 - (1-t)^k), r(1 - (1-t)^{k+1}))`, of length `t(1-t)^k r`.
pub fn rung(r: &Rat, t: &Rat, k: u32) -> (Rat, Rat) {
    let s = Rat::one() - t;
    let a = num_traits::pow(s.clone(), k as usize);
    let b = &a * &s;
    (r * (Rat::one() - a), r * (Rat::one() - b))
}

/// Length left after the first `k` rungs on one side: `r(1-t)^k`.
pub fn rung_tail(r: &Rat, t: &Rat, k: u32) -> Rat {
    r * num_traits::pow(Rat::one() - t, k as usize)
}

struct Ladder {
    atom: Atom,
    mass: Scalar,
    /// `ν{x_J} / ν((2J ∩ M) \ {x_J})`
    scale: Scalar,
    /// `ν` of the outer annuli, right side then left side, as far as computed.
    rungs: [Vec<Scalar>; 2],
}

/// A measure on the hull of `C` copying `ν` on `C` and spreading each atom
/// over Whitney rungs of its gap in proportion to the mass just outside.
pub struct Inverse {
    nu: Arc<MeasureOnM>,
    t: Rat,
    separation: Rat,
    eps: Rat,
    ladders: Mutex<HashMap<(Rat, Rat), Arc<Mutex<Ladder>>>>,
}

impl std::fmt::Debug for Inverse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Inverse(t = {}, c = {})", self.t, self.separation)
    }
}

/// Pulls `ν` back to the line. `t` defaults to the midpoint of `(1/(1+c), 1)`
/// with `c` the gap separation to `depth`.
pub fn inverse(nu: Arc<MeasureOnM>, t: Option<Rat>, depth: u32) -> Result<Inverse, MeasureError> {
    let c = match gap_separation_exact(nu.c(), depth) {
        Ok(c) => c,
        Err(ConstructionError::NotApplicable(m)) => return Err(MeasureError::Precondition(m)),
        Err(e) => return Err(e.into()),
    };
    if !c.is_positive() {
        return Err(MeasureError::Precondition(format!("gap separation is {c} at depth {depth}")));
    }
    let floor = Rat::one() / (Rat::one() + &c);
    let t = match t {
        Some(t) if t <= floor || t >= Rat::one() => {
            return Err(MeasureError::Argument(format!("t = {t} outside ({floor}, 1)")));
        }
        Some(t) => t,
        None => (&floor + Rat::one()) / rat(2, 1),
    };
    Ok(Inverse { nu, t, separation: c, eps: crate::numerics::pow2(-80), ladders: Mutex::new(HashMap::new()) })
}

impl Inverse {
    pub fn t(&self) -> &Rat {
        &self.t
    }

    pub fn separation(&self) -> &Rat {
        &self.separation
    }

    fn ladder(&self, a: &Atom) -> Result<Arc<Mutex<Ladder>>, MeasureError> {
        let key = (a.lo.clone(), a.hi.clone());
        if let Some(l) = self.ladders.lock().expect("ladder cache").get(&key) {
            return Ok(l.clone());
        }
        let r = a.radius();
        let mass = self.nu.atom_mass(a, &self.eps)?;
        let around = &self.nu.mass(&IntervalR::open(&a.x - &r * rat(2, 1), &a.x + &r * rat(2, 1))?, &self.eps)? - &mass;
        if !around.upper().is_positive() {
            return Err(MeasureError::Precondition(format!("no mass around the gap ({}, {})", a.lo, a.hi)));
        }
        let scale = mass.div(&around.clamp_nonneg())?;
        let l = Arc::new(Mutex::new(Ladder { atom: a.clone(), mass, scale, rungs: [Vec::new(), Vec::new()] }));
        Ok(self.ladders.lock().expect("ladder cache").entry(key).or_insert(l).clone())
    }

    /// `ν{x_J} / ν((2J ∩ M) \ {x_J})` for the gap of `a`.
    pub fn scaling(&self, a: &Atom) -> Result<Scalar, MeasureError> {
        Ok(self.ladder(a)?.lock().expect("ladder").scale.clone())
    }

    /// `ν` of the outer annulus mirroring rung `k` (side 0 right, 1 left).
    fn annulus(&self, l: &mut Ladder, side: usize, k: u32) -> Result<Scalar, MeasureError> {
        while l.rungs[side].len() <= k as usize {
            let j = l.rungs[side].len() as u32;
            let r = l.atom.radius();
            let near = rung_tail(&r, &self.t, j + 1);
            let far = rung_tail(&r, &self.t, j);
            let q = if side == 0 {
                IntervalR::new(&l.atom.hi + near, &l.atom.hi + far, crate::construction::IntervalKind::ClosedOpen)?
            } else {
                IntervalR::new(&l.atom.lo - far, &l.atom.lo - near, crate::construction::IntervalKind::OpenClosed)?
            };
            let m = self.nu.mass(&q, &self.eps)?;
            l.rungs[side].push(m);
        }
        Ok(l.rungs[side][k as usize].clone())
    }

    /// Mass of the part of one half of the gap at centre offsets `[o1, o2]`.
    fn half_mass(&self, l: &mut Ladder, side: usize, o1: &Rat, o2: &Rat) -> Result<Scalar, MeasureError> {
        let r = l.atom.radius();
        let mut acc = Scalar::zero();
        if o1 >= o2 {
            return Ok(acc);
        }
        for k in 0..MAX_RUNGS {
            let (s, e) = rung(&r, &self.t, k);
            if s >= *o2 {
                return Ok(acc);
            }
            if *o2 == r && s >= *o1 {
                // every later rung lies inside the query
                let tail = rung_tail(&r, &self.t, k);
                let q = if side == 0 {
                    IntervalR::open(l.atom.hi.clone(), &l.atom.hi + tail)?
                } else {
                    IntervalR::open(&l.atom.lo - tail, l.atom.lo.clone())?
                };
                let m = self.nu.mass(&q, &self.eps)?;
                return Ok(&acc + &(&m * &l.scale));
            }
            let lo = if s > *o1 { s.clone() } else { o1.clone() };
            let hi = if e < *o2 { e.clone() } else { o2.clone() };
            if lo < hi {
                let frac = (&hi - &lo) / (&e - &s);
                let m = self.annulus(l, side, k)?;
                acc = &acc + &(&m * &l.scale).mul_rat(&frac);
            }
        }
        Err(MeasureError::Budget { reason: "Whitney ladder too long".into(), bounds: Some(acc) })
    }

    /// Mass that the pulled-back measure gives to `q ∩ J`.
    pub fn gap_mass(&self, a: &Atom, q: &IntervalR) -> Result<Scalar, MeasureError> {
        let j = a.gap();
        let Some(part) = q.intersection(&j) else { return Ok(Scalar::zero()) };
        let l = self.ladder(a)?;
        let mut l = l.lock().expect("ladder");
        if j.is_subset_of(q) {
            return Ok(l.mass.clone());
        }
        let zero = Rat::zero();
        let right = (if part.lo > a.x { &part.lo - &a.x } else { zero.clone() }, &part.hi - &a.x);
        let left = (if part.hi < a.x { &a.x - &part.hi } else { zero.clone() }, &a.x - &part.lo);
        let mut acc = Scalar::zero();
        if right.1 > zero {
            acc = &acc + &self.half_mass(&mut l, 0, &right.0, &right.1)?;
        }
        if left.1 > zero {
            acc = &acc + &self.half_mass(&mut l, 1, &left.0, &left.1)?;
        }
        Ok(acc)
    }
}

impl MeasureOracle for Inverse {
    fn support(&self) -> (Rat, Rat) {
        self.nu.support()
    }

    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        let (cut, tol) = MeasureOnM::cut(eps);
        let mut acc = Scalar::zero();
        let mut stack: Vec<Arc<Node>> = self.nu.c().roots().to_vec();
        let mut seen = 0usize;
        while let Some(n) = stack.pop() {
            if !q.intersects(&n.interval()) {
                continue;
            }
            seen += 1;
            if seen > MAX_NODES {
                return Err(MeasureError::Budget { reason: "too many nodes for a query".into(), bounds: Some(acc) });
            }
            let whole = self.nu.node_mass(&n, &tol)?;
            if n.interval().is_subset_of(q) {
                acc = &acc + &whole;
                continue;
            }
            if whole.upper().is_zero() {
                continue;
            }
            if whole.upper_rat() <= cut {
                acc = &acc + &Scalar::from_bounds(crate::numerics::Dyadic::zero(), whole.upper().clone(), whole.prec())?;
                continue;
            }
            let Some(e) = self.nu.c().expansion(&n)? else {
                if let Some(part) = q.intersection(&n.interval()) {
                    acc = &acc + &self.nu.mass(&part, &tol)?;
                }
                continue;
            };
            if let Some(a) = self.nu.space.atom(&n)? {
                acc = &acc + &self.gap_mass(&a, q)?;
            }
            stack.extend(e.children.iter().cloned());
        }
        Ok(acc)
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        self.nu.special_points(scale, limit)
    }
}

/// Balls `B_M(x_J, |I|)` with sub-balls `B_M(x_J, α_n|I|/2)` for every node
/// of level `<= depth`; for middle-interval constructions the sub-ball is
/// `B_M(x_J, |J|/2)`.
pub fn midpoint_porosity_cover(m: &MSpace, seq: &AlphaSeq, depth: u32) -> Result<PorosityCover, MeasureError> {
    let mut levels: Vec<CoverLevel> = (1..=depth)
        .map(|n| Ok(CoverLevel { n, alpha: seq.alpha(n)? / rat(2, 1), pairs: Vec::new() }))
        .collect::<Result<_, ConstructionError>>()?;
    let mut err = None;
    m.c.visit(depth, |n, _| {
        let r = (|| {
            let Some(a) = m.atom(n)? else { return Ok(()) };
            let lv = &mut levels[n.level as usize - 1];
            let len = n.len();
            if a.hi.clone() - &a.lo < &lv.alpha * rat(2, 1) * &len {
                return Err(MeasureError::Precondition(format!("{} is not porous with the declared ratio", n.describe())));
            }
            let sub = Ball { center: a.x.clone(), radius: &lv.alpha * &len };
            lv.pairs.push(BallPair { ball: Ball { center: a.x, radius: len }, sub });
            Ok(())
        })();
        if let Err(e) = r {
            err = err.take().or(Some(e));
        }
        Ok(())
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    PorosityCover::new(levels)
}

/// `μ + 𝓛` on a common support.
pub fn add_lebesgue<A: MeasureOracle, B: MeasureOracle>(mu: A, lebesgue: B) -> Result<SumMeasure<A, B>, MeasureError> {
    SumMeasure::new(mu, lebesgue)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LebesgueOnC {
    pub bounds: Scalar,
    /// `false` when no tail bound for the sequence is known and the lower end is just 0.
    pub lower_certified: bool,
}

/// `𝓛(C ∩ q)` for a middle-interval construction with sequence `seq`,
/// resolving covering intervals to level `depth`.
pub fn lebesgue_on_c(c: &Construction, seq: &AlphaSeq, q: &IntervalR, depth: u32) -> Result<LebesgueOnC, MeasureError> {
    if depth == 0 {
        return Err(MeasureError::Argument("depth must be at least 1".into()));
    }
    let tail = seq.tail_sum_bound(depth);
    // ∏_{k=n}^{depth} (1 - α_k), indexed by n
    let mut prods = vec![Rat::one(); depth as usize + 2];
    for n in (1..=depth).rev() {
        prods[n as usize] = &prods[n as usize + 1] * (Rat::one() - seq.alpha(n)?);
    }
    let keep = tail.as_ref().map(|t| (Rat::one() - t).max(Rat::zero()));
    let (mut lo, mut hi) = (Rat::zero(), Rat::zero());
    let mut stack: Vec<Arc<Node>> = c.roots().to_vec();
    while let Some(n) = stack.pop() {
        let Some(part) = q.intersection(&n.interval()) else { continue };
        if n.interval().is_subset_of(q) {
            let up = n.len() * &prods[n.level.min(depth + 1) as usize];
            if let Some(k) = &keep {
                lo += &up * k;
            }
            hi += up;
            continue;
        }
        if n.level >= depth {
            hi += part.len();
            continue;
        }
        if let Some(e) = c.expansion(&n)? {
            stack.extend(e.children.iter().cloned());
        }
    }
    let prec = crate::numerics::DEFAULT_PREC;
    let bounds = Scalar::from_rat_prec(&lo, prec).hull(&Scalar::from_rat_prec(&hi, prec));
    Ok(LebesgueOnC { bounds, lower_certified: tail.is_some() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomRow {
    #[serde(flatten)]
    pub atom: Atom,
    pub mass: Scalar,
}

/// Atoms to `depth` with their masses, left to right.
pub fn atom_table(nu: &MeasureOnM, depth: u32, eps: &Rat) -> Result<Vec<AtomRow>, MeasureError> {
    nu.space()
        .atoms(depth)?
        .into_iter()
        .map(|atom| Ok(AtomRow { mass: nu.atom_mass(&atom, eps)?, atom }))
        .collect()
}
