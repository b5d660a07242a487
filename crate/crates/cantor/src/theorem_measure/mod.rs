//! A doubling measure carried by a nice Cantor construction, with
//! `μ(J)/μ(I)` comparable to `(|J|/|I|)^p` at every covering interval.
//!
//! The measure tree is built lazily. Every construction interval `K = [a, b]`
//! splits into a left end `K_l`, a right end `K_r` and a middle run of gaps
//! and cells. The ends are split further along boundary chains. Cells become
//! construction intervals one level down.

mod family;

use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::construction::{check_nice, Construction, ConstructionError, IntervalR, Node};
use crate::measure::{MassBounds, MeasureError, MeasureOracle};
use crate::numerics::{format_rat, pow_prec, rat, rat_serde, Dyadic, Rat, Round, Scalar, DEFAULT_PREC};
use crate::power_measure::PowerMeasure;

use family::Family;
pub use family::Side;

pub const SCHEMA_VERSION: u32 = 1;

/// How the gap meeting each dyadic annulus is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    LargestThenLeftmost,
}

#[derive(Clone, Debug)]
pub struct TMeasureConfig {
    /// Distance threshold for the end gaps; `None` picks `(1/2)·4^{-1/p}`.
    pub eta: Option<Rat>,
    pub prec: u32,
    /// Levels probed when certifying niceness.
    pub probe_depth: u32,
    pub max_annulus: u32,
    pub max_search_nodes: usize,
    /// Deepest measure-tree level a query may reach.
    pub max_descent: u32,
    pub max_links: u32,
    /// Measure-tree levels kept in memory after a query.
    pub cache_depth: u32,
}

impl Default for TMeasureConfig {
    fn default() -> Self {
        TMeasureConfig {
            eta: None,
            prec: DEFAULT_PREC,
            probe_depth: 8,
            max_annulus: 400,
            max_search_nodes: 200_000,
            max_descent: 4000,
            max_links: 4000,
            cache_depth: 4,
        }
    }
}

enum PieceKind {
    Gap { level: u32 },
    Cell { child: OnceLock<ChildRef> },
}

#[derive(Clone)]
enum ChildRef {
    /// In the parent's coordinates, with its actual mass.
    Abs(Arc<CNode>),
    /// Unit-mass representative; the cell is `rep` moved by `shift`.
    Shape { rep: Arc<CNode>, shift: Rat },
}

struct Piece {
    lo: Rat,
    hi: Rat,
    mass: Scalar,
    before: Scalar,
    kind: PieceKind,
}

struct Segment {
    pieces: Vec<Piece>,
    total: Scalar,
}

impl Segment {
    /// Index of the piece containing `t`, preferring the one ending at `t`.
    fn find(&self, t: &Rat) -> usize {
        self.pieces.partition_point(|p| p.hi < *t).min(self.pieces.len() - 1)
    }
}

struct Link {
    /// Endpoint of the next chain interval, on the far side from the root end.
    inner: Rat,
    inner_mass: Scalar,
    seg: Segment,
}

struct Chain {
    x1: Rat,
    m1: Scalar,
    links: Mutex<Vec<Arc<Link>>>,
}

struct Layout {
    family: Mutex<Family>,
    mid: Segment,
    left: Chain,
    right: Chain,
}

/// A construction interval of the measure tree.
pub struct CNode {
    lo: Rat,
    hi: Rat,
    mass: Scalar,
    depth: u32,
    host: Arc<Node>,
    layout: OnceLock<Arc<Layout>>,
}

impl std::fmt::Debug for CNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CNode[{}, {}] depth {}", format_rat(&self.lo), format_rat(&self.hi), self.depth)
    }
}

impl CNode {
    pub fn interval(&self) -> IntervalR {
        IntervalR::closed(self.lo.clone(), self.hi.clone()).expect("ordered")
    }

    pub fn mass(&self) -> &Scalar {
        &self.mass
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }
}

#[derive(Default)]
struct Ledger {
    gamma_min: Option<Scalar>,
    gamma_max: Option<Scalar>,
    gamma_count: u64,
    max_middle_gaps: usize,
    max_defect: Option<Dyadic>,
    layouts: u64,
}

/// Observed normalizing constants and bookkeeping checks.
#[derive(Clone, Debug, Serialize)]
pub struct GammaLedger {
    pub gamma_min: Option<Scalar>,
    pub gamma_max: Option<Scalar>,
    pub count: u64,
    /// Most gaps seen strictly between `G_l` and `G_r`.
    pub max_middle_gaps: usize,
    /// Largest `|Σ parts - mass| / mass` over expanded nodes, rounded up.
    pub max_relative_defect: String,
    pub layouts: u64,
}

/// Exported description of a built measure.
#[derive(Clone, Debug, Serialize)]
pub struct MeasureDescriptor {
    pub schema_version: u32,
    pub construction: String,
    #[serde(with = "rat_serde")]
    pub p: Rat,
    #[serde(with = "rat_serde")]
    pub eta: Rat,
    pub policy: SelectionPolicy,
    pub nice_constant: Scalar,
    pub gamma: GammaLedger,
}

/// One piece of a split, for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct PieceView {
    pub lo: Rat,
    pub hi: Rat,
    pub is_gap: bool,
    pub mass: Scalar,
}

/// How a construction interval was split.
#[derive(Clone, Debug)]
pub struct Distribution {
    pub interval: IntervalR,
    pub mass: Scalar,
    pub g_left: (Rat, Rat),
    pub g_right: (Rat, Rat),
    pub k_left: (IntervalR, Scalar),
    pub k_right: (IntervalR, Scalar),
    /// From `G_l` to `G_r` inclusive.
    pub middle: Vec<PieceView>,
}

pub struct TMeasure {
    c: Arc<Construction>,
    p: Rat,
    eta: Rat,
    nice: Scalar,
    cfg: TMeasureConfig,
    root: Arc<CNode>,
    power: Arc<PowerMeasure>,
    ledger: Mutex<Ledger>,
    shapes: Option<Mutex<BTreeMap<(u64, Rat, Rat), Arc<CNode>>>>,
}

impl std::fmt::Debug for TMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TMeasure").field("p", &self.p).field("eta", &self.eta).finish()
    }
}

/// `(1/2)·4^{-1/p}`, rounded down to a dyadic.
pub fn default_eta(p: &Rat) -> Result<Rat, MeasureError> {
    let q = pow_prec(&rat(1, 4), &p.recip(), 96)?;
    Ok(q.lower().round(64, Round::Down).to_rat() / rat(2, 1))
}

/// `η^p < 1/4`, decided exactly.
pub fn eta_admissible(eta: &Rat, p: &Rat) -> bool {
    if !eta.is_positive() || !p.is_positive() {
        return false;
    }
    let (a, b) = (p.numer(), p.denom());
    let (Ok(a), Ok(b)) = (usize::try_from(a.clone()), usize::try_from(b.clone())) else {
        return false;
    };
    num_traits::pow(eta.clone(), a) < num_traits::pow(rat(1, 4), b)
}

fn relative_defect(parts: &Scalar, whole: &Scalar) -> Dyadic {
    let d = parts - whole;
    let worst = d.lower().abs().max(d.upper().abs());
    if whole.lower().is_positive() {
        worst.div(whole.lower(), 64, Round::Up)
    } else {
        worst
    }
}

fn adjust_budget(e: MeasureError, mul: Option<&Scalar>, add: &Scalar) -> MeasureError {
    match e {
        MeasureError::Budget { reason, bounds } => MeasureError::Budget {
            reason,
            bounds: bounds.map(|b| {
                let b = match mul {
                    Some(m) => m * &b,
                    None => b,
                };
                &b + add
            }),
        },
        other => other,
    }
}

impl TMeasure {
    pub fn build(c: Arc<Construction>, p: Rat) -> Result<Self, MeasureError> {
        TMeasure::with_config(c, p, TMeasureConfig::default())
    }

    pub fn with_config(c: Arc<Construction>, p: Rat, cfg: TMeasureConfig) -> Result<Self, MeasureError> {
        if !p.is_positive() {
            return Err(MeasureError::Argument(format!("p must be positive, got {}", format_rat(&p))));
        }
        let [root] = c.roots() else {
            return Err(MeasureError::Precondition("construction must have a single root".into()));
        };
        let nice = check_nice(&c, cfg.probe_depth).map_err(|e| match e {
            ConstructionError::NotApplicable(m) => MeasureError::Precondition(m),
            other => MeasureError::Construction(other),
        })?;
        if !nice.certainly_lt(&Scalar::one()) {
            return Err(MeasureError::Precondition(format!(
                "construction is not nice to depth {} (constant {})",
                cfg.probe_depth,
                nice.upper().to_decimal(8, Round::Up)
            )));
        }
        let mut leaf = None;
        c.visit(cfg.probe_depth, |n, e| {
            if leaf.is_none() && n.level < cfg.probe_depth && e.is_none_or(|e| e.children.is_empty()) {
                leaf = Some(n.describe());
            }
            Ok(())
        })?;
        if let Some(n) = leaf {
            return Err(MeasureError::Precondition(format!("construction stops at {n}; an infinite one is needed")));
        }
        let eta = match &cfg.eta {
            Some(e) => e.clone(),
            None => default_eta(&p)?,
        };
        if eta > rat(1, 2) || !eta_admissible(&eta, &p) {
            return Err(MeasureError::Argument(format!(
                "eta {} must lie in (0, 1/2] with eta^p < 1/4",
                format_rat(&eta)
            )));
        }
        let root = Arc::new(CNode {
            lo: root.lo.clone(),
            hi: root.hi.clone(),
            mass: Scalar::one(),
            depth: 0,
            host: root.clone(),
            layout: OnceLock::new(),
        });
        let power = Arc::new(PowerMeasure::with_prec(&p, cfg.prec)?);
        let shapes = c.generator().translation_class(&root.host).map(|_| Mutex::new(BTreeMap::new()));
        Ok(TMeasure { c, p, eta, nice, cfg, root, power, ledger: Mutex::new(Ledger::default()), shapes })
    }

    pub fn p(&self) -> &Rat {
        &self.p
    }

    pub fn eta(&self) -> &Rat {
        &self.eta
    }

    pub fn nice_constant(&self) -> &Scalar {
        &self.nice
    }

    pub fn construction(&self) -> &Arc<Construction> {
        &self.c
    }

    pub fn root(&self) -> &Arc<CNode> {
        &self.root
    }

    pub fn ledger(&self) -> GammaLedger {
        let l = self.ledger.lock().expect("ledger");
        GammaLedger {
            gamma_min: l.gamma_min.clone(),
            gamma_max: l.gamma_max.clone(),
            count: l.gamma_count,
            max_middle_gaps: l.max_middle_gaps,
            max_relative_defect: l
                .max_defect
                .as_ref()
                .map(|d| d.to_decimal(6, Round::Up))
                .unwrap_or_else(|| "0".into()),
            layouts: l.layouts,
        }
    }

    /// Largest relative conservation defect seen so far.
    pub fn max_relative_defect(&self) -> Rat {
        self.ledger.lock().expect("ledger").max_defect.as_ref().map(Dyadic::to_rat).unwrap_or_else(Rat::zero)
    }

    pub fn descriptor(&self, construction: impl Into<String>) -> MeasureDescriptor {
        MeasureDescriptor {
            schema_version: SCHEMA_VERSION,
            construction: construction.into(),
            p: self.p.clone(),
            eta: self.eta.clone(),
            policy: SelectionPolicy::LargestThenLeftmost,
            nice_constant: self.nice.clone(),
            gamma: self.ledger(),
        }
    }

    fn limits(&self) -> family::Limits {
        family::Limits { max_annulus: self.cfg.max_annulus, max_search_nodes: self.cfg.max_search_nodes }
    }

    fn weight(&self, part: &Rat, whole: &Rat) -> Result<Scalar, MeasureError> {
        Ok(pow_prec(&(part / whole), &self.p, self.cfg.prec)?)
    }

    fn note_gamma(&self, g: &Scalar) {
        let mut l = self.ledger.lock().expect("ledger");
        l.gamma_min = Some(match &l.gamma_min {
            Some(m) => m.min(g),
            None => g.clone(),
        });
        l.gamma_max = Some(match &l.gamma_max {
            Some(m) => m.max(g),
            None => g.clone(),
        });
        l.gamma_count += 1;
    }

    fn note_defect(&self, parts: &Scalar, whole: &Scalar) {
        let d = relative_defect(parts, whole);
        let mut l = self.ledger.lock().expect("ledger");
        if l.max_defect.as_ref().is_none_or(|m| d > *m) {
            l.max_defect = Some(d);
        }
    }

    /// Tiles `[start, end]` by `gaps` and the cells between them and shares
    /// `frac·mass` among the pieces in proportion to `(|U|/whole)^p`.
    fn segment(
        &self,
        gaps: &[(Rat, Rat, u32)],
        start: &Rat,
        end: &Rat,
        whole: &Rat,
        frac: &Scalar,
        mass: &Scalar,
    ) -> Result<Segment, MeasureError> {
        let mut raw: Vec<(Rat, Rat, Option<u32>)> = Vec::with_capacity(2 * gaps.len() + 1);
        let mut at = start.clone();
        for (lo, hi, lv) in gaps {
            if *lo > at {
                raw.push((at.clone(), lo.clone(), None));
            }
            raw.push((lo.clone(), hi.clone(), Some(*lv)));
            at = hi.clone();
        }
        if *end > at {
            raw.push((at, end.clone(), None));
        }
        let weights: Vec<Scalar> =
            raw.iter().map(|(lo, hi, _)| self.weight(&(hi - lo), whole)).collect::<Result<_, _>>()?;
        let s: Scalar = weights.iter().cloned().sum();
        let gamma = frac.div(&s)?;
        self.note_gamma(&gamma);
        let scale = &gamma * mass;
        let mut before = Scalar::zero();
        let mut pieces = Vec::with_capacity(raw.len());
        for ((lo, hi, lv), w) in raw.into_iter().zip(weights) {
            let m = &scale * &w;
            let kind = match lv {
                Some(level) => PieceKind::Gap { level },
                None => PieceKind::Cell { child: OnceLock::new() },
            };
            let next = &before + &m;
            pieces.push(Piece { lo, hi, mass: m, before, kind });
            before = next;
        }
        Ok(Segment { pieces, total: before })
    }

    fn layout(&self, node: &CNode) -> Result<Arc<Layout>, MeasureError> {
        if let Some(l) = node.layout.get() {
            return Ok(l.clone());
        }
        let l = Arc::new(self.compute_layout(node)?);
        Ok(node.layout.get_or_init(|| l).clone())
    }

    /// Rightmost family gap with `lo < reach` and `hi <= limit`, extending the
    /// family until the answer is certain.
    fn find_left(&self, fam: &mut Family, reach: &Rat, limit: &Rat) -> Result<(Rat, Rat, u32), MeasureError> {
        loop {
            let front = fam.frontier(Side::Left);
            let cand = fam
                .gaps
                .range((Bound::Unbounded, Bound::Excluded(reach.clone())))
                .rev()
                .find(|(_, (hi, _))| hi <= limit)
                .map(|(lo, (hi, lv))| (lo.clone(), hi.clone(), *lv));
            if let Some(g) = cand {
                if g.1 > front {
                    return Ok(g);
                }
            }
            let k = fam.depth(Side::Left) + 1;
            fam.extend(&self.c, Side::Left, k, &self.limits())?;
        }
    }

    /// Leftmost family gap with `hi > reach` and `lo >= limit`.
    fn find_right(&self, fam: &mut Family, reach: &Rat, limit: &Rat) -> Result<(Rat, Rat, u32), MeasureError> {
        loop {
            let front = fam.frontier(Side::Right);
            let cand = fam
                .gaps
                .range((Bound::Included(limit.clone()), Bound::Unbounded))
                .find(|(_, (hi, _))| hi > reach)
                .map(|(lo, (hi, lv))| (lo.clone(), hi.clone(), *lv));
            if let Some(g) = cand {
                if g.0 < front {
                    return Ok(g);
                }
            }
            let k = fam.depth(Side::Right) + 1;
            fam.extend(&self.c, Side::Right, k, &self.limits())?;
        }
    }

    fn compute_layout(&self, node: &CNode) -> Result<Layout, MeasureError> {
        let (a, b) = (&node.lo, &node.hi);
        let len = b - a;
        let mut fam = Family::new(a.clone(), b.clone(), node.host.clone());
        fam.extend(&self.c, Side::Left, 1, &self.limits())?;
        fam.extend(&self.c, Side::Right, 1, &self.limits())?;
        let gl = self.find_left(&mut fam, &(a + &self.eta * &len), b)?;
        let gr = self.find_right(&mut fam, &(b - &self.eta * &len), a)?;
        let wl = self.weight(&(&gl.0 - a), &len)?;
        let wr = self.weight(&(b - &gr.1), &len)?;
        let kl = &wl * &node.mass;
        let kr = &wr * &node.mass;
        let frac = &(&Scalar::one() - &wl) - &wr;
        let gaps: Vec<(Rat, Rat, u32)> = fam
            .gaps
            .range((Bound::Included(gl.0.clone()), Bound::Included(gr.0.clone())))
            .map(|(lo, (hi, lv))| (lo.clone(), hi.clone(), *lv))
            .collect();
        let mid = self.segment(&gaps, &gl.0, &gr.1, &len, &frac, &node.mass)?;
        self.note_defect(&(&(&kl + &kr) + &mid.total), &node.mass);
        {
            let mut l = self.ledger.lock().expect("ledger");
            l.layouts += 1;
            l.max_middle_gaps = l.max_middle_gaps.max(gaps.len().saturating_sub(2));
        }
        Ok(Layout {
            family: Mutex::new(fam),
            mid,
            left: Chain { x1: gl.0, m1: kl, links: Mutex::new(Vec::new()) },
            right: Chain { x1: gr.1, m1: kr, links: Mutex::new(Vec::new()) },
        })
    }

    /// Link `j >= 1` of a boundary chain: splits `K^j` into `K^{j+1}` and pieces.
    fn link(&self, node: &CNode, lay: &Layout, side: Side, j: usize) -> Result<Arc<Link>, MeasureError> {
        let chain = match side {
            Side::Left => &lay.left,
            Side::Right => &lay.right,
        };
        let mut links = chain.links.lock().expect("chain");
        while links.len() < j {
            let (outer, m) = match links.last() {
                Some(l) => (l.inner.clone(), l.inner_mass.clone()),
                None => (chain.x1.clone(), chain.m1.clone()),
            };
            let mut fam = lay.family.lock().expect("family");
            let link = match side {
                Side::Left => {
                    let a = &node.lo;
                    let whole = &outer - a;
                    let g = self.find_left(&mut fam, &(a + &self.eta * &whole), &outer)?;
                    let w = self.weight(&(&g.0 - a), &whole)?;
                    let gaps: Vec<_> = fam
                        .gaps
                        .range(g.0.clone()..outer.clone())
                        .map(|(lo, (hi, lv))| (lo.clone(), hi.clone(), *lv))
                        .collect();
                    let seg = self.segment(&gaps, &g.0, &outer, &whole, &(&Scalar::one() - &w), &m)?;
                    Link { inner: g.0, inner_mass: &w * &m, seg }
                }
                Side::Right => {
                    let b = &node.hi;
                    let whole = b - &outer;
                    let g = self.find_right(&mut fam, &(b - &self.eta * &whole), &outer)?;
                    let w = self.weight(&(b - &g.1), &whole)?;
                    let gaps: Vec<_> = fam
                        .gaps
                        .range((Bound::Included(outer.clone()), Bound::Included(g.0.clone())))
                        .map(|(lo, (hi, lv))| (lo.clone(), hi.clone(), *lv))
                        .collect();
                    let seg = self.segment(&gaps, &outer, &g.1, &whole, &(&Scalar::one() - &w), &m)?;
                    Link { inner: g.1, inner_mass: &w * &m, seg }
                }
            };
            self.note_defect(&(&link.inner_mass + &link.seg.total), &m);
            links.push(Arc::new(link));
        }
        Ok(links[j - 1].clone())
    }

    fn child_ref(&self, parent: &CNode, piece: &Piece) -> Result<ChildRef, MeasureError> {
        let PieceKind::Cell { child } = &piece.kind else {
            return Err(MeasureError::Invariant("gap piece has no child".into()));
        };
        if let Some(c) = child.get() {
            return Ok(c.clone());
        }
        let host = self.c.host(&parent.host, &piece.lo, &piece.hi, u32::MAX)?;
        if let Some(shapes) = &self.shapes {
            let class = self
                .c
                .generator()
                .translation_class(&host)
                .ok_or_else(|| MeasureError::Invariant("translation class missing below a classed root".into()))?;
            let key = (class, &piece.lo - &host.lo, &piece.hi - &host.lo);
            let rep = shapes
                .lock()
                .expect("shapes")
                .entry(key)
                .or_insert_with(|| {
                    Arc::new(CNode {
                        lo: piece.lo.clone(),
                        hi: piece.hi.clone(),
                        mass: Scalar::one(),
                        depth: parent.depth + 1,
                        host,
                        layout: OnceLock::new(),
                    })
                })
                .clone();
            let r = ChildRef::Shape { shift: &piece.lo - &rep.lo, rep };
            return Ok(child.get_or_init(|| r).clone());
        }
        let r = ChildRef::Abs(Arc::new(CNode {
            lo: piece.lo.clone(),
            hi: piece.hi.clone(),
            mass: piece.mass.clone(),
            depth: parent.depth + 1,
            host,
            layout: OnceLock::new(),
        }));
        if parent.depth < self.cfg.cache_depth {
            Ok(child.get_or_init(|| r).clone())
        } else {
            Ok(r)
        }
    }

    fn seg_cdf(&self, node: &CNode, seg: &Segment, t: &Rat, eps: &Rat, depth: u32) -> Result<Scalar, MeasureError> {
        let pc = &seg.pieces[seg.find(t)];
        if *t <= pc.lo {
            return Ok(pc.before.clone());
        }
        if *t >= pc.hi {
            return Ok(&pc.before + &pc.mass);
        }
        let inside = match &pc.kind {
            PieceKind::Gap { .. } => {
                let rel = (t - &pc.lo) / (&pc.hi - &pc.lo);
                &pc.mass * &self.power.cdf(&rel)?
            }
            PieceKind::Cell { .. } => match self.child_ref(node, pc)? {
                ChildRef::Abs(ch) => {
                    self.cdf_node(&ch, t, eps, depth + 1).map_err(|e| adjust_budget(e, None, &pc.before))?
                }
                ChildRef::Shape { rep, shift } => {
                    let m = pc.mass.lower_rat();
                    if m.is_zero() {
                        return Ok(pc.before.hull(&(&pc.before + &pc.mass)));
                    }
                    let r = self
                        .cdf_node(&rep, &(t - &shift), &(eps / m), depth + 1)
                        .map_err(|e| adjust_budget(e, Some(&pc.mass), &pc.before))?;
                    &pc.mass * &r
                }
            },
        };
        Ok(&pc.before + &inside)
    }

    fn cdf_node(&self, node: &CNode, t: &Rat, eps: &Rat, depth: u32) -> Result<Scalar, MeasureError> {
        if *t <= node.lo {
            return Ok(Scalar::zero());
        }
        if *t >= node.hi {
            return Ok(node.mass.clone());
        }
        let loose = || Scalar::from_bounds(Dyadic::zero(), node.mass.upper().clone(), node.mass.prec());
        if node.mass.upper().to_rat() <= *eps {
            return Ok(loose()?);
        }
        if depth >= self.cfg.max_descent {
            return Err(MeasureError::Budget {
                reason: format!("measure tree deeper than {}", self.cfg.max_descent),
                bounds: Some(loose()?),
            });
        }
        let lay = self.layout(node)?;
        if *t <= lay.left.x1 {
            return self.cdf_left(node, &lay, t, eps, depth);
        }
        if *t >= lay.right.x1 {
            let base = &node.mass - &lay.right.m1;
            let r = self.cdf_right(node, &lay, t, eps, depth).map_err(|e| adjust_budget(e, None, &base))?;
            return Ok(&base + &r);
        }
        let r = self.seg_cdf(node, &lay.mid, t, eps, depth).map_err(|e| adjust_budget(e, None, &lay.left.m1))?;
        Ok(&lay.left.m1 + &r)
    }

    fn cdf_left(&self, node: &CNode, lay: &Layout, t: &Rat, eps: &Rat, depth: u32) -> Result<Scalar, MeasureError> {
        let mut outer = lay.left.x1.clone();
        let mut m = lay.left.m1.clone();
        for j in 1..=self.cfg.max_links as usize {
            if *t >= outer {
                return Ok(m);
            }
            if m.upper().to_rat() <= *eps {
                return Ok(Scalar::from_bounds(Dyadic::zero(), m.upper().clone(), m.prec())?);
            }
            let link = self.link(node, lay, Side::Left, j)?;
            if *t >= link.inner {
                let r = self
                    .seg_cdf(node, &link.seg, t, eps, depth)
                    .map_err(|e| adjust_budget(e, None, &link.inner_mass))?;
                return Ok(&link.inner_mass + &r);
            }
            outer = link.inner.clone();
            m = link.inner_mass.clone();
        }
        Err(MeasureError::Budget {
            reason: format!("left chain longer than {}", self.cfg.max_links),
            bounds: Some(Scalar::from_bounds(Dyadic::zero(), m.upper().clone(), m.prec())?),
        })
    }

    /// Mass of `[y_1, t]` inside the right end.
    fn cdf_right(&self, node: &CNode, lay: &Layout, t: &Rat, eps: &Rat, depth: u32) -> Result<Scalar, MeasureError> {
        let mut outer = lay.right.x1.clone();
        let mut m = lay.right.m1.clone();
        let mut prefix = Scalar::zero();
        for j in 1..=self.cfg.max_links as usize {
            if *t <= outer {
                return Ok(prefix);
            }
            if m.upper().to_rat() <= *eps {
                return Ok(prefix.hull(&(&prefix + &m)));
            }
            let link = self.link(node, lay, Side::Right, j)?;
            if *t <= link.inner {
                let r = self.seg_cdf(node, &link.seg, t, eps, depth).map_err(|e| adjust_budget(e, None, &prefix))?;
                return Ok(&prefix + &r);
            }
            prefix = &prefix + &link.seg.total;
            outer = link.inner.clone();
            m = link.inner_mass.clone();
        }
        Err(MeasureError::Budget {
            reason: format!("right chain longer than {}", self.cfg.max_links),
            bounds: Some(prefix.hull(&(&prefix + &m))),
        })
    }

    /// `μ([root.lo, t])`.
    pub fn cdf(&self, t: &Rat, eps: &Rat) -> Result<MassBounds, MeasureError> {
        if !eps.is_positive() {
            return Err(MeasureError::Argument("eps must be positive".into()));
        }
        Ok(self.cdf_node(&self.root, t, eps, 0)?.clamp_nonneg())
    }

    /// `μ(q)` to width about `eps`.
    pub fn measure_of(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        if !eps.is_positive() {
            return Err(MeasureError::Argument("eps must be positive".into()));
        }
        let dom = self.root.interval();
        let Some(q) = q.intersection(&dom) else {
            return Ok(Scalar::zero());
        };
        let half = eps / rat(2, 1);
        let hi = self.cdf(&q.hi, &half)?;
        let lo = self.cdf(&q.lo, &half)?;
        Ok((&hi - &lo).clamp_nonneg())
    }

    /// `(t, μ([root.lo, t]))` for each grid point.
    pub fn cdf_samples(&self, grid: &[Rat], eps: &Rat) -> Result<Vec<(Rat, MassBounds)>, MeasureError> {
        grid.iter().map(|t| Ok((t.clone(), self.cdf(t, eps)?))).collect()
    }

    /// The gap family of `[lo, hi]` with both sides enumerated to annulus `k`.
    pub fn gap_family(&self, lo: &Rat, hi: &Rat, k: u32) -> Result<Vec<(Rat, Rat, u32)>, MeasureError> {
        let host = self.c.host(&self.root.host, lo, hi, u32::MAX)?;
        let mut fam = Family::new(lo.clone(), hi.clone(), host);
        fam.extend(&self.c, Side::Left, k, &self.limits())?;
        fam.extend(&self.c, Side::Right, k, &self.limits())?;
        Ok(fam.gaps.iter().map(|(a, (b, l))| (a.clone(), b.clone(), *l)).collect())
    }

    /// The measure-tree node with exactly the interval `[lo, hi]`, as a node,
    /// the shift taking it onto `[lo, hi]` and the factor turning its masses
    /// into actual masses.
    fn locate_node(&self, lo: &Rat, hi: &Rat) -> Result<Option<(Arc<CNode>, Rat, Scalar)>, MeasureError> {
        let mut cur = (self.root.clone(), Rat::zero(), Scalar::one());
        loop {
            let (node, shift, scale) = &cur;
            let (lo, hi) = (lo - shift, hi - shift);
            if node.lo == lo && node.hi == hi {
                return Ok(Some(cur));
            }
            if lo < node.lo || hi > node.hi || lo >= hi {
                return Ok(None);
            }
            let lay = self.layout(node)?;
            let mut segs: Vec<Arc<Link>> = Vec::new();
            for side in [Side::Left, Side::Right] {
                let inside = match side {
                    Side::Left => hi <= lay.left.x1,
                    Side::Right => lo >= lay.right.x1,
                };
                if !inside {
                    continue;
                }
                for j in 1..=self.cfg.max_links as usize {
                    let link = self.link(node, &lay, side, j)?;
                    let past = match side {
                        Side::Left => hi <= link.inner,
                        Side::Right => lo >= link.inner,
                    };
                    segs.push(link);
                    if !past {
                        break;
                    }
                }
            }
            let found = std::iter::once(&lay.mid)
                .chain(segs.iter().map(|l| &l.seg))
                .flat_map(|s| s.pieces.iter())
                .find(|pc| pc.lo <= lo && hi <= pc.hi);
            let Some(pc) = found else { return Ok(None) };
            if matches!(pc.kind, PieceKind::Gap { .. }) {
                return Ok(None);
            }
            cur = match self.child_ref(node, pc)? {
                ChildRef::Abs(ch) => (ch, shift.clone(), scale.clone()),
                ChildRef::Shape { rep, shift: s } => (rep, shift + &s, scale * &pc.mass),
            };
        }
    }

    fn view(seg: &Segment, shift: &Rat, scale: &Scalar) -> Vec<PieceView> {
        seg.pieces
            .iter()
            .map(|p| PieceView {
                lo: &p.lo + shift,
                hi: &p.hi + shift,
                is_gap: matches!(p.kind, PieceKind::Gap { .. }),
                mass: scale * &p.mass,
            })
            .collect()
    }

    /// The split of the measure-tree node `[lo, hi]`; `None` if there is no
    /// such node.
    pub fn distribution(&self, lo: &Rat, hi: &Rat) -> Result<Option<Distribution>, MeasureError> {
        let Some((node, shift, scale)) = self.locate_node(lo, hi)? else { return Ok(None) };
        let lay = self.layout(&node)?;
        let middle = TMeasure::view(&lay.mid, &shift, &scale);
        let first = &middle[0];
        let last = &middle[middle.len() - 1];
        Ok(Some(Distribution {
            interval: IntervalR::closed(lo.clone(), hi.clone())?,
            mass: &scale * &node.mass,
            g_left: (first.lo.clone(), first.hi.clone()),
            g_right: (last.lo.clone(), last.hi.clone()),
            k_left: (IntervalR::closed(lo.clone(), &lay.left.x1 + &shift)?, &scale * &lay.left.m1),
            k_right: (IntervalR::closed(&lay.right.x1 + &shift, hi.clone())?, &scale * &lay.right.m1),
            middle,
        }))
    }

    /// The first `n` chain intervals `K^1, K^2, ...` on one side of the node
    /// `[lo, hi]` with their masses; stops early at a degenerate one.
    pub fn boundary_chain(
        &self,
        lo: &Rat,
        hi: &Rat,
        side: Side,
        n: usize,
    ) -> Result<Option<Vec<(IntervalR, Scalar)>>, MeasureError> {
        let Some((node, shift, scale)) = self.locate_node(lo, hi)? else { return Ok(None) };
        let lay = self.layout(&node)?;
        let iv = |x: &Rat| match side {
            Side::Left => IntervalR::closed(lo.clone(), x + &shift),
            Side::Right => IntervalR::closed(x + &shift, hi.clone()),
        };
        let first = match side {
            Side::Left => &lay.left,
            Side::Right => &lay.right,
        };
        let mut out = vec![(iv(&first.x1)?, &scale * &first.m1)];
        for j in 1..n {
            if out[j - 1].0.is_degenerate() {
                break;
            }
            let l = self.link(&node, &lay, side, j)?;
            out.push((iv(&l.inner)?, &scale * &l.inner_mass));
        }
        Ok(Some(out))
    }

    /// Mass of the node `[lo, hi]` and of its parts: the two ends, then the
    /// middle pieces; the parts of each chain link follow when `links > 0`.
    pub fn parts(&self, lo: &Rat, hi: &Rat, links: usize) -> Result<Option<(Scalar, Vec<PieceView>)>, MeasureError> {
        let Some((node, shift, scale)) = self.locate_node(lo, hi)? else { return Ok(None) };
        let lay = self.layout(&node)?;
        let d = self.distribution(lo, hi)?.expect("node located");
        let mut v = vec![
            PieceView { lo: d.k_left.0.lo.clone(), hi: d.k_left.0.hi.clone(), is_gap: false, mass: d.k_left.1 },
            PieceView { lo: d.k_right.0.lo.clone(), hi: d.k_right.0.hi.clone(), is_gap: false, mass: d.k_right.1 },
        ];
        v.extend(d.middle);
        for side in [Side::Left, Side::Right] {
            for j in 1..=links {
                let l = self.link(&node, &lay, side, j)?;
                v.extend(TMeasure::view(&l.seg, &shift, &scale));
                let done = match side {
                    Side::Left => l.inner == node.lo,
                    Side::Right => l.inner == node.hi,
                };
                if done {
                    break;
                }
            }
        }
        Ok(Some((d.mass, v)))
    }

    /// Total mass of the gaps of each construction level `< n_max`
    /// (index = level; index 0 unused).
    pub fn gap_masses_by_level(&self, n_max: u32) -> Result<Vec<Scalar>, MeasureError> {
        if self.shapes.is_some() {
            let mut memo = BTreeMap::new();
            return self.shape_profile(&self.root, n_max, &mut memo, 0);
        }
        let mut acc = vec![Scalar::zero(); n_max.max(1) as usize];
        self.collect(&self.root, n_max, &mut acc, &Scalar::one(), 0)?;
        Ok(acc)
    }

    fn has_low_gap(&self, node: &CNode, u: &Rat, v: &Rat, n_max: u32) -> Result<bool, MeasureError> {
        if u >= v {
            return Ok(false);
        }
        Ok(self.c.host(&node.host, u, v, n_max)?.level < n_max)
    }

    /// Segments of a node that may hold gaps of level `< n_max`.
    fn low_segments(&self, node: &CNode, lay: &Layout, n_max: u32) -> Result<Vec<Arc<Link>>, MeasureError> {
        let mut segs = Vec::new();
        for side in [Side::Left, Side::Right] {
            let mut outer = match side {
                Side::Left => lay.left.x1.clone(),
                Side::Right => lay.right.x1.clone(),
            };
            for j in 1..=self.cfg.max_links as usize {
                let (u, v) = match side {
                    Side::Left => (&node.lo, &outer),
                    Side::Right => (&outer, &node.hi),
                };
                if !self.has_low_gap(node, u, v, n_max)? {
                    break;
                }
                if j == self.cfg.max_links as usize {
                    return Err(MeasureError::budget("boundary chain too long"));
                }
                let link = self.link(node, lay, side, j)?;
                outer = link.inner.clone();
                segs.push(link);
            }
        }
        Ok(segs)
    }

    /// Per-level gap masses of a node in units of its own mass, memoized per
    /// shape representative.
    fn shape_profile(
        &self,
        node: &CNode,
        n_max: u32,
        memo: &mut BTreeMap<usize, Arc<Vec<Scalar>>>,
        depth: u32,
    ) -> Result<Vec<Scalar>, MeasureError> {
        if depth >= self.cfg.max_descent {
            return Err(MeasureError::budget(format!("measure tree deeper than {}", self.cfg.max_descent)));
        }
        let mut acc = vec![Scalar::zero(); n_max.max(1) as usize];
        let lay = self.layout(node)?;
        let segs = self.low_segments(node, &lay, n_max)?;
        for seg in std::iter::once(&lay.mid).chain(segs.iter().map(|l| &l.seg)) {
            for pc in &seg.pieces {
                match pc.kind {
                    PieceKind::Gap { level } => {
                        if level < n_max {
                            acc[level as usize] = &acc[level as usize] + &pc.mass;
                        }
                    }
                    PieceKind::Cell { .. } => {
                        if !self.has_low_gap(node, &pc.lo, &pc.hi, n_max)? {
                            continue;
                        }
                        let ChildRef::Shape { rep, .. } = self.child_ref(node, pc)? else {
                            return Err(MeasureError::Invariant("unshaped node in a shaped tree".into()));
                        };
                        let key = Arc::as_ptr(&rep) as usize;
                        let sub = match memo.get(&key) {
                            Some(v) => v.clone(),
                            None => {
                                let v = Arc::new(self.shape_profile(&rep, n_max, memo, depth + 1)?);
                                memo.insert(key, v.clone());
                                v
                            }
                        };
                        for (a, x) in acc.iter_mut().zip(sub.iter()) {
                            if !(x.is_exact() && x.lower().is_zero()) {
                                *a = &*a + &(&pc.mass * x);
                            }
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Plain depth-first accumulation of per-level gap masses times `scale`.
    fn collect(
        &self,
        node: &CNode,
        n_max: u32,
        acc: &mut [Scalar],
        scale: &Scalar,
        depth: u32,
    ) -> Result<(), MeasureError> {
        if depth >= self.cfg.max_descent {
            return Err(MeasureError::budget(format!("measure tree deeper than {}", self.cfg.max_descent)));
        }
        let lay = self.layout(node)?;
        let segs = self.low_segments(node, &lay, n_max)?;
        for seg in std::iter::once(&lay.mid).chain(segs.iter().map(|l| &l.seg)) {
            for pc in &seg.pieces {
                match pc.kind {
                    PieceKind::Gap { level } => {
                        if level < n_max {
                            acc[level as usize] = &acc[level as usize] + &(scale * &pc.mass);
                        }
                    }
                    PieceKind::Cell { .. } => {
                        if !self.has_low_gap(node, &pc.lo, &pc.hi, n_max)? {
                            continue;
                        }
                        match self.child_ref(node, pc)? {
                            ChildRef::Abs(ch) => self.collect(&ch, n_max, acc, scale, depth + 1)?,
                            ChildRef::Shape { rep, .. } => {
                                self.collect(&rep, n_max, acc, &(scale * &pc.mass), depth + 1)?
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Gap endpoints of the first construction level whose gaps are no
    /// longer than `scale`, thinned to about `limit` points.
    fn gap_points(&self, scale: &Rat, limit: usize) -> Result<Vec<Rat>, MeasureError> {
        let mut level: Vec<Arc<Node>> = self.c.roots().to_vec();
        let mut out = BTreeMap::new();
        for _ in 0..64 {
            let mut gaps = Vec::new();
            let mut next = Vec::new();
            for n in &level {
                if let Some(e) = self.c.expansion(n)? {
                    if let Some(g) = &e.gap {
                        gaps.push(g.clone());
                    }
                    next.extend(e.children.iter().cloned());
                }
            }
            let small = gaps.iter().all(|(a, b)| (b - a) <= *scale);
            if small || next.len() > 4 * limit.max(1) || next.is_empty() {
                let step = (2 * gaps.len()).div_ceil(limit.max(1)).max(1);
                for (i, (a, b)) in gaps.into_iter().enumerate() {
                    if i % step == 0 {
                        out.insert(a, ());
                        out.insert(b, ());
                    }
                }
                break;
            }
            level = next;
        }
        Ok(out.into_keys().collect())
    }
}

impl MeasureOracle for TMeasure {
    fn support(&self) -> (Rat, Rat) {
        (self.root.lo.clone(), self.root.hi.clone())
    }

    fn mass(&self, q: &IntervalR, eps: &Rat) -> Result<MassBounds, MeasureError> {
        self.measure_of(q, eps)
    }

    fn total(&self, _eps: &Rat) -> Result<MassBounds, MeasureError> {
        Ok(Scalar::one())
    }

    fn special_points(&self, scale: &Rat, limit: usize) -> Vec<Rat> {
        let mut v = self.gap_points(scale, limit).unwrap_or_default();
        v.push(self.root.lo.clone());
        v.push(self.root.hi.clone());
        v.sort();
        v.dedup();
        v
    }
}

impl TMeasure {
    /// `μ(J)/μ(I)` for a covering interval `I` with gap `J`, to width about `eps`.
    pub fn gap_share(&self, i: &Node, eps: &Rat) -> Result<Option<(Scalar, Scalar)>, MeasureError> {
        let Some((a, b)) = self.c.gap(i)? else { return Ok(None) };
        let mj = self.measure_of(&IntervalR::open(a, b)?, eps)?;
        let mi = self.measure_of(&i.interval(), eps)?;
        Ok(Some((mj, mi)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{middle_thirds, Explicit, ExplicitNode};

    fn thirds(p: Rat, eta: Option<Rat>) -> TMeasure {
        let cfg = TMeasureConfig { eta, ..TMeasureConfig::default() };
        TMeasure::with_config(Arc::new(middle_thirds()), p, cfg).unwrap()
    }

    #[test]
    fn level_one_split() {
        let m = thirds(rat(1, 1), Some(rat(1, 10)));
        let d = m.distribution(&rat(0, 1), &rat(1, 1)).unwrap().unwrap();
        assert_eq!(d.g_left, (rat(1, 27), rat(2, 27)));
        assert_eq!(d.g_right, (rat(25, 27), rat(26, 27)));
        assert!(d.k_left.1.contains_rat(&rat(1, 27)));
        let total: Scalar = m.parts(&rat(0, 1), &rat(1, 1), 0).unwrap().unwrap().1.into_iter().map(|v| v.mass).sum();
        assert!(total.contains_rat(&rat(1, 1)));
        let kl = m.measure_of(&IntervalR::closed(rat(0, 1), rat(1, 27)).unwrap(), &pow2(-80)).unwrap();
        assert!(kl.contains_rat(&rat(1, 27)));
    }

    #[test]
    fn root_chain_is_exact_power() {
        let m = thirds(rat(1, 2), None);
        for (k, mass) in m.boundary_chain(&rat(0, 1), &rat(1, 1), Side::Left, 6).unwrap().unwrap() {
            let want = pow_prec(&k.len(), &rat(1, 2), 200).unwrap();
            assert!(mass.overlaps(&want), "{k} {mass:?}");
        }
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        let m = thirds(rat(2, 1), None);
        let eps = pow2(-40);
        assert!(m.cdf(&rat(0, 1), &eps).unwrap().contains_rat(&rat(0, 1)));
        assert!(m.cdf(&rat(1, 1), &eps).unwrap().contains_rat(&rat(1, 1)));
        let mut prev = Rat::zero();
        for i in 1..64 {
            let v = m.cdf(&rat(i, 64), &eps).unwrap();
            assert!(v.upper_rat() >= prev);
            prev = v.lower_rat();
        }
        assert!(m.max_relative_defect() < pow2(-100));
    }

    #[test]
    fn degenerate_gap_rejected() {
        let c = Explicit::construction(vec![vec![ExplicitNode {
            interval: (rat(0, 1), rat(1, 1)),
            gap: Some((rat(1, 2), rat(1, 2))),
        }]])
        .unwrap();
        assert!(matches!(TMeasure::build(Arc::new(c), rat(1, 1)), Err(MeasureError::Precondition(_))));
    }

    #[test]
    fn default_eta_is_admissible() {
        for p in [rat(1, 1), rat(1, 2), rat(2, 1), rat(1, 3), rat(5, 2)] {
            let e = default_eta(&p).unwrap();
            assert!(eta_admissible(&e, &p));
        }
        assert_eq!(default_eta(&rat(1, 1)).unwrap(), rat(1, 8));
    }

    #[test]
    fn shape_profile_matches_plain_descent() {
        for p in [rat(1, 1), rat(1, 2)] {
            let m = thirds(p, None);
            let fast = m.gap_masses_by_level(9).unwrap();
            let mut slow = vec![Scalar::zero(); 9];
            m.collect(m.root(), 9, &mut slow, &Scalar::one(), 0).unwrap();
            for (a, b) in fast.iter().zip(&slow) {
                assert!(a.overlaps(b), "{a:?} {b:?}");
                assert!(!b.lower().is_zero() || b.upper().is_zero());
            }
        }
    }

    /// The middle-thirds generator without translation classes.
    struct Plain(Arc<dyn crate::construction::Generator>);

    impl crate::construction::Generator for Plain {
        fn expand(&self, node: &Node) -> Result<Option<crate::construction::RawExpansion>, ConstructionError> {
            self.0.expand(node)
        }
    }

    #[test]
    fn shapes_agree_with_plain_nodes() {
        let shaped = thirds(rat(1, 2), None);
        let g = shaped.construction().generator().clone();
        let c = Construction::new(vec![(rat(0, 1), rat(1, 1), 0)], Arc::new(Plain(g))).unwrap();
        let plain = TMeasure::build(Arc::new(c), rat(1, 2)).unwrap();
        assert!(plain.shapes.is_none());
        let eps = pow2(-30);
        for i in 0..40 {
            let t = rat(2 * i + 1, 81);
            let a = shaped.cdf(&t, &eps).unwrap();
            let b = plain.cdf(&t, &eps).unwrap();
            assert!(a.overlaps(&b), "{t} {a:?} {b:?}");
        }
        let fast = shaped.gap_masses_by_level(7).unwrap();
        let slow = plain.gap_masses_by_level(7).unwrap();
        assert!(fast.iter().zip(&slow).all(|(a, b)| a.overlaps(b)));
    }

    use crate::numerics::pow2;
}
