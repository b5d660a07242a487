//! Empirical checks on measures and constructions: doubling ratios, gap
//! share ratios, masses of covering levels, `ℓ^p` sums, the dimension-one
//! profile and porosity covers.

use std::fmt::Debug;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::construction::{AlphaSeq, Construction, IntervalR, Node};
use crate::measure::{MassBounds, MeasureError, MeasureOracle};
use crate::numerics::{exact_pow, log2_scalar, pow2, pow_prec, rat, rat_serde, Dyadic, Rat, Round, Scalar};
use crate::theorem_measure::TMeasure;

pub const SCHEMA_VERSION: u32 = 1;

/// A computation stopped early; `partial` holds what was finished.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct Partial<T: Debug> {
    #[source]
    pub error: MeasureError,
    pub partial: T,
}

/// `max(a, b) / min(a, b)` enclosed.
pub fn ratio_of_larger(a: &Scalar, b: &Scalar) -> Option<Scalar> {
    let lo_den = a.lower().clone().min(b.lower().clone());
    if !lo_den.is_positive() {
        return None;
    }
    let hi_num = a.upper().clone().max(b.upper().clone());
    let lo_num = a.lower().clone().max(b.lower().clone());
    let hi_den = a.upper().clone().min(b.upper().clone());
    let prec = a.prec().max(b.prec());
    let up = hi_num.div(&lo_den, prec, Round::Up);
    let down = lo_num.div(&hi_den, prec, Round::Down).max(Dyadic::one());
    Scalar::from_bounds(down, up, prec).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleRow {
    #[serde(with = "rat_serde")]
    pub scale: Rat,
    pub samples: usize,
    pub max_ratio: Scalar,
    /// Common endpoint of the worst pair.
    #[serde(with = "rat_serde")]
    pub worst_at: Rat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport {
    pub schema_version: u32,
    pub sampling: String,
    pub seed: u64,
    pub rows: Vec<ScaleRow>,
}

impl DoublingReport {
    /// Enclosure of the largest ratio over all scales.
    pub fn global_max(&self) -> Option<Scalar> {
        self.rows.iter().map(|r| r.max_ratio.clone()).reduce(|a, b| a.max(&b))
    }

    /// Largest ratio over the scales `>= min_scale`.
    pub fn max_down_to(&self, min_scale: &Rat) -> Option<Scalar> {
        self.rows.iter().filter(|r| r.scale >= *min_scale).map(|r| r.max_ratio.clone()).reduce(|a, b| a.max(&b))
    }
}

const SAMPLING: &str = "boundary pairs, gap endpoints at the scale, stratified grid with 16-bit seeded jitter";

/// Deterministic pair centres for scale `r` on `[a, b]`.
pub fn pair_centers(a: &Rat, b: &Rat, r: &Rat, samples: usize, specials: &[Rat], rng: &mut ChaCha8Rng) -> Vec<Rat> {
    let lo = a + r;
    let hi = b - r;
    if lo > hi || samples == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(samples);
    for j in 0..5 {
        let d = r * pow2(j);
        for x in [a + &d, b - &d] {
            if lo <= x && x <= hi {
                out.push(x);
            }
        }
    }
    let inside: Vec<&Rat> = specials.iter().filter(|x| lo <= **x && **x <= hi).collect();
    let room = (samples / 2).saturating_sub(out.len()).max(1);
    let step = inside.len().div_ceil(room).max(1);
    out.extend(inside.into_iter().step_by(step).cloned());
    out.sort();
    out.dedup();
    out.truncate(samples);
    let k = samples - out.len();
    let span = &hi - &lo;
    for i in 0..k {
        let u: u32 = rng.gen_range(0..1 << 16);
        let frac = (rat(i as i64, 1) + Rat::new(u.into(), (1u32 << 16).into())) / rat(k as i64, 1);
        out.push(&lo + &span * frac);
    }
    out.sort();
    out.dedup();
    out
}

/// Ratio of two masses, tightening the tolerance (starting from `eps`)
/// until the ratio is resolved to about 1/64 of its size.
pub(crate) fn resolve_ratio<F>(what: &str, mut eps: Rat, masses: F) -> Result<Scalar, MeasureError>
where
    F: Fn(&Rat) -> Result<(Scalar, Scalar), MeasureError>,
{
    for _ in 0..6 {
        let (m1, m2) = masses(&eps)?;
        let small_up = m1.upper().clone().min(m2.upper().clone());
        if small_up.is_zero() {
            return Err(MeasureError::Invariant(format!("zero mass at {what}")));
        }
        if let Some(q) = ratio_of_larger(&m1, &m2) {
            if q.width().to_rat() * rat(64, 1) <= q.lower_rat() {
                return Ok(q);
            }
        }
        eps = small_up.to_rat() / rat(1024, 1);
    }
    let (m1, m2) = masses(&eps)?;
    ratio_of_larger(&m1, &m2).ok_or_else(|| MeasureError::budget(format!("could not separate masses at {what}")))
}

/// Masses of `[x - r, x]` and `[x, x + r]` and their ratio.
fn pair_ratio(o: &dyn MeasureOracle, x: &Rat, r: &Rat) -> Result<Scalar, MeasureError> {
    let left = IntervalR::closed(x - r, x.clone())?;
    let right = IntervalR::closed(x.clone(), x + r)?;
    resolve_ratio(&format!("{x}, scale {r}"), r * r / rat(64, 1), |eps| Ok((o.mass(&left, eps)?, o.mass(&right, eps)?)))
}

/// Largest `μ(I_1)/μ(I_2)` (larger over smaller) over sampled adjacent pairs
/// of equal length `r`, for each scale.
pub fn doubling_report(
    o: &dyn MeasureOracle,
    scales: &[Rat],
    samples: usize,
    seed: u64,
) -> Result<DoublingReport, Partial<DoublingReport>> {
    let (a, b) = o.support();
    let mut report = DoublingReport { schema_version: SCHEMA_VERSION, sampling: SAMPLING.into(), seed, rows: Vec::new() };
    for (idx, r) in scales.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let specials = o.special_points(r, samples);
        let xs = pair_centers(&a, &b, r, samples, &specials, &mut rng);
        let mut best: Option<(Scalar, Rat)> = None;
        for x in &xs {
            let q = match pair_ratio(o, x, r) {
                Ok(q) => q,
                Err(error) => return Err(Partial { error, partial: report }),
            };
            let better = match &best {
                None => true,
                Some((b, _)) => q.upper() > b.upper(),
            };
            best = Some(match best {
                Some((b, at)) if !better => (b.max(&q), at),
                Some((b, _)) => (b.max(&q), x.clone()),
                None => (q, x.clone()),
            });
        }
        if let Some((max_ratio, worst_at)) = best {
            report.rows.push(ScaleRow { scale: r.clone(), samples: xs.len(), max_ratio, worst_at });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub level: u32,
    #[serde(with = "rat_serde")]
    pub lo: Rat,
    #[serde(with = "rat_serde")]
    pub hi: Rat,
    /// `[μ(J)/μ(I)] / (|J|/|I|)^p`
    pub ratio: Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub schema_version: u32,
    pub depth: u32,
    pub rows: Vec<RatioRow>,
    pub min: Scalar,
    pub max: Scalar,
    /// `max / min`
    pub spread: Scalar,
}

/// The normalized gap share of one covering interval.
pub fn gap_ratio(mu: &TMeasure, node: &Node, eps: &Rat) -> Result<Option<Scalar>, MeasureError> {
    let Some((mj, mi)) = mu.gap_share(node, eps)? else { return Ok(None) };
    let Some((g0, g1)) = mu.construction().gap(node)? else { return Ok(None) };
    let geo = pow_prec(&((g1 - g0) / node.len()), mu.p(), mi.prec())?;
    Ok(Some(mj.div(&mi)?.div(&geo)?))
}

/// `r_{n,i}` for every covering interval of level `<= depth`.
pub fn ratio_report(mu: &TMeasure, depth: u32) -> Result<RatioReport, MeasureError> {
    if depth == 0 {
        return Err(MeasureError::Argument("depth must be at least 1".into()));
    }
    let eps = pow2(-100);
    let mut rows = Vec::new();
    for level in mu.construction().levels(depth)? {
        for n in level {
            if let Some(ratio) = gap_ratio(mu, &n, &eps)? {
                rows.push(RatioRow { level: n.level, lo: n.lo.clone(), hi: n.hi.clone(), ratio });
            }
        }
    }
    let min = rows.iter().map(|r| r.ratio.clone()).reduce(|a, b| a.min(&b));
    let max = rows.iter().map(|r| r.ratio.clone()).reduce(|a, b| a.max(&b));
    let (Some(min), Some(max)) = (min, max) else {
        return Err(MeasureError::Precondition("no gaps up to the requested depth".into()));
    };
    let spread = max.div(&min)?;
    Ok(RatioReport { schema_version: SCHEMA_VERSION, depth, rows, min, max, spread })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassProfile {
    pub schema_version: u32,
    /// `μ(C_n)` for `n = 1..=N`.
    pub masses: Vec<Scalar>,
    /// `μ(C_n) - μ(C_{n+1})` for `n = 1..=N`.
    pub decrements: Vec<Scalar>,
}

impl MassProfile {
    pub fn mass(&self, n: u32) -> &Scalar {
        &self.masses[n as usize - 1]
    }

    pub fn decrement(&self, n: u32) -> &Scalar {
        &self.decrements[n as usize - 1]
    }

    /// `d_n / μ(C_n)`
    pub fn relative_decrement(&self, n: u32) -> Result<Scalar, MeasureError> {
        Ok(self.decrement(n).div(self.mass(n))?)
    }
}

/// `μ(C_n)` for `n <= N`, where `C_n` is the union of level-`n` covering intervals.
pub fn cantor_mass_profile(mu: &TMeasure, n: u32) -> Result<MassProfile, MeasureError> {
    if n == 0 {
        return Err(MeasureError::Argument("N must be at least 1".into()));
    }
    let d = mu.gap_masses_by_level(n + 1)?;
    let mut masses = Vec::with_capacity(n as usize);
    let mut m = Scalar::one();
    for level in 1..=n as usize {
        masses.push(m.clone().clamp_nonneg());
        m = &m - &d[level];
    }
    Ok(MassProfile { schema_version: SCHEMA_VERSION, masses, decrements: d[1..].to_vec() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthTag {
    BoundedLooking,
    /// The partial sums keep growing at the largest sampled `N`.
    LinearGrowth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSums {
    #[serde(with = "rat_serde")]
    pub p: Rat,
    /// `Σ_{k <= n} α_k^p` for `n = 1..=N`.
    pub partial: Vec<Scalar>,
    /// The final sum when every term is rational.
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_rat")]
    pub exact: Option<Rat>,
    /// Ratio of the increments over `(N/2, N]` and `(N/4, N/2]`.
    pub increment_ratio: f64,
    pub growth: GrowthTag,
}

mod opt_rat {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &Option<Rat>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_some(&crate::numerics::format_rat(r)),
            None => s.serialize_none(),
        }
    }
}

/// Partial sums of `α_n^p` with an advisory growth tag.
pub fn lp_partial_sums(seq: &AlphaSeq, p: &Rat, n: u32) -> Result<LpSums, MeasureError> {
    if n == 0 {
        return Err(MeasureError::Argument("N must be at least 1".into()));
    }
    let mut partial = Vec::with_capacity(n as usize);
    let mut terms = Vec::with_capacity(n as usize);
    let mut acc = Scalar::zero();
    let mut exact = Some(Rat::zero());
    for k in 1..=n {
        let a = seq.alpha(k)?;
        let term = match exact_pow(&a, p) {
            Some(t) => {
                if let Some(e) = exact.as_mut() {
                    *e += &t;
                }
                Scalar::from_rat(&t)
            }
            None => {
                exact = None;
                pow_prec(&a, p, 128)?
            }
        };
        acc = &acc + &term;
        partial.push(acc.clone());
        terms.push(term);
    }
    // block sums straight from the terms, so tiny increments keep their digits
    let block = |a: usize, b: usize| terms[a..b].iter().cloned().sum::<Scalar>();
    let nn = n as usize;
    let q = if nn >= 4 {
        let bottom = block(nn / 4, nn / 2);
        if bottom.certainly_positive() {
            block(nn / 2, nn).div(&bottom)?.to_f64()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let growth = if q < 0.8 { GrowthTag::BoundedLooking } else { GrowthTag::LinearGrowth };
    Ok(LpSums { p: p.clone(), partial, exact, increment_ratio: q, growth })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dim1Trend {
    TowardZero,
    Steady,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dim1Profile {
    /// `log2(∏_{k<=n}(1 - α_k)) / n` for `n = 1..=N`.
    pub values: Vec<Scalar>,
    pub trend: Dim1Trend,
}

pub fn dim1_profile(seq: &AlphaSeq, n: u32) -> Result<Dim1Profile, MeasureError> {
    if n == 0 {
        return Err(MeasureError::Argument("N must be at least 1".into()));
    }
    let mut prod = Scalar::one();
    let mut values = Vec::with_capacity(n as usize);
    for k in 1..=n {
        prod = &prod * &Scalar::from_rat_prec(&(rat(1, 1) - seq.alpha(k)?), 128);
        values.push(log2_scalar(&prod, 128)?.mul_rat(&rat(1, k as i64)));
    }
    let last = values[values.len() - 1].to_f64().abs();
    let half = values[(values.len() - 1) / 2].to_f64().abs();
    let trend = if n >= 2 && last <= 0.75 * half { Dim1Trend::TowardZero } else { Dim1Trend::Steady };
    Ok(Dim1Profile { values, trend })
}

/// Open ball `(center - radius, center + radius)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Ball {
    #[serde(with = "rat_serde")]
    pub center: Rat,
    #[serde(with = "rat_serde")]
    pub radius: Rat,
}

impl Ball {
    pub fn interval(&self) -> IntervalR {
        IntervalR::open(&self.center - &self.radius, &self.center + &self.radius).expect("radius is positive")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallPair {
    pub ball: Ball,
    pub sub: Ball,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverLevel {
    pub n: u32,
    /// Sub-ball radius over ball radius.
    #[serde(with = "rat_serde")]
    pub alpha: Rat,
    pub pairs: Vec<BallPair>,
}

/// Balls `B_{n,j}` with sub-balls `B'_{n,j}` of radius `α_n · radius(B_{n,j})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PorosityCover {
    levels: Vec<CoverLevel>,
}

impl PorosityCover {
    pub fn new(levels: Vec<CoverLevel>) -> Result<Self, MeasureError> {
        for lv in &levels {
            for bp in &lv.pairs {
                if !bp.ball.radius.is_positive() {
                    return Err(MeasureError::Invariant(format!("ball at {} has no radius", bp.ball.center)));
                }
                if bp.sub.radius != &lv.alpha * &bp.ball.radius {
                    return Err(MeasureError::Invariant(format!(
                        "sub-ball at {} has radius {} instead of {} times {}",
                        bp.sub.center, bp.sub.radius, lv.alpha, bp.ball.radius
                    )));
                }
                if (&bp.sub.center - &bp.ball.center).abs() + &bp.sub.radius > bp.ball.radius {
                    return Err(MeasureError::Invariant(format!("sub-ball at {} leaves its ball", bp.sub.center)));
                }
            }
        }
        Ok(PorosityCover { levels })
    }

    pub fn levels(&self) -> &[CoverLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(|l| l.pairs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sub_balls(&self) -> impl Iterator<Item = &Ball> {
        self.levels.iter().flat_map(|l| l.pairs.iter().map(|p| &p.sub))
    }
}

/// Outcome of probing an interval against a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Probe {
    Hit,
    Miss,
    Unknown,
}

/// Decides (when it can) whether an interval meets a set.
pub trait SetOracle {
    fn probe(&self, q: &IntervalR) -> Result<Probe, MeasureError>;
}

/// The Cantor set of a construction, probed to a bounded depth.
pub struct CantorSet<'a> {
    pub c: &'a Construction,
    pub max_level: u32,
}

impl CantorSet<'_> {
    fn probe_node(&self, n: &std::sync::Arc<Node>, q: &IntervalR) -> Result<Probe, MeasureError> {
        if q.contains_point(&n.lo) || q.contains_point(&n.hi) {
            return Ok(Probe::Hit);
        }
        if n.level >= self.max_level {
            return Ok(Probe::Unknown);
        }
        let Some(e) = self.c.expansion(n)? else { return Ok(Probe::Unknown) };
        let mut out = Probe::Miss;
        for ch in &e.children {
            if !q.intersects(&ch.interval()) {
                continue;
            }
            match self.probe_node(ch, q)? {
                Probe::Hit => return Ok(Probe::Hit),
                Probe::Unknown => out = Probe::Unknown,
                Probe::Miss => {}
            }
        }
        Ok(out)
    }
}

impl SetOracle for CantorSet<'_> {
    fn probe(&self, q: &IntervalR) -> Result<Probe, MeasureError> {
        if q.is_empty() {
            return Ok(Probe::Miss);
        }
        let mut out = Probe::Miss;
        for r in self.c.roots() {
            if !q.intersects(&r.interval()) {
                continue;
            }
            match self.probe_node(r, q)? {
                Probe::Hit => return Ok(Probe::Hit),
                Probe::Unknown => out = Probe::Unknown,
                Probe::Miss => {}
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict3 {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PorosityVerdict {
    pub schema_version: u32,
    pub p1: Verdict3,
    /// First sub-ball meeting the set, or first one that could not be decided.
    pub p1_witness: Option<Ball>,
    pub p2: Verdict3,
    pub overlap_bound: usize,
    pub max_overlap: usize,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_rat")]
    pub p2_witness: Option<Rat>,
}

/// Largest number of sub-balls sharing a point, by a sweep; also a point
/// where it is attained.
pub fn max_overlap_sweep(cover: &PorosityCover) -> (usize, Option<Rat>) {
    // open intervals: at equal coordinates, closing comes before opening
    let mut ev: Vec<(Rat, i8)> = Vec::with_capacity(2 * cover.len());
    for b in cover.sub_balls() {
        ev.push((&b.center - &b.radius, 1));
        ev.push((&b.center + &b.radius, -1));
    }
    ev.sort();
    let (mut cur, mut best, mut at) = (0i64, 0i64, None);
    for (x, d) in ev {
        cur += d as i64;
        if cur > best {
            best = cur;
            at = Some(x);
        }
    }
    (best as usize, at)
}

/// The same count by comparing every pair.
pub fn max_overlap_brute(cover: &PorosityCover) -> usize {
    let iv: Vec<(Rat, Rat)> = cover.sub_balls().map(|b| (&b.center - &b.radius, &b.center + &b.radius)).collect();
    iv.iter().map(|(x, _)| iv.iter().filter(|(lo, hi)| lo <= x && x < hi).count()).max().unwrap_or(0)
}

/// (P1) every sub-ball misses the set; (P2) no point lies in more than
/// `n_bound` sub-balls. Overlap is counted in the line, which bounds it in
/// any subspace.
pub fn porosity_check(cover: &PorosityCover, set: &dyn SetOracle, n_bound: usize) -> Result<PorosityVerdict, MeasureError> {
    let mut p1 = Verdict3::Pass;
    let mut p1_witness = None;
    for b in cover.sub_balls() {
        match set.probe(&b.interval())? {
            Probe::Miss => {}
            Probe::Hit => {
                p1 = Verdict3::Fail;
                p1_witness = Some(b.clone());
                break;
            }
            Probe::Unknown => {
                if p1 == Verdict3::Pass {
                    p1 = Verdict3::Indeterminate;
                    p1_witness = Some(b.clone());
                }
            }
        }
    }
    let (max_overlap, at) = max_overlap_sweep(cover);
    let p2 = if max_overlap <= n_bound { Verdict3::Pass } else { Verdict3::Fail };
    Ok(PorosityVerdict {
        schema_version: SCHEMA_VERSION,
        p1,
        p1_witness,
        p2,
        overlap_bound: n_bound,
        max_overlap,
        p2_witness: if p2 == Verdict3::Fail { at } else { None },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PorosityMassRow {
    pub n: u32,
    pub sum: MassBounds,
    /// `ε α_n^p`
    pub threshold: Scalar,
    pub flagged: bool,
}

/// `Σ_j μ(B'_{n,j})` per level against `ε α_n^p`; a level is flagged when
/// the sum is certainly at most the threshold.
pub fn porosity_mass_test(
    o: &dyn MeasureOracle,
    cover: &PorosityCover,
    p: &Rat,
    eps_factor: &Rat,
    tol: &Rat,
) -> Result<Vec<PorosityMassRow>, MeasureError> {
    let mut out = Vec::new();
    for lv in cover.levels() {
        let per = tol / rat(lv.pairs.len().max(1) as i64, 1);
        let mut sum = Scalar::zero();
        for bp in &lv.pairs {
            sum = &sum + &o.mass(&bp.sub.interval(), &per)?;
        }
        let threshold = pow_prec(&lv.alpha, p, 128)?.mul_rat(eps_factor);
        let flagged = sum.upper() <= threshold.lower();
        out.push(PorosityMassRow { n: lv.n, sum, threshold, flagged });
    }
    Ok(out)
}
