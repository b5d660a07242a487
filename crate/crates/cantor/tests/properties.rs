use std::sync::{Arc, OnceLock};

use num_traits::{One, Pow, Signed, Zero};
use proptest::prelude::*;

use cantor_doubling::analysis::{
    cantor_mass_profile, doubling_report, lp_partial_sums, max_overlap_brute, max_overlap_sweep, Ball, BallPair,
    CoverLevel, PorosityCover,
};
use cantor_doubling::construction::{middle_interval, middle_thirds, AlphaSeq};
use cantor_doubling::measure::MeasureOracle;
use cantor_doubling::midpoint::{rung, rung_tail};
use cantor_doubling::numerics::{pow2, pow_bounds, pow_prec, rat, Dyadic, Rat, Round, Scalar};
use cantor_doubling::power_measure::PowerMeasure;
use cantor_doubling::theorem_measure::TMeasure;

fn small_rat(lo: i64, hi: i64, den: i64) -> impl Strategy<Value = Rat> {
    (lo..hi).prop_map(move |k| rat(k, den))
}

/// `lower^b <= base^a <= upper^b`, decided in exact rationals.
fn encloses_root(s: &Scalar, base: &Rat, a: u32, b: u32) -> bool {
    let v: Rat = Pow::pow(base, a);
    Pow::pow(&s.lower_rat(), b) <= v && v <= Pow::pow(&s.upper_rat(), b)
}

fn thirds(p: usize) -> &'static TMeasure {
    static CELLS: [OnceLock<TMeasure>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let ps = [rat(1, 2), rat(1, 1), rat(2, 1)];
    CELLS[p].get_or_init(|| TMeasure::build(Arc::new(middle_thirds()), ps[p].clone()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn powers_enclose_the_root(n in 1i64..200, d in 1i64..200, a in 1u32..5, b in 1u32..5) {
        prop_assume!(n <= d);
        let base = rat(n, d);
        let s = pow_bounds(&base, &rat(a as i64, b as i64), &pow2(-70)).unwrap();
        prop_assert!(s.width().to_rat() <= pow2(-70));
        prop_assert!(encloses_root(&s, &base, a, b));
    }

    #[test]
    fn refinement_narrows_without_moving(n in 1i64..100, d in 100i64..300, b in 2u32..6) {
        let base = rat(n, d);
        let coarse = pow_bounds(&base, &rat(1, b as i64), &pow2(-10)).unwrap();
        let fine = coarse.refine(&pow2(-120)).unwrap();
        prop_assert!(fine.width().to_rat() <= pow2(-120));
        prop_assert!(fine.width().to_rat() <= coarse.width().to_rat());
        prop_assert!(fine.overlaps(&coarse));
        prop_assert!(encloses_root(&fine, &base, 1, b));
    }

    #[test]
    fn dyadic_quotients_round_outward(a in -(1i64 << 40)..(1i64 << 40), b in 1i64..(1i64 << 30), ea in -40i64..40, eb in -40i64..40, neg in any::<bool>(), prec in 8u32..100) {
        let b = if neg { -b } else { b };
        let (x, y) = (Dyadic::new(a.into(), ea), Dyadic::new(b.into(), eb));
        let exact = x.to_rat() / y.to_rat();
        let (lo, hi) = (x.div(&y, prec, Round::Down), x.div(&y, prec, Round::Up));
        prop_assert!(lo.to_rat() <= exact && exact <= hi.to_rat());
        prop_assert!(lo.mantissa().bits() <= prec as u64 && hi.mantissa().bits() <= prec as u64);
        // adjacent at the working precision
        prop_assert!(hi.sub(&lo).to_rat().abs() <= exact.abs() * pow2(2 - prec as i64));
    }

    #[test]
    fn dyadic_integer_powers_are_exact(k in 1i64..64, e in 1i64..12, a in 1i64..6) {
        let base = rat(k, 64) * pow2(-e);
        prop_assume!(base <= rat(1, 1));
        let s = pow_prec(&base, &rat(a, 1), 64).unwrap();
        prop_assert!(s.is_exact());
        prop_assert_eq!(s.lower_rat(), Pow::pow(&base, a as u32));
    }

    #[test]
    fn sweep_matches_pairwise(
        balls in prop::collection::vec((0i64..64, 1i64..16, 0i64..4), 1..40),
    ) {
        let pairs = balls
            .iter()
            .map(|&(c, r, off)| {
                let ball = Ball { center: rat(c, 8), radius: rat(r, 8) };
                // sub-ball of half the radius shifted inside the ball
                let sub = Ball { center: rat(c, 8) + rat(r * off, 64) - rat(r, 32), radius: rat(r, 16) };
                BallPair { ball, sub }
            })
            .collect();
        let cover = PorosityCover::new(vec![CoverLevel { n: 1, alpha: rat(1, 2), pairs }]).unwrap();
        prop_assert_eq!(max_overlap_sweep(&cover).0, max_overlap_brute(&cover));
    }

    #[test]
    fn cdf_is_monotone(p in 0usize..3, a in 0i64..4096, b in 0i64..4096) {
        let mu = thirds(p);
        let (s, t) = (rat(a.min(b), 4096), rat(a.max(b), 4096));
        let eps = pow2(-40);
        let (fs, ft) = (mu.cdf(&s, &eps).unwrap(), mu.cdf(&t, &eps).unwrap());
        prop_assert!(fs.lower_rat() <= ft.upper_rat());
        prop_assert!(ft.upper_rat() <= rat(1, 1) + pow2(-30));
    }

    #[test]
    fn theorem_mass_is_additive(p in 0usize..3, a in 0i64..512, b in 0i64..512, c in 0i64..512) {
        let mut v = [a, b, c];
        v.sort();
        let mu = thirds(p);
        let eps = pow2(-40);
        let q = |x: i64, y: i64| cantor_doubling::construction::IntervalR::closed(rat(x, 512), rat(y, 512)).unwrap();
        let whole = mu.mass(&q(v[0], v[2]), &eps).unwrap();
        let parts = &mu.mass(&q(v[0], v[1]), &eps).unwrap() + &mu.mass(&q(v[1], v[2]), &eps).unwrap();
        // the shared endpoint carries no mass
        prop_assert!(whole.overlaps(&parts));
    }

    #[test]
    fn rungs_tile(r in small_rat(1, 100, 64), t in small_rat(1, 15, 16), k in 0u32..20) {
        let total: Rat = (0..k).map(|i| {
            let (lo, hi) = rung(&r, &t, i);
            prop_assert!(lo < hi);
            Ok(hi - lo)
        }).sum::<Result<Rat, TestCaseError>>()?;
        prop_assert_eq!(total + rung_tail(&r, &t, k), r);
    }

    #[test]
    fn middle_interval_nodes_tile(num in 1i64..15, lvl in 1u32..6) {
        let (c, _) = middle_interval(AlphaSeq::constant(rat(num, 16))).unwrap();
        for node in c.levels(lvl).unwrap().last().unwrap() {
            let (g0, g1) = c.gap(node).unwrap().unwrap();
            let kids = c.children(node).unwrap();
            prop_assert_eq!(kids.len(), 2);
            prop_assert_eq!(&kids[0].lo, &node.lo);
            prop_assert_eq!(&kids[0].hi, &g0);
            prop_assert_eq!(&kids[1].lo, &g1);
            prop_assert_eq!(&kids[1].hi, &node.hi);
            prop_assert_eq!(&g1 - &g0, rat(num, 16) * node.len());
        }
    }

    #[test]
    fn geometric_sums_are_exact(num in 1i64..8, n in 1u32..40) {
        let r = rat(num, 8);
        let s = lp_partial_sums(&AlphaSeq::geometric(rat(1, 1), r.clone()), &rat(1, 1), n).unwrap();
        let closed = &r * (Rat::one() - Pow::pow(&r, n)) / (Rat::one() - &r);
        prop_assert_eq!(s.exact, Some(closed));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn doubling_ratios_at_least_one(pn in 1i64..9, seed in 0u64..1000) {
        let o = PowerMeasure::new(&rat(pn, 4)).unwrap();
        let scales: Vec<Rat> = (2..7).map(|j| pow2(-j)).collect();
        let r = doubling_report(&o, &scales, 20, seed).unwrap();
        for row in &r.rows {
            prop_assert!(row.max_ratio.lower_rat() >= rat(1, 1));
            prop_assert!(row.max_ratio.upper_rat() < rat(1000, 1));
        }
    }

    #[test]
    fn mass_profile_nonincreasing(num in 1i64..8, pn in 1i64..9) {
        let (c, _) = middle_interval(AlphaSeq::constant(rat(num, 8))).unwrap();
        let mu = TMeasure::build(Arc::new(c), rat(pn, 4)).unwrap();
        let prof = cantor_mass_profile(&mu, 8).unwrap();
        prop_assert!(prof.mass(1).contains_rat(&rat(1, 1)));
        for n in 1..8 {
            prop_assert!(prof.mass(n + 1).lower_rat() <= prof.mass(n).upper_rat());
            prop_assert!(!prof.decrement(n).upper_rat().is_zero());
        }
        prop_assert!(mu.max_relative_defect() < pow2(-60));
    }
}
