//! Worked values checked against independently computed references.

use std::sync::Arc;

use num_traits::{One, Zero};

use cantor_doubling::analysis::{
    cantor_mass_profile, dim1_profile, lp_partial_sums, porosity_check, porosity_mass_test, ratio_report, Ball,
    BallPair, CantorSet, CoverLevel, Dim1Trend, GrowthTag, PorosityCover, Verdict3,
};
use cantor_doubling::construction::{
    check_nice, check_small_gaps, expand, gap_separation_exact, middle_interval, middle_thirds, AlphaSeq, IntervalR,
};
use cantor_doubling::measure::{Lebesgue, MassBounds, MeasureError, MeasureOracle};
use cantor_doubling::midpoint::{
    add_lebesgue, forward, inverse, lebesgue_on_c, make_mspace, midpoint_porosity_cover, rung,
};
use cantor_doubling::numerics::{pow2, pow_bounds, rat, rat_to_f64, Rat, Scalar};
use cantor_doubling::power_measure::PowerMeasure;
use cantor_doubling::theorem_measure::TMeasure;

fn unit() -> Lebesgue {
    Lebesgue { lo: rat(0, 1), hi: rat(1, 1) }
}

fn closed(a: Rat, b: Rat) -> IntervalR {
    IntervalR::closed(a, b).unwrap()
}

/// Newton on `x^2 = a` in exact rationals.
fn sqrt_newton(a: &Rat, steps: usize) -> Rat {
    let mut x = Rat::one();
    for _ in 0..steps {
        x = (&x + a / &x) / rat(2, 1);
    }
    x
}

#[test]
fn root_of_a_third() {
    let tol = Rat::new(1.into(), num_traits::pow(num_bigint::BigInt::from(10), 20));
    let s = pow_bounds(&rat(1, 3), &rat(1, 2), &tol).unwrap();
    let x = sqrt_newton(&rat(1, 3), 8);
    let slack = pow2(-120);
    assert!(s.width().to_rat() <= tol);
    assert!(s.lower_rat() <= &x + &slack && &x - &slack <= s.upper_rat());
    assert!((rat_to_f64(&x) - 0.5773502691896258).abs() < 1e-15);
}

#[test]
fn refined_sum_of_many_powers() {
    let parts: Vec<Scalar> = (1..=100).map(|k| pow_bounds(&rat(k, 101), &rat(1, 2), &pow2(-8)).unwrap()).collect();
    let tol = pow2(-90);
    let s = Scalar::sum_refinable(parts).refine(&tol).unwrap();
    assert!(s.width().to_rat() <= tol);
    let fine: Scalar = (1..=100).map(|k| pow_bounds(&rat(k, 101), &rat(1, 2), &pow2(-200)).unwrap()).sum();
    assert!(s.overlaps(&fine));
}

#[test]
fn middle_interval_lengths() {
    let (_, thirds) = middle_interval(AlphaSeq::constant(rat(1, 3))).unwrap();
    assert_eq!(thirds.length(2).unwrap(), rat(1, 3));
    assert_eq!(thirds.length(3).unwrap(), rat(1, 9));

    let (c, halves) = middle_interval(AlphaSeq::geometric(rat(1, 1), rat(1, 2))).unwrap();
    assert_eq!(halves.length(2).unwrap(), rat(1, 4));
    let level2 = &c.levels(2).unwrap()[1][0];
    let (a, b) = c.gap(level2).unwrap().unwrap();
    assert_eq!(b - a, rat(1, 16));
}

#[test]
fn expansion_profiles() {
    let p = expand(&middle_thirds(), 3).unwrap();
    assert_eq!(p.counts[2], 4);
    assert_eq!(p.max_lengths[2], rat(1, 9));

    // 1/(n+1): ℓ_k = 2^{1-k} ∏_{n<k} n/(n+1) = 2^{1-k}/k
    let (c, _) = middle_interval(AlphaSeq::Harmonic { shift: 1 }).unwrap();
    let p = expand(&c, 10).unwrap();
    for k in 1..=10i64 {
        assert_eq!(p.max_lengths[k as usize - 1], pow2(1 - k) / rat(k, 1));
    }
    assert!(p.max_lengths.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn separation_and_small_gaps() {
    let thirds = middle_thirds();
    assert_eq!(gap_separation_exact(&thirds, 2).unwrap(), rat(1, 1));
    let nice = check_nice(&thirds, 6).unwrap();
    assert!(nice.contains_rat(&rat(0, 1)));
    assert!(!check_small_gaps(&thirds, &nice, 6).unwrap().holds);

    let (quarter, _) = middle_interval(AlphaSeq::constant(rat(1, 4))).unwrap();
    let nice = check_nice(&quarter, 6).unwrap();
    assert!(check_small_gaps(&quarter, &nice, 6).unwrap().holds);

    let (fat, _) = middle_interval(AlphaSeq::geometric(rat(1, 2), rat(1, 2))).unwrap();
    let nice = check_nice(&fat, 8).unwrap();
    assert!(check_small_gaps(&fat, &nice, 8).unwrap().holds);
    // with c = 0 the separation is at least 1/6
    assert!(gap_separation_exact(&fat, 8).unwrap() >= rat(1, 6));
}

#[test]
fn power_measure_values() {
    let one = PowerMeasure::new(&rat(1, 1)).unwrap();
    assert_eq!(one.m(), 2);
    assert!(one.cdf(&rat(1, 4)).unwrap().contains_rat(&rat(1, 4)));
    assert!(one.mass_between(&rat(1, 5), &rat(7, 10)).unwrap().contains_rat(&rat(1, 2)));

    let two = PowerMeasure::new(&rat(2, 1)).unwrap();
    assert_eq!(two.m(), 2);
    assert_eq!(two.cdf(&rat(1, 4)).unwrap().lower_rat(), rat(1, 16));
    assert_eq!(two.cdf(&rat(1, 16)).unwrap().lower_rat(), rat(1, 256));
    assert!(two.cdf(&rat(1, 2)).unwrap().contains_rat(&rat(1, 2)));
    // the middle block [1/4, 3/4] is uniform with mass 7/8
    assert!(two.cdf(&rat(3, 8)).unwrap().contains_rat(&(rat(1, 16) + rat(7, 8) * rat(1, 4))));
    assert!(two.mass_between(&rat(0, 1), &rat(1, 1)).unwrap().contains_rat(&rat(1, 1)));
    assert!(two.mass_between(&rat(1, 16), &rat(1, 4)).unwrap().contains_rat(&(rat(1, 16) - rat(1, 256))));

    let half = PowerMeasure::new(&rat(1, 2)).unwrap();
    assert_eq!(half.m(), 3);
    let v = half.cdf(&rat(1, 8)).unwrap();
    assert!((v.to_f64() - 2f64.powf(-1.5)).abs() < 1e-15);
}

#[test]
fn scaled_power_pieces() {
    let one = Arc::new(PowerMeasure::new(&rat(1, 1)).unwrap());
    let g = one.scaled_onto(rat(1, 3), rat(2, 3), Scalar::from_rat(&rat(1, 2)));
    assert!(g.mass(&closed(rat(1, 3), rat(1, 2)), &pow2(-40)).unwrap().contains_rat(&rat(1, 4)));

    let two = Arc::new(PowerMeasure::new(&rat(2, 1)).unwrap());
    let g = two.scaled_onto(rat(0, 1), rat(1, 2), Scalar::one());
    assert!(g.mass(&closed(rat(0, 1), rat(1, 8)), &pow2(-40)).unwrap().contains_rat(&rat(1, 16)));
}

#[test]
fn theorem_measure_on_thirds() {
    let mu = TMeasure::build(Arc::new(middle_thirds()), rat(1, 1)).unwrap();
    let eps = pow2(-60);
    assert!(mu.measure_of(&closed(rat(0, 1), rat(1, 1)), &eps).unwrap().contains_rat(&rat(1, 1)));
    assert!(mu.cdf(&rat(0, 1), &eps).unwrap().contains_rat(&rat(0, 1)));
    // p = 1 on the middle-thirds set gives back Lebesgue measure
    for (a, b) in [(1, 7), (2, 9), (1, 2), (5, 6)] {
        let t = rat(a, b);
        assert!(mu.cdf(&t, &eps).unwrap().contains_rat(&t), "{t}");
    }
    let rep = ratio_report(&mu, 5).unwrap();
    assert!(rep.rows.iter().all(|r| r.ratio.certainly_positive()));
    assert!(rep.min.contains_rat(&rat(1, 1)) && rep.max.contains_rat(&rat(1, 1)));
    let prof = cantor_mass_profile(&mu, 6).unwrap();
    for n in 1..=6i64 {
        assert!(prof.mass(n as u32).contains_rat(&num_traits::pow(rat(2, 3), n as usize - 1)));
    }
}

#[test]
fn partial_sums_closed_forms() {
    let s = lp_partial_sums(&AlphaSeq::constant(rat(1, 3)), &rat(1, 1), 30).unwrap();
    assert_eq!(s.exact, Some(rat(10, 1)));
    assert_eq!(s.growth, GrowthTag::LinearGrowth);

    let s = lp_partial_sums(&AlphaSeq::geometric(rat(1, 1), rat(1, 2)), &rat(1, 1), 20).unwrap();
    assert_eq!(s.exact, Some(rat(1, 1) - pow2(-20)));
    assert_eq!(s.growth, GrowthTag::BoundedLooking);
}

#[test]
fn harmonic_root_sum() {
    let n = 10_000u32;
    let s = lp_partial_sums(&AlphaSeq::Harmonic { shift: 1 }, &rat(1, 2), n).unwrap();
    let last = s.partial.last().unwrap();
    // compensated summation, smallest terms first
    let (mut sum, mut carry) = (0f64, 0f64);
    for k in (2..=n as u64 + 1).rev() {
        let y = 1.0 / (k as f64).sqrt() - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    assert!((last.to_f64() - sum).abs() < 1e-9, "{} vs {sum}", last.to_f64());
    assert!(last.width().to_rat() < pow2(-60));
    assert!(s.exact.is_none());
    assert_eq!(s.growth, GrowthTag::LinearGrowth);
    let rough = 2.0 * ((n as f64 + 2.0).sqrt() - 2f64.sqrt());
    assert!((sum - rough).abs() < 1.0);
}

#[test]
fn dimension_one_profiles() {
    let halves = dim1_profile(&AlphaSeq::constant(rat(1, 2)), 12).unwrap();
    assert!(halves.values.iter().all(|v| v.contains_rat(&rat(-1, 1))));
    assert_eq!(halves.trend, Dim1Trend::Steady);

    let third = dim1_profile(&AlphaSeq::constant(rat(1, 3)), 1).unwrap();
    assert!((third.values[0].to_f64() - (2f64 / 3.0).log2()).abs() < 1e-14);

    let fast = dim1_profile(&AlphaSeq::geometric(rat(1, 1), rat(1, 2)), 64).unwrap();
    assert_eq!(fast.trend, Dim1Trend::TowardZero);
    // the product converges to about 0.2888, so n·v_n stays bounded
    let last = fast.values.last().unwrap().to_f64();
    assert!((last * 64.0 - 0.288788f64.log2()).abs() < 1e-4);
}

struct Nothing;

impl MeasureOracle for Nothing {
    fn support(&self) -> (Rat, Rat) {
        (rat(0, 1), rat(1, 1))
    }

    fn mass(&self, _: &IntervalR, _: &Rat) -> Result<MassBounds, MeasureError> {
        Ok(Scalar::zero())
    }
}

#[test]
fn porosity_mass_tables() {
    let m = make_mspace(Arc::new(middle_thirds())).unwrap();
    let cover = midpoint_porosity_cover(&m, &AlphaSeq::constant(rat(1, 3)), 6).unwrap();
    let zero = porosity_mass_test(&Nothing, &cover, &rat(1, 1), &rat(1, 100), &pow2(-40)).unwrap();
    assert!(zero.iter().all(|r| r.flagged));

    let rows = porosity_mass_test(&unit(), &cover, &rat(1, 1), &rat(1, 100), &pow2(-40)).unwrap();
    let mut total = Scalar::zero();
    for r in &rows {
        // 2^{n-1} gaps of length (1/3)·3^{1-n}
        let removed = num_traits::pow(rat(2, 3), r.n as usize - 1) / rat(3, 1);
        assert!(r.sum.contains_rat(&removed), "level {}", r.n);
        total = &total + &r.sum;
    }
    assert!(total.upper_rat() <= rat(1, 1));
}

#[test]
fn porosity_verdicts() {
    let c = middle_thirds();
    let set = CantorSet { c: &c, max_level: 30 };
    let pair = BallPair {
        ball: Ball { center: rat(1, 2), radius: rat(1, 2) },
        sub: Ball { center: rat(1, 2), radius: rat(1, 6) },
    };
    let twice = PorosityCover::new(vec![CoverLevel { n: 1, alpha: rat(1, 3), pairs: vec![pair.clone(), pair.clone()] }])
        .unwrap();
    let v = porosity_check(&twice, &set, 1).unwrap();
    assert_eq!(v.p1, Verdict3::Pass);
    assert_eq!(v.p2, Verdict3::Fail);
    assert_eq!(v.max_overlap, 2);

    let mut bad = pair.clone();
    bad.sub.radius = rat(1, 5);
    assert!(matches!(
        PorosityCover::new(vec![CoverLevel { n: 1, alpha: rat(1, 3), pairs: vec![bad] }]),
        Err(MeasureError::Invariant(_))
    ));

    // a sub-ball reaching into the set is a P1 failure
    let mut hits = pair;
    hits.sub.center = rat(1, 3);
    let cover = PorosityCover::new(vec![CoverLevel { n: 1, alpha: rat(1, 3), pairs: vec![hits] }]).unwrap();
    assert_eq!(porosity_check(&cover, &set, 1).unwrap().p1, Verdict3::Fail);
}

#[test]
fn midpoint_cover_geometry() {
    let m = make_mspace(Arc::new(middle_thirds())).unwrap();
    let cover = midpoint_porosity_cover(&m, &AlphaSeq::constant(rat(1, 3)), 3).unwrap();
    assert_eq!(cover.len(), 7);
    for (lv, atoms) in cover.levels().iter().zip([1usize, 2, 4]) {
        assert_eq!(lv.pairs.len(), atoms);
        for bp in &lv.pairs {
            // B' is the gap itself
            let gap = num_traits::pow(rat(1, 3), lv.n as usize);
            assert_eq!(&bp.sub.radius * rat(2, 1), gap);
        }
    }
}

#[test]
fn forward_lebesgue_on_fat_set() {
    let seq = AlphaSeq::geometric(rat(1, 2), rat(1, 2));
    let (c, _) = middle_interval(seq).unwrap();
    let m = Arc::new(make_mspace(Arc::new(c)).unwrap());
    let nu = forward(Arc::new(unit()), m.clone()).unwrap();
    let eps = pow2(-50);
    let first = &m.atoms(1).unwrap()[0];
    assert_eq!(first.x, rat(1, 2));
    assert!(nu.atom_mass(first, &eps).unwrap().contains_rat(&rat(1, 4)));
    assert!(nu.total(&eps).unwrap().contains_rat(&rat(1, 1)));
    // ball of radius 1 at 0 holds everything except the point 1
    let b = nu.ball_mass(&rat(0, 1), &rat(1, 1), &eps).unwrap();
    assert!(b.contains_rat(&rat(1, 1)));
}

#[test]
fn ladder_at_half() {
    let r = rat(1, 6);
    assert_eq!(rung(&r, &rat(1, 2), 0), (rat(0, 1), rat(1, 12)));
    assert_eq!(rung(&r, &rat(1, 2), 1), (rat(1, 12), rat(1, 8)));
}

#[test]
fn inverse_copies_c_intervals() {
    let (c, _) = middle_interval(AlphaSeq::geometric(rat(1, 2), rat(1, 2))).unwrap();
    let c = Arc::new(c);
    let m = Arc::new(make_mspace(c.clone()).unwrap());
    let nu = Arc::new(forward(Arc::new(unit()), m).unwrap());
    let inv = inverse(nu.clone(), None, 6).unwrap();
    let eps = pow2(-50);
    for level in c.levels(4).unwrap() {
        for node in level {
            let (x, y) = (inv.mass(&node.interval(), &eps).unwrap(), nu.mass(&node.interval(), &eps).unwrap());
            assert!(x.overlaps(&y));
        }
    }
}

#[test]
fn adding_lebesgue() {
    let sum = add_lebesgue(Nothing, unit()).unwrap();
    let q = closed(rat(1, 5), rat(3, 5));
    assert!(sum.mass(&q, &pow2(-40)).unwrap().contains_rat(&rat(2, 5)));
    let both = add_lebesgue(unit(), unit()).unwrap();
    assert!(both.total(&pow2(-40)).unwrap().contains_rat(&rat(2, 1)));
}

#[test]
fn lebesgue_of_cantor_sets() {
    // 𝓛(C_n) = ∏_{k<n} (1 - α_k) once every gap up to level n-1 is removed
    let seq = AlphaSeq::geometric(rat(1, 2), rat(1, 2));
    let (c, _) = middle_interval(seq.clone()).unwrap();
    let all = lebesgue_on_c(&c, &seq, &closed(rat(0, 1), rat(1, 1)), 40).unwrap();
    let product: f64 = (1..400).map(|n| 1.0 - 0.5f64.powi(n + 1)).product();
    assert!(all.lower_certified);
    assert!(rat_to_f64(&all.bounds.lower_rat()) <= product && product <= rat_to_f64(&all.bounds.upper_rat()));
    let gap = lebesgue_on_c(&c, &seq, &IntervalR::open(rat(3, 8), rat(5, 8)).unwrap(), 40).unwrap();
    assert!(gap.bounds.upper_rat().is_zero());

    let thirds = AlphaSeq::constant(rat(1, 3));
    let mt = middle_thirds();
    let tiny = lebesgue_on_c(&mt, &thirds, &closed(rat(0, 1), rat(1, 1)), 30).unwrap();
    assert!(tiny.bounds.upper_rat() <= num_traits::pow(rat(2, 3), 30) + pow2(-100));
}
