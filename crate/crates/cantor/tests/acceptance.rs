//! End-to-end checks, one line per criterion.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cantor_doubling::analysis::{
    cantor_mass_profile, doubling_report, max_overlap_brute, max_overlap_sweep, pair_centers, porosity_check,
    ratio_report, CantorSet, Verdict3,
};
use cantor_doubling::cli::{run, RunConfig};
use cantor_doubling::construction::{
    check_porous, embed_porous, middle_interval, middle_thirds, AlphaSeq, Construction, FiniteSet,
};
use cantor_doubling::measure::{Lebesgue, MeasureOracle};
use cantor_doubling::midpoint::{forward, inverse, make_mspace, midpoint_porosity_cover};
use cantor_doubling::numerics::{pow2, pow_prec, rat, Rat, Scalar};
use cantor_doubling::power_measure::PowerMeasure;
use cantor_doubling::theorem_measure::TMeasure;

const CDF_IDENTITY_TOL: i64 = -60;
const CDF_IDENTITY_BUDGET: Duration = Duration::from_secs(5);
const RATIO_GROWTH: (i64, i64) = (5, 4);
const RATIO_BUDGET: Duration = Duration::from_secs(120);
const DOUBLING_GROWTH: (i64, i64) = (3, 2);
const DOUBLING_SAMPLES: usize = 500;
const THIN_MIN_OVER_MEAN: (i64, i64) = (1, 2);
const FAT_DECAY: (i64, i64) = (3, 4);
const ROUNDTRIP_TOL: i64 = -40;
const CONSERVATION_TOL: i64 = -60;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ex(e: impl std::fmt::Debug) -> String {
    format!("{e:?}")
}

fn f(s: &Scalar) -> f64 {
    s.to_f64()
}

fn thirds() -> Arc<Construction> {
    Arc::new(middle_thirds())
}

fn measures() -> [Rat; 3] {
    [rat(1, 2), rat(1, 1), rat(2, 1)]
}

/// Every measure built along the way, for the conservation check.
#[derive(Default)]
struct Built(Vec<(String, Arc<TMeasure>)>);

impl Built {
    fn keep(&mut self, name: String, mu: TMeasure) -> Arc<TMeasure> {
        let mu = Arc::new(mu);
        self.0.push((name, mu.clone()));
        mu
    }
}

fn c1() -> Outcome {
    let start = Instant::now();
    let pm = PowerMeasure::new(&rat(1, 1)).map_err(ex)?;
    let mut worst = rat(0, 1);
    for k in 0..1000i64 {
        let t = rat(2 * k + 1, 2048);
        let v = pm.cdf(&t).map_err(ex)?;
        let d = (v.upper_rat() - &t).max(&t - v.lower_rat());
        worst = worst.max(d);
    }
    let took = start.elapsed();
    check(
        worst <= pow2(CDF_IDENTITY_TOL) && took < CDF_IDENTITY_BUDGET,
        format!("max distance {:.3e}, {took:?}", cantor_doubling::numerics::rat_to_f64(&worst)),
    )
}

fn c2() -> Outcome {
    for p in 1..=3i64 {
        let pm = PowerMeasure::new(&rat(p, 1)).map_err(ex)?;
        // smallest m >= 2 with m p > 1
        let m = 2i64;
        for k in 0..=10i64 {
            let t = pow2(-k * m);
            let v = pm.cdf(&t).map_err(ex)?;
            if !v.is_exact() || v.lower_rat() != pow2(-k * m * p) {
                return Err(format!("p = {p}, k = {k}: {v:?}"));
            }
        }
    }
    Ok("33 breakpoints exact".into())
}

fn c3() -> Outcome {
    let mut n = 0;
    for p in [rat(1, 2), rat(2, 1)] {
        let pm = PowerMeasure::new(&p).map_err(ex)?;
        let m = pm.m() as i64;
        let top = pow2(-m);
        let mut ts: Vec<Rat> = (1..=(1i64 << (14 - m))).map(|k| rat(k, 1 << 14)).collect();
        ts.extend((m + 1..=80).map(|j| pow2(-j)));
        ts.extend((m + 1..=60).map(|j| pow2(-j) * rat(3, 2)).filter(|t| *t <= top));
        for t in ts {
            let v = pm.cdf(&t).map_err(ex)?;
            // 2^{-mp} t^p = (2^{-m} t)^p and 2^{mp} t^p = (2^m t)^p
            let lo = pow_prec(&(&t * pow2(-m)), &p, 160).map_err(ex)?;
            let hi = pow_prec(&(&t * pow2(m)), &p, 160).map_err(ex)?;
            if !(lo.upper_rat() <= v.lower_rat() && v.upper_rat() <= hi.lower_rat()) {
                return Err(format!("p = {p}, t = {t}"));
            }
            n += 1;
        }
    }
    Ok(format!("{n} dyadic points inside the envelope"))
}

fn c4(built: &mut Built) -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for p in measures() {
        let start = Instant::now();
        let mu = built.keep(format!("thirds p={p}"), TMeasure::build(thirds(), p.clone()).map_err(ex)?);
        let r6 = ratio_report(&mu, 6).map_err(ex)?.spread;
        let r10 = ratio_report(&mu, 10).map_err(ex)?.spread;
        let took = start.elapsed();
        let (a, b) = RATIO_GROWTH;
        ok &= r10.upper_rat() <= r6.lower_rat() * rat(a, b) && took < RATIO_BUDGET;
        out.push(format!("p={p}: R(6) {:.4} R(10) {:.4} {took:.1?}", f(&r6), f(&r10)));
    }
    check(ok, out.join("; "))
}

fn c5(built: &mut Built) -> Outcome {
    let scales: Vec<Rat> = (2..=12).map(|j| pow2(-j)).collect();
    let mut out = Vec::new();
    let mut ok = true;
    for p in measures() {
        let mu = built.keep(format!("thirds p={p} doubling"), TMeasure::build(thirds(), p.clone()).map_err(ex)?);
        let rep = doubling_report(mu.as_ref(), &scales, DOUBLING_SAMPLES, 5).map_err(|e| ex(e.error))?;
        let all = rep.global_max().ok_or("no rows")?;
        let early = rep.max_down_to(&pow2(-8)).ok_or("no rows")?;
        let (a, b) = DOUBLING_GROWTH;
        ok &= all.upper_rat() <= early.lower_rat() * rat(a, b);
        ok &= rep.rows.iter().all(|r| r.samples >= 10);
        out.push(format!("p={p}: max(j<=8) {:.3} max(j<=12) {:.3}", f(&early), f(&all)));
    }
    // the chains at both ends of the root are always among the centres
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = pow2(-9);
    let centres = pair_centers(&rat(0, 1), &rat(1, 1), &r, DOUBLING_SAMPLES, &[], &mut rng);
    let chains = (0..5).all(|j| {
        let d = &r * pow2(j);
        centres.contains(&d) && centres.contains(&(rat(1, 1) - &d))
    });
    out.push(format!("boundary chains sampled: {chains}"));
    check(ok && chains, out.join("; "))
}

fn c6(built: &mut Built) -> Outcome {
    let mut out = Vec::new();
    let mut ok = true;
    for p in measures() {
        let mu = built.keep(format!("thirds p={p} profile"), TMeasure::build(thirds(), p.clone()).map_err(ex)?);
        let prof = cantor_mass_profile(&mu, 16).map_err(ex)?;
        let rel: Vec<Scalar> = (1..=16).map(|n| prof.relative_decrement(n)).collect::<Result<_, _>>().map_err(ex)?;
        let min = rel.iter().map(|s| s.lower_rat()).min().ok_or("empty")?;
        let mean = rel.iter().map(|s| s.upper_rat()).sum::<Rat>() / rat(16, 1);
        let (a, b) = THIN_MIN_OVER_MEAN;
        let shrinks = prof.mass(16).upper_rat() < prof.mass(1).lower_rat();
        ok &= min >= &mean * rat(a, b) && shrinks;
        out.push(format!(
            "p={p}: min/mean {:.3}, mu(C16) {:.3e}",
            cantor_doubling::numerics::rat_to_f64(&(&min / &mean)),
            f(prof.mass(16))
        ));
    }
    check(ok, out.join("; "))
}

fn c7(built: &mut Built) -> Outcome {
    let (c, _) = middle_interval(AlphaSeq::geometric(rat(1, 1), rat(1, 4))).map_err(ex)?;
    let mu = built.keep("4^-n p=1/2".into(), TMeasure::build(Arc::new(c), rat(1, 2)).map_err(ex)?);
    let prof = cantor_mass_profile(&mu, 20).map_err(ex)?;
    let (a, b) = FAT_DECAY;
    let q = rat(a, b);
    let decays = (5..=19).all(|n| prof.decrement(n + 1).upper_rat() <= prof.decrement(n).lower_rat() * &q);
    // Σ_{n>=5} d_n, with the tail past 20 bounded by the geometric series
    let head: Rat = (5..=19).map(|n| prof.decrement(n).upper_rat()).sum();
    let tail = prof.decrement(20).upper_rat() / (rat(1, 1) - &q);
    let floor = prof.mass(5).lower_rat() - head - tail;
    let positive = floor > rat(0, 1) && prof.mass(20).lower_rat() >= floor;
    check(
        decays && positive,
        format!(
            "decay ok: {decays}; certified limit >= {:.6}, mu(C20) {:.6}",
            cantor_doubling::numerics::rat_to_f64(&floor),
            f(prof.mass(20))
        ),
    )
}

fn c8() -> Outcome {
    let (c, _) = middle_interval(AlphaSeq::geometric(rat(1, 2), rat(1, 2))).map_err(ex)?;
    let c = Arc::new(c);
    let m = Arc::new(make_mspace(c.clone()).map_err(ex)?);
    let nu = Arc::new(forward(Arc::new(Lebesgue { lo: rat(0, 1), hi: rat(1, 1) }), m.clone()).map_err(ex)?);
    let inv = inverse(nu.clone(), None, 8).map_err(ex)?;
    let eps = pow2(-50);
    let atoms = m.atoms(8).map_err(ex)?;
    for a in &atoms {
        let x = inv.mass(&a.gap(), &eps).map_err(ex)?;
        let y = nu.atom_mass(a, &eps).map_err(ex)?;
        if !(x.is_exact() && x == y) {
            return Err(format!("gap {:?}: {x:?} vs {y:?}", a.gap()));
        }
    }
    let levels = c.levels(10).map_err(ex)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = rat(0, 1);
    for _ in 0..100 {
        let level = &levels[rng.gen_range(0..levels.len())];
        let node = &level[rng.gen_range(0..level.len())];
        let q = node.interval();
        let x = inv.mass(&q, &eps).map_err(ex)?;
        let y = nu.mass(&q, &eps).map_err(ex)?;
        let d = x.upper_rat().max(y.upper_rat()) - x.lower_rat().min(y.lower_rat());
        worst = worst.max(d);
    }
    check(
        worst <= pow2(ROUNDTRIP_TOL),
        format!("{} gaps exact; worst interval spread {:.3e}", atoms.len(), cantor_doubling::numerics::rat_to_f64(&worst)),
    )
}

fn c9() -> Outcome {
    let c = thirds();
    let m = make_mspace(c.clone()).map_err(ex)?;
    let seq = AlphaSeq::constant(rat(1, 3));
    let cover = midpoint_porosity_cover(&m, &seq, 10).map_err(ex)?;
    let v = porosity_check(&cover, &CantorSet { c: &c, max_level: 50 }, 1).map_err(ex)?;
    for depth in 1..=6 {
        let small = midpoint_porosity_cover(&m, &seq, depth).map_err(ex)?;
        let (sweep, _) = max_overlap_sweep(&small);
        let brute = max_overlap_brute(&small);
        if sweep != brute {
            return Err(format!("depth {depth}: sweep {sweep}, brute {brute}"));
        }
    }
    check(
        v.p1 == Verdict3::Pass && v.p2 == Verdict3::Pass,
        format!("{} balls, P1 {:?}, P2 {:?}, max overlap {}", cover.len(), v.p1, v.p2, v.max_overlap),
    )
}

fn c10() -> Outcome {
    let half = rat(1, 2);
    let (c, seq, cert) = embed_porous(Arc::new(FiniteSet::points(vec![half.clone()])), &half, 3).map_err(ex)?;
    let first = cert.blocks.first().ok_or("no blocks")?;
    let first_ok = first.levels == 8 && first.alpha == pow2(-6) && first.sum.is_exact() && first.sum.lower_rat() == rat(1, 1);
    let total = cert.cumulative.last().ok_or("no blocks")?;
    let levels: u32 = cert.blocks.iter().map(|b| b.levels).sum();
    let porous = check_porous(&c, &seq, levels).map_err(ex)?;
    check(
        first_ok && total.lower_rat() >= rat(3, 1) && porous.holds && cert.avoids_set,
        format!(
            "M1 {} delta {} block sum {:.3}; cumulative {:.3}; porous to level {levels}: {}",
            first.levels,
            first.alpha,
            f(&first.sum),
            f(total),
            porous.holds
        ),
    )
}

fn c11(built: &Built) -> Outcome {
    let mut worst = rat(0, 1);
    let mut at = String::new();
    for (name, mu) in &built.0 {
        let d = mu.max_relative_defect();
        if d > worst {
            worst = d;
            at = name.clone();
        }
    }
    check(
        worst < pow2(CONSERVATION_TOL),
        format!("{} measures, worst defect {:.3e} ({at})", built.0.len(), cantor_doubling::numerics::rat_to_f64(&worst)),
    )
}

fn spec(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "specs", name].iter().collect();
    p.display().to_string()
}

fn c12() -> Outcome {
    let runs: Vec<Vec<String>> = vec![
        vec!["--op", "set", "--spec", &spec("harmonic.json")],
        vec!["--op", "measure", "--spec", &spec("middle_thirds.json"), "--p", "1/2", "--scales", "2..6", "--samples", "100", "--seed", "7"],
        vec!["--op", "classify", "--spec", &spec("quartering.json"), "--samples", "256"],
        vec!["--op", "midpoint", "--spec", &spec("fat_halving.json"), "--depth", "5", "--scales", "2..5", "--samples", "30", "--seed", "3"],
        vec!["--op", "embed", "--points", "1/2", "--p", "1/2"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in &runs {
        let cfg = RunConfig::parse_from(std::iter::once("cantor".to_string()).chain(args.iter().cloned()))
            .resolve()
            .map_err(ex)?;
        let render = || -> Result<String, String> {
            let out = run(&cfg).map_err(ex)?;
            let mut text = out.report_text();
            for (name, csv) in &out.tables {
                text.push_str(name);
                text.push_str(csv);
            }
            Ok(text)
        };
        if render()? != render()? {
            return Err(format!("{args:?} differs between runs"));
        }
    }
    Ok(format!("{} commands byte-identical", runs.len()))
}

fn main() {
    let mut built = Built::default();
    let results: Vec<(&str, Outcome)> = vec![
        ("cdf identity at p = 1", c1()),
        ("breakpoints exact", c2()),
        ("power envelope", c3()),
        ("gap ratio stabilization", c4(&mut built)),
        ("doubling stabilization", c5(&mut built)),
        ("thin: uniform decrements", c6(&mut built)),
        ("fat: geometric decrements", c7(&mut built)),
        ("midpoint roundtrip", c8()),
        ("midpoint cover", c9()),
        ("porous embedding", c10()),
        ("conservation", c11(&built)),
        ("determinism", c12()),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1)
            }
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
