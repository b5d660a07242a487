//! Experiment driver behind the `cantor` binary: flags and config files,
//! one runner per operation, JSON reports and CSV tables.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{
    cantor_mass_profile, dim1_profile, doubling_report, lp_partial_sums, porosity_check, ratio_report, CantorSet,
    DoublingReport,
};
use crate::construction::{
    check_nice, check_porous, check_regular, check_small_gaps, check_thick, embed_porous, expand, gap_separation_exact,
    materialize, AlphaSeq, Built, ConstructionError, ConstructionSpec, FiniteSet, IntervalR,
};
use crate::measure::{Lebesgue, MeasureError, MeasureOracle};
use crate::midpoint::{atom_table, forward, inverse, lebesgue_on_c, m_doubling_report, make_mspace, midpoint_porosity_cover};
use crate::numerics::{format_rat, parse_rat, pow2, rat, NumericsError, Rat, Round, Scalar};
use crate::theorem_measure::{TMeasure, TMeasureConfig};

pub const SCHEMA_VERSION: u32 = 1;

const DIGITS: usize = 45;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) | CliError::Argument(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Invariant(_) => 5,
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::Parse(_) => CliError::Parse(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        use ConstructionError as E;
        let s = e.to_string();
        match e {
            E::Parse(m) => CliError::Parse(m),
            E::InvalidInterval(_) | E::InvalidSequence(_) => CliError::Parse(s),
            E::NotApplicable(m) | E::Precondition(m) => CliError::Precondition(m),
            E::Embedding { .. } => CliError::Precondition(s),
            E::Structure { .. } => CliError::Invariant(s),
            E::Budget(m) => CliError::Budget(m),
            E::Numerics(n) => n.into(),
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Precondition(m) => CliError::Precondition(m),
            MeasureError::Argument(m) => CliError::Argument(m),
            MeasureError::Budget { reason, .. } => CliError::Budget(reason),
            MeasureError::Invariant(m) => CliError::Invariant(m),
            MeasureError::Construction(c) => c.into(),
            MeasureError::Numerics(n) => n.into(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Op {
    Set,
    Measure,
    Classify,
    Midpoint,
    Embed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Report,
    Csv,
}

/// Flags; a JSON config file with the same keys fills in what is not given.
#[derive(Clone, Debug, Default, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "cantor", version, about = "Doubling measures on Cantor sets: construct, measure, classify")]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Construction spec (JSON)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub op: Option<Op>,
    /// Exponent, e.g. 1/2
    #[arg(long)]
    pub p: Option<String>,
    /// Boundary-gap window (theorem measure)
    #[arg(long)]
    pub eta: Option<String>,
    /// Whitney ratio for the inverse transfer
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// `j0..j1` for radii 2^-j, or a comma list of rationals
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps: Option<String>,
    /// Points of the set to embed, comma separated
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long)]
    pub blocks: Option<u32>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! fill {
    ($a:ident, $b:ident, $($f:ident),*) => { $( if $a.$f.is_none() { $a.$f = $b.$f.clone(); } )* };
}

impl RunConfig {
    /// Fills unset fields from the config file named by `--config`.
    pub fn resolve(mut self) -> Result<RunConfig, CliError> {
        let Some(path) = self.config.clone() else { return Ok(self) };
        let text = std::fs::read_to_string(&path)?;
        let file: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        fill!(self, file, spec, op, p, eta, t, depth, scales, samples, seed, eps, points, blocks, format);
        Ok(self)
    }

    fn rat(&self, name: &str, v: &Option<String>) -> Result<Option<Rat>, CliError> {
        v.as_deref().map(|s| parse_rat(s).map_err(|_| CliError::Parse(format!("--{name}: `{s}` is not a rational")))).transpose()
    }

    fn scales(&self, default: (i64, i64)) -> Result<Vec<Rat>, CliError> {
        let Some(s) = &self.scales else { return Ok((default.0..=default.1).map(|j| pow2(-j)).collect()) };
        if let Some((a, b)) = s.split_once("..") {
            let parse = |x: &str| x.trim().parse::<i64>().map_err(|_| CliError::Parse(format!("--scales: `{s}`")));
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(CliError::Argument(format!("--scales: empty range `{s}`")));
            }
            return Ok((a..=b).map(|j| pow2(-j)).collect());
        }
        s.split(',')
            .map(|x| {
                let r = parse_rat(x).map_err(|_| CliError::Parse(format!("--scales: `{x}`")))?;
                if r.is_positive() {
                    Ok(r)
                } else {
                    Err(CliError::Argument(format!("--scales: `{x}` is not positive")))
                }
            })
            .collect()
    }
}

/// A report and its tables, ready to write.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub report: Value,
    /// `(name, csv)`, the first one being the main table.
    pub tables: Vec<(String, String)>,
}

impl Output {
    pub fn report_text(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("json values serialize") + "\n"
    }

    /// Writes to `out` (or stdout): the JSON report, or the main table with
    /// the other tables next to it as `<out>.<name>.csv`.
    pub fn write(&self, out: Option<&Path>, format: Format) -> Result<(), CliError> {
        match (out, format) {
            (None, Format::Report) => print!("{}", self.report_text()),
            (None, Format::Csv) => print!("{}", self.tables.first().map(|t| t.1.as_str()).unwrap_or("")),
            (Some(p), Format::Report) => std::fs::write(p, self.report_text())?,
            (Some(p), Format::Csv) => {
                for (i, (name, body)) in self.tables.iter().enumerate() {
                    let path = if i == 0 { p.to_path_buf() } else { PathBuf::from(format!("{}.{name}.csv", p.display())) };
                    std::fs::write(path, body)?;
                }
            }
        }
        Ok(())
    }
}

fn lower(s: &Scalar) -> String {
    s.lower().to_decimal(DIGITS, Round::Down)
}

fn upper(s: &Scalar) -> String {
    s.upper().to_decimal(DIGITS, Round::Up)
}

fn table<R: AsRef<[String]>>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?)
        .map_err(|e| CliError::Invariant(e.to_string()))
}

/// `scale,samples,max_ratio_lower,max_ratio_upper`
pub fn doubling_csv(r: &DoublingReport) -> Result<String, CliError> {
    table(
        &["scale", "samples", "max_ratio_lower", "max_ratio_upper"],
        r.rows.iter().map(|row| vec![format_rat(&row.scale), row.samples.to_string(), lower(&row.max_ratio), upper(&row.max_ratio)]),
    )
}

/// `t,lower,upper`
pub fn cdf_csv(samples: &[(Rat, Scalar)]) -> Result<String, CliError> {
    table(&["t", "lower", "upper"], samples.iter().map(|(t, m)| vec![format_rat(t), lower(m), upper(m)]))
}

fn load_spec(cfg: &RunConfig) -> Result<(ConstructionSpec, Built), CliError> {
    let path = cfg.spec.as_ref().ok_or_else(|| CliError::Argument("--spec is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let spec = ConstructionSpec::from_json(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let built = spec.build()?;
    Ok((spec, built))
}

fn declared(b: &Built) -> Result<&AlphaSeq, CliError> {
    b.declared.as_ref().ok_or_else(|| CliError::Argument("the spec declares no sequence".into()))
}

fn effective(cfg: &RunConfig, extra: Value) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(cfg)?;
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    Ok(v)
}

fn envelope(op: Op, config: Value, result: Value) -> Value {
    json!({ "schema_version": SCHEMA_VERSION, "op": op, "config": config, "result": result })
}

/// Runs the selected operation.
pub fn run(cfg: &RunConfig) -> Result<Output, CliError> {
    match cfg.op.ok_or_else(|| CliError::Argument("--op is required".into()))? {
        Op::Set => cmd_set(cfg),
        Op::Measure => cmd_measure(cfg),
        Op::Classify => cmd_classify(cfg),
        Op::Midpoint => cmd_midpoint(cfg),
        Op::Embed => cmd_embed(cfg),
    }
}

/// Niceness, porosity against the declared sequence, separation and level profile.
pub fn cmd_set(cfg: &RunConfig) -> Result<Output, CliError> {
    let (_, b) = load_spec(cfg)?;
    let depth = cfg.depth.unwrap_or(8);
    let c = &b.construction;
    let profile = expand(c, depth)?;
    let nice = match check_nice(c, depth) {
        Ok(s) => Some(s),
        Err(ConstructionError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let small_gaps = nice.as_ref().map(|n| check_small_gaps(c, n, depth)).transpose()?;
    let separation = match gap_separation_exact(c, depth) {
        Ok(s) => Some(format_rat(&s)),
        Err(ConstructionError::NotApplicable(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let against = match &b.declared {
        Some(seq) => {
            let regular = match check_regular(c, seq, depth) {
                Ok((l, h)) => json!([format_rat(&l), format_rat(&h)]),
                Err(ConstructionError::NotApplicable(_)) => Value::Null,
                Err(e) => return Err(e.into()),
            };
            json!({
                "porous": check_porous(c, seq, depth)?,
                "thick": check_thick(c, seq, depth)?,
                "regular": regular,
            })
        }
        None => Value::Null,
    };
    let result = json!({
        "depth": depth,
        "nice_constant": nice,
        "is_nice": nice.as_ref().map(|n| n.upper_rat() < Rat::one()),
        "small_gaps": small_gaps,
        "gap_separation": separation,
        "declared": against,
        "profile": profile,
    });
    let rows: Vec<Vec<String>> = profile
        .counts
        .iter()
        .zip(&profile.max_lengths)
        .enumerate()
        .map(|(i, (n, l))| vec![(i + 1).to_string(), n.to_string(), format_rat(l)])
        .collect();
    let config = effective(cfg, json!({ "depth": depth }))?;
    Ok(Output { report: envelope(Op::Set, config, result), tables: vec![("levels".into(), table(&["level", "count", "max_length"], rows)?)] })
}

fn build_measure(cfg: &RunConfig, b: Built) -> Result<TMeasure, CliError> {
    let p = cfg.rat("p", &cfg.p)?.ok_or_else(|| CliError::Argument("--p is required".into()))?;
    let eta = cfg.rat("eta", &cfg.eta)?;
    let tc = TMeasureConfig { eta, ..TMeasureConfig::default() };
    Ok(TMeasure::with_config(Arc::new(b.construction), p, tc)?)
}

/// Builds the measure; CDF on a 101-point grid, ratio table to `--depth`,
/// and a doubling report when `--scales` is given.
pub fn cmd_measure(cfg: &RunConfig) -> Result<Output, CliError> {
    let (spec, b) = load_spec(cfg)?;
    let mu = build_measure(cfg, b)?;
    let eps = cfg.rat("eps", &cfg.eps)?.unwrap_or_else(|| pow2(-40));
    if !eps.is_positive() {
        return Err(CliError::Argument("--eps must be positive".into()));
    }
    let depth = cfg.depth.unwrap_or(6);
    let (a, bb) = mu.support();
    let grid: Vec<Rat> = (0..=100).map(|i| &a + (&bb - &a) * rat(i, 100)).collect();
    let cdf = mu.cdf_samples(&grid, &eps)?;
    let ratios = ratio_report(&mu, depth)?;
    let mut tables = vec![("cdf".to_string(), cdf_csv(&cdf)?)];
    let doubling = match &cfg.scales {
        Some(_) => {
            let r = doubling_report(&mu, &cfg.scales((2, 8))?, cfg.samples.unwrap_or(500), cfg.seed.unwrap_or(0))
                .map_err(|e| CliError::from(e.error))?;
            tables.push(("doubling".into(), doubling_csv(&r)?));
            Some(r)
        }
        None => None,
    };
    let cdf_json: Vec<Value> = cdf.iter().map(|(t, m)| json!({ "t": format_rat(t), "mass": m })).collect();
    let result = json!({
        "descriptor": mu.descriptor(serde_json::to_string(&spec)?),
        "ledger": mu.ledger(),
        "cdf": cdf_json,
        "ratios": { "depth": depth, "min": ratios.min, "max": ratios.max, "spread": ratios.spread, "rows": ratios.rows },
        "doubling": doubling,
    });
    let config = effective(
        cfg,
        json!({ "eta": format_rat(mu.eta()), "eps": format_rat(&eps), "depth": depth, "seed": cfg.seed.unwrap_or(0) }),
    )?;
    Ok(Output { report: envelope(Op::Measure, config, result), tables })
}

const P_GRID: [(i64, i64); 4] = [(1, 4), (1, 2), (1, 1), (2, 1)];

fn hypothesis(tag: crate::analysis::GrowthTag) -> &'static str {
    match tag {
        crate::analysis::GrowthTag::BoundedLooking => {
            "sums look bounded: if they converge and C is regular for this sequence, C has positive mass for every doubling measure"
        }
        crate::analysis::GrowthTag::LinearGrowth => {
            "sums keep growing: if they diverge and C is porous for this sequence, C is null for every doubling measure"
        }
    }
}

/// Partial sums over a grid of exponents, the dimension-one profile and
/// (for nice sets) a mass profile of the measure with exponent `--p`.
pub fn cmd_classify(cfg: &RunConfig) -> Result<Output, CliError> {
    let (_, b) = load_spec(cfg)?;
    let seq = declared(&b)?.clone();
    let n = cfg.samples.unwrap_or(1024) as u32;
    let grid: Vec<Rat> = match cfg.rat("p", &cfg.p)? {
        Some(p) => vec![p],
        None => P_GRID.iter().map(|&(a, b)| rat(a, b)).collect(),
    };
    let mut sums = Vec::new();
    let mut rows = Vec::new();
    for p in &grid {
        let s = lp_partial_sums(&seq, p, n)?;
        let mut k = 1usize;
        while k <= n as usize {
            let v = &s.partial[k - 1];
            rows.push(vec![format_rat(p), k.to_string(), lower(v), upper(v)]);
            k *= 2;
        }
        sums.push(json!({
            "p": format_rat(p),
            "final": s.partial.last(),
            "exact": s.exact.as_ref().map(format_rat),
            "increment_ratio": s.increment_ratio,
            "growth": s.growth,
            "hypothesis": hypothesis(s.growth),
        }));
    }
    let dim = dim1_profile(&seq, n)?;
    let depth = cfg.depth.unwrap_or(12);
    let profile = match check_nice(&b.construction, 4) {
        Ok(c) if c.upper_rat() < Rat::one() => {
            let p = grid.first().cloned().unwrap_or_else(Rat::one);
            let p = if cfg.p.is_some() { p } else { Rat::one() };
            let mu = TMeasure::build(Arc::new(b.construction), p.clone())?;
            let prof = cantor_mass_profile(&mu, depth)?;
            json!({ "p": format_rat(&p), "masses": prof.masses, "decrements": prof.decrements })
        }
        _ => Value::Null,
    };
    let result = json!({
        "n": n,
        "sums": sums,
        "dim1": { "last": dim.values.last(), "trend": dim.trend },
        "mass_profile": profile,
    });
    let config = effective(cfg, json!({ "samples": n, "depth": depth }))?;
    Ok(Output {
        report: envelope(Op::Classify, config, result),
        tables: vec![("sums".into(), table(&["p", "n", "lower", "upper"], rows)?)],
    })
}

/// Forward Lebesgue transfer, inverse roundtrip on gaps, the ball cover and
/// a doubling report on `M`.
pub fn cmd_midpoint(cfg: &RunConfig) -> Result<Output, CliError> {
    let (_, b) = load_spec(cfg)?;
    let seq = declared(&b)?.clone();
    let depth = cfg.depth.unwrap_or(8);
    let eps = cfg.rat("eps", &cfg.eps)?.unwrap_or_else(|| pow2(-50));
    let t = cfg.rat("t", &cfg.t)?;
    let c = Arc::new(b.construction);
    let small_gaps = match check_nice(&c, depth) {
        Ok(n) if n.upper_rat() < Rat::one() => Some(check_small_gaps(&c, &n, depth)?.holds),
        _ => None,
    };
    let m = Arc::new(make_mspace(c.clone())?);
    let (lo, hi) = m.hull();
    let nu = Arc::new(forward(Arc::new(Lebesgue { lo: lo.clone(), hi: hi.clone() }), m.clone())?);
    let inv = inverse(nu.clone(), t, depth)?;
    let atoms = atom_table(&nu, depth, &eps)?;
    let mut exact = 0usize;
    for row in &atoms {
        let back = inv.mass(&row.atom.gap(), &eps)?;
        if back.is_exact() && back == row.mass {
            exact += 1;
        }
    }
    let cover = midpoint_porosity_cover(&m, &seq, depth)?;
    let verdict = porosity_check(&cover, &CantorSet { c: &c, max_level: depth + 40 }, 1)?;
    let doubling = m_doubling_report(&nu, &cfg.scales((2, 8))?, cfg.samples.unwrap_or(100), cfg.seed.unwrap_or(0))
        .map_err(|e| CliError::from(e.error))?;
    let leb = lebesgue_on_c(&c, &seq, &IntervalR::closed(lo, hi)?, 40)?;
    let result = json!({
        "t": format_rat(inv.t()),
        "gap_separation": format_rat(inv.separation()),
        "small_gaps": small_gaps,
        "atoms": atoms.len(),
        "roundtrip_exact": exact,
        "lebesgue_of_c": leb,
        "cover": { "balls": cover.len(), "verdict": verdict },
        "doubling": doubling,
    });
    let rows: Vec<Vec<String>> = atoms
        .iter()
        .map(|r| vec![format_rat(&r.atom.lo), format_rat(&r.atom.hi), format_rat(&r.atom.x), lower(&r.mass), upper(&r.mass)])
        .collect();
    let config = effective(
        cfg,
        json!({ "t": format_rat(inv.t()), "depth": depth, "eps": format_rat(&eps), "seed": cfg.seed.unwrap_or(0) }),
    )?;
    Ok(Output {
        report: envelope(Op::Midpoint, config, result),
        tables: vec![
            ("atoms".into(), table(&["gap.lo", "gap.hi", "x_J", "mass_lower", "mass_upper"], rows)?),
            ("doubling".into(), doubling_csv(&doubling)?),
        ],
    })
}

/// Porous construction through the given points with its certificate; the
/// construction is written out to `--depth` levels.
pub fn cmd_embed(cfg: &RunConfig) -> Result<Output, CliError> {
    let p = cfg.rat("p", &cfg.p)?.ok_or_else(|| CliError::Argument("--p is required".into()))?;
    if !p.is_positive() || p >= Rat::one() {
        return Err(CliError::Argument(format!("--p must lie in (0, 1), got {}", format_rat(&p))));
    }
    let pts = cfg.points.as_deref().ok_or_else(|| CliError::Argument("--points is required".into()))?;
    let points = pts
        .split(',')
        .map(|s| parse_rat(s).map_err(|_| CliError::Parse(format!("--points: `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let blocks = cfg.blocks.unwrap_or(3);
    let (c, seq, cert) = embed_porous(Arc::new(FiniteSet::points(points)), &p, blocks)?;
    let depth = cfg.depth.unwrap_or(8);
    let spec = materialize(&c, depth, Some(&seq))?;
    let rows: Vec<Vec<String>> = cert
        .blocks
        .iter()
        .zip(&cert.cumulative)
        .enumerate()
        .map(|(i, (b, cum))| vec![(i + 1).to_string(), b.levels.to_string(), format_rat(&b.alpha), lower(&b.sum), upper(&b.sum), lower(cum)])
        .collect();
    let result = json!({ "certificate": cert, "construction": spec });
    let config = effective(cfg, json!({ "blocks": blocks, "depth": depth }))?;
    Ok(Output {
        report: envelope(Op::Embed, config, result),
        tables: vec![("blocks".into(), table(&["block", "levels", "alpha", "sum_lower", "sum_upper", "cumulative_lower"], rows)?)],
    })
}

/// The construction part of an `embed` report, as a spec file.
pub fn embedded_spec(report: &Value) -> Result<ConstructionSpec, CliError> {
    Ok(serde_json::from_value(report["result"]["construction"].clone())?)
}
