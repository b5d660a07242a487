//! Run a CLI command from code and keep its report.

use cantor_doubling::cli::{run, Op, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/specs/middle_thirds.json");
    let cfg = RunConfig {
        op: Some(Op::Measure),
        spec: Some(spec.into()),
        p: Some("2".into()),
        depth: Some(4),
        scales: Some("2..5".into()),
        samples: Some(50),
        seed: Some(9),
        ..Default::default()
    };
    let out = run(&cfg)?;
    println!("{}", out.report["result"]["ratios"]["spread"]);
    for (name, csv) in &out.tables {
        println!("-- {name}: {} rows", csv.lines().count() - 1);
    }
    Ok(())
}
