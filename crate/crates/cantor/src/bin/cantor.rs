use clap::Parser;

use cantor_doubling::cli::{run, RunConfig};

fn main() {
    let cfg = match RunConfig::parse().resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cantor: {e}");
            std::process::exit(e.exit_code());
        }
    };
    let res = run(&cfg).and_then(|out| out.write(cfg.out.as_deref(), cfg.format.unwrap_or_default()));
    if let Err(e) = res {
        eprintln!("cantor: {e}");
        std::process::exit(e.exit_code());
    }
}
