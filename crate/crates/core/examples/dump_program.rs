//! Writes the first relaxed subproblem of the default scenario in the
//! plain-text interchange format.
//!
//! `cargo run --release --example dump_program -- out.txt`

use ecofl::eco::initialize;
use ecofl::scenario::ScenarioConfig;
use ecofl::subproblem::{build_phase1, BuildOptions};

fn main() -> ecofl::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "program.txt".into());
    let cfg = ScenarioConfig::default();
    let prog = build_phase1(
        &initialize(&cfg)?,
        &cfg,
        &BuildOptions {
            soft: true,
            ..Default::default()
        },
    )?;
    std::fs::write(&path, prog.dump())?;
    println!(
        "{} variables, {} rows, {} cones -> {path}",
        prog.num_vars,
        prog.num_rows(),
        prog.cones.len()
    );
    let mut counts: Vec<_> = prog.cone_counts().into_iter().collect();
    counts.sort();
    for (kind, n) in counts {
        println!("  {kind:>6}: {n}");
    }
    for b in prog.blocks.iter().filter(|b| b.len > 1) {
        println!("  block {:>8} at {:>5}, {} entries", b.name, b.start, b.len);
    }
    Ok(())
}
