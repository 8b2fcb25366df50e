//! Drives the batch harness from code: a small model-size sweep written to a
//! directory, then the summary read back.
//!
//! `cargo run --release --example experiment_harness -- [out_dir]`

use ecofl::harness::{run_experiment, ExperimentKind, ExperimentSpec};

fn main() -> ecofl::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "sweep_out".into());
    let mut spec = ExperimentSpec::new(ExperimentKind::QSweep, &out);
    spec.qsweep = vec![1.42496, 10.5133];
    spec.seed = 7;
    let outcome = run_experiment(&spec)?;
    println!("exit code {}", outcome.status.code());
    for p in &outcome.points {
        println!(
            "{:>8} Mb {:>6} {:>12} {}",
            p.q_mb,
            p.scheme,
            p.energy.map_or("-".into(), |e| format!("{e:.3}")),
            p.dir.display()
        );
    }
    println!(
        "{}",
        std::fs::read_to_string(std::path::Path::new(&out).join("sweep_summary.csv"))?
    );
    Ok(())
}
