//! Full two-phase optimization on the default scenario.
//!
//! `cargo run --release --example eco_default -- [model_size_Mb]`

use ecofl::eco::{run_eco, Step};
use ecofl::scenario::ScenarioConfig;

fn main() -> ecofl::Result<()> {
    let mut cfg = ScenarioConfig::default();
    if let Some(q) = std::env::args().nth(1).and_then(|s| s.parse::<f64>().ok()) {
        cfg = cfg.with_model_size(q * 1e6);
    }
    let r = run_eco(&cfg, 0)?;
    println!(
        "{:>7} {:>4} {:>15} {:>13} {:>10} {:>5}",
        "step", "it", "objective_J", "energy_J", "slack", "cuts"
    );
    for t in &r.trace {
        println!(
            "{:>7} {:>4} {:>15.4} {:>13.4} {:>10.2e} {:>5}",
            t.step.name(),
            t.iteration,
            t.objective,
            t.energy,
            t.max_slack,
            t.cut_rounds
        );
    }
    let b = &r.breakdown;
    println!(
        "fly {:.1} J, hover {:.1} J, uplink {:.3} J, compute {:.1} J, broadcast {:.3} J, total {:.3} J",
        b.e_fly,
        b.e_hov,
        b.e_cm.iter().sum::<f64>(),
        b.e_cp.iter().sum::<f64>(),
        b.e_bc,
        b.e_total
    );
    let per_slot: Vec<usize> = (0..cfg.num_fl_slots())
        .map(|s| r.state.a.iter().filter(|row| row[s] > 0.5).count())
        .collect();
    println!("participants per slot: {per_slot:?}");
    println!(
        "accuracy {:.4} <= {}, verdict {:?}, worst audit slack {:.2e}, {} phase-1 and {} phase-2 iterations in {:.1} s",
        r.accuracy,
        cfg.eps_g,
        r.verdict,
        r.audit.worst(),
        r.phase_trace(Step::Phase1).count(),
        r.phase_trace(Step::Phase2).count(),
        r.wall_clock
    );
    Ok(())
}
