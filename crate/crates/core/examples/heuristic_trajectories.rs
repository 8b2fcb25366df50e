//! Fixed heuristic trajectories against the optimized one.
//!
//! `cargo run --release --example heuristic_trajectories -- [model_size_Mb]`

use ecofl::eco::{heuristic_path, heuristic_trajectory, run_eco, TrajectoryKind};
use ecofl::scenario::{fly_times, ScenarioConfig};

fn main() -> ecofl::Result<()> {
    let q: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5.50014);
    let cfg = ScenarioConfig::default().with_model_size(q * 1e6);
    let eco = run_eco(&cfg, 0)?;
    let len = |p: &[ecofl::scenario::Point]| fly_times(p, 1.0).iter().sum::<f64>();
    println!("Q = {q} Mb");
    println!("{:>5} {:>10} {:>13} {:>10}", "kind", "length_m", "energy_J", "verdict");
    println!(
        "{:>5} {:>10.1} {:>13.3} {:>10}",
        "ECO",
        len(&eco.state.q),
        eco.energy(),
        eco.verdict.is_feasible()
    );
    for kind in TrajectoryKind::ALL {
        let path = heuristic_path(kind, &cfg);
        let r = heuristic_trajectory(kind, &cfg)?;
        println!(
            "{:>5} {:>10.1} {:>13.3} {:>10}",
            kind.name(),
            len(&path),
            r.energy(),
            r.verdict.is_feasible()
        );
    }
    Ok(())
}
