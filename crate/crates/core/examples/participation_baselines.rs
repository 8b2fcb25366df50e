//! Optimized participation against random and full participation over a few
//! model sizes.

use ecofl::eco::{baseline_participation, run_eco, BaselineKind, RunReport};
use ecofl::scenario::ScenarioConfig;

fn cell(r: &ecofl::Result<RunReport>) -> String {
    match r {
        Ok(r) if r.verdict.is_feasible() => format!("{:.3}", r.energy()),
        Ok(r) => format!("{:.3}*", r.energy()),
        Err(e) => format!("error: {e}"),
    }
}

fn main() {
    println!("{:>8} {:>14} {:>14} {:>14}", "Q_Mb", "eco_J", "fixed_J", "random_J");
    for q in [8.065, 10.5133] {
        let cfg = ScenarioConfig::default().with_model_size(q * 1e6);
        let eco = run_eco(&cfg, 0);
        let fixed = baseline_participation(BaselineKind::Fixed, &cfg, 0);
        let random = baseline_participation(BaselineKind::Random, &cfg, 0);
        println!("{q:>8} {:>14} {:>14} {:>14}", cell(&eco), cell(&fixed), cell(&random));
    }
    println!("* infeasible: slack left on some rate or accuracy row");
}
