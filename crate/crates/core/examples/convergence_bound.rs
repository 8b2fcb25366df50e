//! Convergence bound of the default hyperparameters: closed form against the
//! per-update recursion, and the accuracy left side for a few participation
//! plans of the default mission.

use ecofl::flbound::{accuracy_lhs, gap_bound, gap_bound_recursive, AccuracyTerms, BoundConstants, ParticipationPlan};
use ecofl::scenario::ScenarioConfig;

fn main() -> ecofl::Result<()> {
    let cfg = ScenarioConfig::default();
    let fl = &cfg.fl;
    let i = cfg.local_iters;
    let c = BoundConstants::new(fl, i);
    println!("omega {:.6}  zeta {:.6}  A1 {:.6}", c.omega, c.zeta, c.a1);

    let m = cfg.num_fl_slots();
    let plan = ParticipationPlan::uniform(cfg.num_ues(), m, 1e6);
    println!("{:>7} {:>14} {:>14}", "update", "closed", "recursive");
    for upto in [0, 1, 5, 50, 100, 245] {
        println!(
            "{upto:>7} {:>14.8} {:>14.8}",
            gap_bound(&plan, fl, i, upto)?,
            gap_bound_recursive(&plan, fl, i, upto)?
        );
    }

    let terms = AccuracyTerms::for_scenario(&cfg);
    println!(
        "accuracy = {:.4} + {:.4} * weighted sum of share squares",
        terms.constant, terms.kappa
    );
    for active in [6usize, 4, 3, 2, 1] {
        let a: Vec<Vec<f64>> = (0..cfg.num_ues())
            .map(|k| vec![if k < active { 1.0 } else { 0.0 }; m])
            .collect();
        let plan = ParticipationPlan::restricted(a, &vec![1e6; cfg.num_ues()])?;
        let lhs = accuracy_lhs(&plan, fl, cfg.n_slots, i)?;
        println!(
            "{active} equal participants per slot -> {lhs:.4} (threshold {})",
            cfg.eps_g
        );
    }
    Ok(())
}
