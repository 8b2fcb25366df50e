//! Federated SGD on synthetic quadratics against the convergence bound.
//!
//! `cargo run --release --example federated_sgd_validation -- [seeds]`

use ecofl::flbound::{gap_bound, ParticipationPlan};
use ecofl::flsim::{estimate_constants, run_federated_sgd, validate_bound, SyntheticTask, TaskSpec};

fn main() -> ecofl::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let spec = TaskSpec::default();

    let task = SyntheticTask::generate(&spec, 0)?;
    let fl = estimate_constants(&task, 0);
    println!(
        "seed 0: eta {:.4} mu {:.3} L {:.3} eps_v2 {:.3} eps_s2 {:.3} eps_w {:.4} w0 {:.2}",
        fl.eta, fl.mu, fl.l_smooth, fl.eps_v2, fl.eps_s2, fl.eps_w, fl.w0_gap
    );
    let plan = ParticipationPlan::uniform(task.num_ues(), 40, 1.0);
    let tr = run_federated_sgd(&task, &plan, 5, fl.eta, 200, 0, 20)?;
    println!("{:>7} {:>12} {:>12}", "update", "mean_gap", "bound");
    for i in (0..=200).step_by(25) {
        println!("{i:>7} {:>12.5} {:>12.5}", tr.mean_gap[i], gap_bound(&plan, &fl, 5, i)?);
    }
    println!("virtual-average recursion error {:.2e}", tr.max_virtual_error);

    let mut held = 0;
    for s in 0..seeds {
        let c = validate_bound(&spec, 5, 200, 20, s)?;
        held += c.holds() as usize;
    }
    println!("bound held at every aggregation for {held}/{seeds} seeds");
    Ok(())
}
