use clap::Parser;
use ecofl::harness::{parse_qsweep, run_experiment, ExperimentKind, ExperimentSpec};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run an energy-optimization experiment and write CSV artifacts.
///
/// Exit codes: 0 success, 1 failure, 2 infeasible result.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Scenario TOML (built-in defaults when omitted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// eco | baseline:{random,fixed} | trajectory:{CUR,STR,MID,ASY} | bound-validation | q-sweep
    #[arg(long, default_value = "eco")]
    experiment: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Comma-separated model sizes in Mb.
    #[arg(long)]
    qsweep: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = (|| {
        let kind: ExperimentKind = args.experiment.parse()?;
        let mut spec = ExperimentSpec::new(kind, args.out.clone());
        spec.config = args.config.clone();
        spec.seed = args.seed;
        spec.jobs = args.jobs;
        if let Some(q) = &args.qsweep {
            spec.qsweep = parse_qsweep(q)?;
        }
        Ok::<_, ecofl::EcoError>(spec)
    })();
    let outcome = spec.and_then(|s| run_experiment(&s));
    match outcome {
        Ok(o) => {
            for p in &o.points {
                let e = p.energy.map_or("-".into(), |e| format!("{e:.3}"));
                let v = match &p.verdict {
                    Ok(v) if v.is_feasible() => "feasible".to_string(),
                    Ok(_) => "infeasible".to_string(),
                    Err(_) => "failed".to_string(),
                };
                println!("{:>8} Mb {:>6} {:>14} J {v}", p.q_mb, p.scheme, e);
            }
            if !o.bound_checks.is_empty() {
                let held = o.bound_checks.iter().filter(|c| c.holds()).count();
                println!(
                    "bound held at every checkpoint for {held}/{} seeds",
                    o.bound_checks.len()
                );
            }
            if let Some(r) = &o.reason {
                eprintln!("{r}");
            }
            ExitCode::from(o.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
