//! Batch experiments: run a scheme (or a sweep of schemes and model sizes)
//! and write CSV artifacts.
//!
//! Files per run directory:
//!
//! * `run_report.csv`: one row per SCA iteration;
//! * `energy_breakdown.csv`: energy per component and UE;
//! * `trajectory.csv`: waypoints, leg flight times, hover times, broadcast powers;
//! * `participation.csv`: participation, effective data and uplink power per UE and slot;
//! * `provenance.csv`: key/value facts about the run (verdict, seed, timing);
//! * `gap_vs_bound.csv`: bound validation only.
//!
//! Sweeps write one subdirectory per point plus `sweep_summary.csv`.

use crate::eco::{
    baseline_participation_with, heuristic_trajectory_with, run_eco_with, BaselineKind, EcoOptions, RunReport,
    TrajectoryKind, Verdict,
};
use crate::error::{EcoError, Result};
use crate::flsim::{validate_bound, BoundCheck, TaskSpec};
use crate::scenario::{fly_times, DataAllocation, DecisionState, Point, ScenarioConfig, BITS_PER_MB};
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};

/// Model sizes (Mb) of the size sweep.
pub const DEFAULT_QSWEEP: [f64; 5] = [1.42496, 2.81557, 5.50014, 8.065, 10.5133];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Eco,
    Baseline(BaselineKind),
    Trajectory(TrajectoryKind),
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Eco,
        Scheme::Baseline(BaselineKind::Fixed),
        Scheme::Baseline(BaselineKind::Random),
        Scheme::Trajectory(TrajectoryKind::Cur),
        Scheme::Trajectory(TrajectoryKind::Str),
        Scheme::Trajectory(TrajectoryKind::Mid),
        Scheme::Trajectory(TrajectoryKind::Asy),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Eco => "eco",
            Scheme::Baseline(k) => k.name(),
            Scheme::Trajectory(k) => k.name(),
        }
    }

    pub fn run(self, cfg: &ScenarioConfig, seed: u64, opts: &EcoOptions) -> Result<RunReport> {
        match self {
            Scheme::Eco => run_eco_with(cfg, seed, opts),
            Scheme::Baseline(k) => baseline_participation_with(k, cfg, seed, opts),
            Scheme::Trajectory(k) => heuristic_trajectory_with(k, cfg, seed, opts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Single(Scheme),
    BoundValidation,
    QSweep,
}

impl std::str::FromStr for ExperimentKind {
    type Err = EcoError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || EcoError::Config(format!("unknown experiment kind `{s}`"));
        Ok(match s {
            "eco" => ExperimentKind::Single(Scheme::Eco),
            "bound-validation" => ExperimentKind::BoundValidation,
            "q-sweep" => ExperimentKind::QSweep,
            "baseline:random" => ExperimentKind::Single(Scheme::Baseline(BaselineKind::Random)),
            "baseline:fixed" => ExperimentKind::Single(Scheme::Baseline(BaselineKind::Fixed)),
            _ => {
                let t = s.strip_prefix("trajectory:").ok_or_else(bad)?;
                ExperimentKind::Single(Scheme::Trajectory(TrajectoryKind::parse(t).ok_or_else(bad)?))
            }
        })
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentKind::Single(Scheme::Eco) => write!(f, "eco"),
            ExperimentKind::Single(Scheme::Baseline(k)) => write!(f, "baseline:{}", k.name()),
            ExperimentKind::Single(Scheme::Trajectory(k)) => write!(f, "trajectory:{}", k.name()),
            ExperimentKind::BoundValidation => write!(f, "bound-validation"),
            ExperimentKind::QSweep => write!(f, "q-sweep"),
        }
    }
}

/// Bound-validation workload.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundValidationSpec {
    pub task: TaskSpec,
    pub local_iters: usize,
    pub updates: usize,
    pub repetitions: usize,
    pub seeds: usize,
}

impl Default for BoundValidationSpec {
    fn default() -> Self {
        Self {
            task: TaskSpec::default(),
            local_iters: 5,
            updates: 200,
            repetitions: 20,
            seeds: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Scenario TOML; the built-in defaults when `None`.
    pub config: Option<PathBuf>,
    pub kind: ExperimentKind,
    /// Model sizes (Mb). Empty runs the scenario's own size, except for
    /// `q-sweep`, which then uses [`DEFAULT_QSWEEP`].
    pub qsweep: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 picks the machine default.
    pub jobs: usize,
    pub options: EcoOptions,
    pub bound: BoundValidationSpec,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, out: impl Into<PathBuf>) -> Self {
        Self {
            config: None,
            kind,
            qsweep: Vec::new(),
            seed: 0,
            out: out.into(),
            jobs: 0,
            options: EcoOptions::default(),
            bound: BoundValidationSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(q) = self.qsweep.iter().find(|q| !(**q > 0.0) || !q.is_finite()) {
            return Err(EcoError::Config(format!("sweep value {q} must be positive")));
        }
        Ok(())
    }
}

/// Parses a comma-separated list of model sizes in Mb.
pub fn parse_qsweep(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| EcoError::Config(format!("bad sweep value `{t}`: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Failed,
    Infeasible,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failed => 1,
            ExitStatus::Infeasible => 2,
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub q_mb: f64,
    pub scheme: &'static str,
    pub dir: PathBuf,
    pub energy: Option<f64>,
    pub verdict: std::result::Result<Verdict, String>,
    pub max_slack: f64,
}

impl SweepPoint {
    pub fn feasible(&self) -> bool {
        matches!(self.verdict, Ok(Verdict::Feasible))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub status: ExitStatus,
    /// Reason line for nonzero statuses.
    pub reason: Option<String>,
    pub points: Vec<SweepPoint>,
    pub bound_checks: Vec<BoundCheck>,
}

fn csv_err(e: csv::Error) -> EcoError {
    EcoError::Csv(e)
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(dir.join(name)).map_err(csv_err)
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_run_report(dir: &Path, r: &RunReport) -> Result<()> {
    let mut w = writer(dir, "run_report.csv")?;
    w.write_record([
        "step",
        "iteration",
        "status",
        "objective_J",
        "energy_J",
        "max_slack",
        "r_prim",
        "r_dual",
        "gap_rel",
        "solver_iterations",
        "cut_rounds",
    ])
    .map_err(csv_err)?;
    for t in &r.trace {
        w.write_record([
            t.step.name().to_string(),
            t.iteration.to_string(),
            format!("{:?}", t.status),
            f(t.objective),
            f(t.energy),
            f(t.max_slack),
            f(t.r_prim),
            f(t.r_dual),
            f(t.gap),
            t.solver_iterations.to_string(),
            t.cut_rounds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_energy_breakdown(dir: &Path, r: &RunReport) -> Result<()> {
    let b = &r.breakdown;
    let mut w = writer(dir, "energy_breakdown.csv")?;
    w.write_record(["component", "ue", "energy_J"]).map_err(csv_err)?;
    let mut row = |c: &str, k: String, v: f64| w.write_record([c.to_string(), k, f(v)]).map_err(csv_err);
    row("fly", String::new(), b.e_fly)?;
    row("hover", String::new(), b.e_hov)?;
    for (k, v) in b.e_cm.iter().enumerate() {
        row("uplink", k.to_string(), *v)?;
    }
    for (k, v) in b.e_cp.iter().enumerate() {
        row("compute", k.to_string(), *v)?;
    }
    row("broadcast", String::new(), b.e_bc)?;
    row("total", String::new(), b.e_total)?;
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(dir: &Path, state: &DecisionState, cfg: &ScenarioConfig) -> Result<()> {
    let t_fly = fly_times(&state.q, cfg.uav_speed);
    let mut w = writer(dir, "trajectory.csv")?;
    w.write_record(["n", "x_m", "y_m", "t_fly_s", "t_hov_s", "p_uav_W"])
        .map_err(csv_err)?;
    for (n, q) in state.q.iter().enumerate() {
        let fly = if n == 0 { 0.0 } else { t_fly[n - 1] };
        let hov = if n >= 1 && n < cfg.n_slots {
            state.t_hov[n - 1]
        } else {
            0.0
        };
        let bc = if n >= 1 && n + 1 < cfg.n_slots {
            state.p_uav[n - 1]
        } else {
            0.0
        };
        w.write_record([n.to_string(), f(q.x), f(q.y), f(fly), f(hov), f(bc)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_participation(dir: &Path, state: &DecisionState) -> Result<()> {
    let mut w = writer(dir, "participation.csv")?;
    w.write_record(["k", "n", "a", "D_bits", "p_ue_W"]).map_err(csv_err)?;
    for k in 0..state.a.len() {
        for s in 0..state.a[k].len() {
            w.write_record([
                k.to_string(),
                (s + 1).to_string(),
                f(state.a[k][s]),
                f(state.effective_data(k, s)),
                f(state.p_ue[k][s]),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Key of the provenance row that varies between identical runs.
pub const TIMING_KEY: &str = "wall_clock_s";

fn write_provenance(dir: &Path, rows: &[(&str, String)]) -> Result<()> {
    let mut w = writer(dir, "provenance.csv")?;
    w.write_record(["key", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        w.write_record([*k, v.as_str()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn verdict_fields(v: &Verdict) -> (String, String) {
    match v {
        Verdict::Feasible => ("feasible".into(), String::new()),
        Verdict::Infeasible(r) => ("infeasible".into(), r.clone()),
    }
}

/// Writes every artifact of one run into `dir`.
pub fn write_run(dir: &Path, r: &RunReport, cfg: &ScenarioConfig, spec: &ExperimentSpec) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_run_report(dir, r)?;
    write_energy_breakdown(dir, r)?;
    write_trajectory(dir, &r.state, cfg)?;
    write_participation(dir, &r.state)?;
    let (verdict, reason) = verdict_fields(&r.verdict);
    write_provenance(
        dir,
        &[
            ("crate_version", env!("CARGO_PKG_VERSION").to_string()),
            ("experiment", spec.kind.to_string()),
            ("scheme", r.scheme.clone()),
            (
                "config",
                spec.config
                    .as_ref()
                    .map_or("built-in defaults".into(), |p| p.display().to_string()),
            ),
            ("seed", r.seed.to_string()),
            ("model_size_Mb", f(cfg.model_size / BITS_PER_MB)),
            ("verdict", verdict),
            ("reason", reason),
            ("energy_J", f(r.energy())),
            ("accuracy_lhs", f(r.accuracy)),
            ("max_slack", f(r.max_slack)),
            ("audit_worst", f(r.audit.worst())),
            ("sca_iterations", r.trace.len().to_string()),
            (TIMING_KEY, f(r.wall_clock)),
        ],
    )
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|e| EcoError::Config(format!("bad {what} value `{s}`: {e}")))
}

/// Rebuilds the final decision state from `trajectory.csv` and
/// `participation.csv`. Data is read back as effective per-slot data.
pub fn load_state(dir: &Path, cfg: &ScenarioConfig) -> Result<DecisionState> {
    let k_count = cfg.num_ues();
    let m = cfg.num_fl_slots();
    let mut q = Vec::new();
    let mut t_hov = vec![0.0; m];
    let mut p_uav = vec![0.0; cfg.num_bc_slots()];
    let mut rd = csv::Reader::from_path(dir.join("trajectory.csv")).map_err(csv_err)?;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let n: usize = parse_f64(&rec[0], "n")? as usize;
        q.push(Point::new(parse_f64(&rec[1], "x")?, parse_f64(&rec[2], "y")?));
        if n >= 1 && n <= m {
            t_hov[n - 1] = parse_f64(&rec[4], "t_hov")?;
        }
        if n >= 1 && n <= p_uav.len() {
            p_uav[n - 1] = parse_f64(&rec[5], "p_uav")?;
        }
    }
    let mut a = vec![vec![0.0; m]; k_count];
    let mut d = vec![vec![0.0; m]; k_count];
    let mut p = vec![vec![0.0; m]; k_count];
    let mut rd = csv::Reader::from_path(dir.join("participation.csv")).map_err(csv_err)?;
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let k = parse_f64(&rec[0], "k")? as usize;
        let s = parse_f64(&rec[1], "n")? as usize;
        if k >= k_count || s == 0 || s > m {
            return Err(EcoError::IndexOutOfRange {
                what: "participation row",
                index: k.max(s),
                lo: 0,
                hi: k_count.max(m),
            });
        }
        a[k][s - 1] = parse_f64(&rec[2], "a")?;
        d[k][s - 1] = parse_f64(&rec[3], "D")?;
        p[k][s - 1] = parse_f64(&rec[4], "p_ue")?;
    }
    let state = DecisionState {
        q,
        a,
        data: DataAllocation::Relaxed(d),
        p_ue: p,
        p_uav,
        t_hov,
    };
    state.check_dimensions(cfg)?;
    Ok(state)
}

fn write_gap_vs_bound(dir: &Path, checks: &[BoundCheck]) -> Result<()> {
    let mut w = writer(dir, "gap_vs_bound.csv")?;
    w.write_record(["seed", "update", "mean_gap", "bound", "holds"])
        .map_err(csv_err)?;
    for c in checks {
        for ((i, g), b) in c.updates.iter().zip(&c.gap).zip(&c.bound) {
            w.write_record([c.seed.to_string(), i.to_string(), f(*g), f(*b), (g <= b).to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EcoError::InvalidArgument(format!("worker pool: {e}")))
}

fn load_config(spec: &ExperimentSpec) -> Result<ScenarioConfig> {
    match &spec.config {
        Some(p) => ScenarioConfig::from_file(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn point_dir(q_mb: f64, scheme: Scheme) -> String {
    format!("q{q_mb}_{}", scheme.name())
}

/// Runs an experiment and writes its artifacts under `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let cfg = load_config(spec)?;
    fs::create_dir_all(&spec.out)
        .map_err(|e| EcoError::Config(format!("cannot create {}: {e}", spec.out.display())))?;
    let pool = pool(spec.jobs)?;
    match spec.kind {
        ExperimentKind::BoundValidation => pool.install(|| bound_validation(spec)),
        ExperimentKind::Single(s) => pool.install(|| sweep(spec, &cfg, &[s])),
        ExperimentKind::QSweep => pool.install(|| sweep(spec, &cfg, &Scheme::ALL)),
    }
}

fn bound_validation(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let b = &spec.bound;
    let checks = (0..b.seeds as u64)
        .into_par_iter()
        .map(|i| {
            validate_bound(
                &b.task,
                b.local_iters,
                b.updates,
                b.repetitions,
                spec.seed.wrapping_add(i),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    write_gap_vs_bound(&spec.out, &checks)?;
    let total: usize = checks.iter().map(|c| c.updates.len()).sum();
    let held: usize = checks.iter().map(BoundCheck::checkpoints_held).sum();
    let seeds_held = checks.iter().filter(|c| c.holds()).count();
    let frac = held as f64 / total.max(1) as f64;
    write_provenance(
        &spec.out,
        &[
            ("crate_version", env!("CARGO_PKG_VERSION").to_string()),
            ("experiment", spec.kind.to_string()),
            ("seed", spec.seed.to_string()),
            ("seeds", b.seeds.to_string()),
            ("checkpoints_held", format!("{held}/{total}")),
            ("seeds_held", format!("{seeds_held}/{}", checks.len())),
        ],
    )?;
    let (status, reason) = if frac >= 0.95 {
        (ExitStatus::Success, None)
    } else {
        (
            ExitStatus::Failed,
            Some(format!(
                "gap exceeded the bound at {} of {total} checkpoints",
                total - held
            )),
        )
    };
    Ok(ExperimentOutcome {
        status,
        reason,
        points: Vec::new(),
        bound_checks: checks,
    })
}

fn sweep(spec: &ExperimentSpec, cfg: &ScenarioConfig, schemes: &[Scheme]) -> Result<ExperimentOutcome> {
    let qs: Vec<f64> = if !spec.qsweep.is_empty() {
        spec.qsweep.clone()
    } else if spec.kind == ExperimentKind::QSweep {
        DEFAULT_QSWEEP.to_vec()
    } else {
        vec![cfg.model_size / BITS_PER_MB]
    };
    let single = qs.len() == 1 && schemes.len() == 1 && spec.kind != ExperimentKind::QSweep;
    let jobs: Vec<(f64, Scheme)> = qs.iter().flat_map(|q| schemes.iter().map(move |s| (*q, *s))).collect();
    let points = jobs
        .par_iter()
        .map(|(q, s)| {
            let c = cfg.with_model_size(q * BITS_PER_MB);
            let dir = if single {
                spec.out.clone()
            } else {
                spec.out.join(point_dir(*q, *s))
            };
            match s.run(&c, spec.seed, &spec.options) {
                Ok(r) => {
                    write_run(&dir, &r, &c, spec)?;
                    Ok(SweepPoint {
                        q_mb: *q,
                        scheme: s.name(),
                        dir,
                        energy: Some(r.energy()),
                        verdict: Ok(r.verdict.clone()),
                        max_slack: r.max_slack,
                    })
                }
                Err(e) => Ok(SweepPoint {
                    q_mb: *q,
                    scheme: s.name(),
                    dir,
                    energy: None,
                    verdict: Err(e.to_string()),
                    max_slack: f64::NAN,
                }),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if !single {
        let mut w = writer(&spec.out, "sweep_summary.csv")?;
        w.write_record(["q_Mb", "scheme", "energy_J", "verdict", "max_slack", "reason"])
            .map_err(csv_err)?;
        for p in &points {
            let (v, reason) = match &p.verdict {
                Ok(v) => verdict_fields(v),
                Err(e) => ("failed".into(), e.clone()),
            };
            let e = p.energy.map(f).unwrap_or_default();
            w.write_record([f(p.q_mb), p.scheme.to_string(), e, v, f(p.max_slack), reason])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    let failed = points.iter().find_map(|p| {
        p.verdict
            .as_ref()
            .err()
            .map(|e| format!("{} at {} Mb: {e}", p.scheme, p.q_mb))
    });
    let (status, reason) = if let Some(e) = failed {
        (ExitStatus::Failed, Some(e))
    } else if single {
        match &points[0].verdict {
            Ok(Verdict::Infeasible(r)) => (ExitStatus::Infeasible, Some(format!("infeasible: {r}"))),
            _ => (ExitStatus::Success, None),
        }
    } else {
        (ExitStatus::Success, None)
    };
    Ok(ExperimentOutcome {
        status,
        reason,
        points,
        bound_checks: Vec::new(),
    })
}
