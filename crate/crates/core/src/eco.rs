//! Two-phase driver: relaxed SCA, rounding, restricted SCA, plus the
//! participation baselines and the fixed-trajectory heuristics.

use crate::channel::check_rate_constraints;
use crate::energy::{total_energy, EnergyBreakdown};
use crate::error::{EcoError, Result};
use crate::flbound::{accuracy_lhs, ParticipationPlan};
use crate::scenario::{
    check_timeslot_feasibility, fly_times, straight_line, DataAllocation, DecisionState, Point, ScenarioConfig,
    BITS_PER_MB,
};
use crate::subproblem::{
    build_phase1, build_phase2, solve_robust, BuildOptions, Candidate, ConicProgram, SolveResult, SolveStatus,
    DEFAULT_TOL, SLACK_TOL,
};
use crate::surrogates::{smooth_indicator, RefData, ReferencePoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Tolerance of the final constraint audit.
pub const AUDIT_TOL: f64 = 1e-6;
/// Relaxed participation shortfall accepted before more indicator cuts are added.
const FLOOR_CUT_TOL: f64 = 1e-7;
const MAX_CUT_ROUNDS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct EcoOptions {
    /// Penalized slack on rate and accuracy rows.
    pub soft: bool,
    pub max_iters: usize,
    /// Stop once the relative objective decrease falls below this.
    pub rel_tol: f64,
    pub solver_tol: f64,
}

impl Default for EcoOptions {
    fn default() -> Self {
        Self {
            soft: true,
            max_iters: 30,
            rel_tol: 1e-3,
            solver_tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Phase1,
    Phase2,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Phase1 => "phase1",
            Step::Phase2 => "phase2",
        }
    }
}

/// One SCA iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub step: Step,
    pub iteration: usize,
    pub status: SolveStatus,
    /// Program objective (J), slack penalty included.
    pub objective: f64,
    /// Energy of the decoded state (J).
    pub energy: f64,
    pub max_slack: f64,
    pub r_prim: f64,
    pub r_dual: f64,
    pub gap: f64,
    pub solver_iterations: u32,
    /// Indicator-cut refinements spent on this iteration.
    pub cut_rounds: usize,
}

/// Result of one SCA loop.
#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub trace: Vec<IterRecord>,
    /// Reference at the last accepted optimum.
    pub reference: ReferencePoint,
    pub candidate: Candidate,
    pub result: SolveResult,
    pub state: DecisionState,
}

/// Worst normalized slack of every original constraint family; negative
/// values are violations.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    /// Seconds.
    pub timeslot: f64,
    /// Fraction of the model size.
    pub rate: f64,
    /// Fraction of the power limit.
    pub power: f64,
    /// Fraction of `eps_G`.
    pub accuracy: f64,
    /// Fraction of the data floor.
    pub data_floor: f64,
    /// Participants above the floor.
    pub participation: f64,
}

impl Audit {
    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("time slot", self.timeslot),
            ("rate", self.rate),
            ("power", self.power),
            ("accuracy", self.accuracy),
            ("data floor", self.data_floor),
            ("participation", self.participation),
        ]
    }

    pub fn worst(&self) -> f64 {
        self.entries().iter().map(|e| e.1).fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() >= -tol
    }
}

/// Checks `state` against the original, unconvexified constraints.
pub fn audit(state: &DecisionState, cfg: &ScenarioConfig) -> Result<Audit> {
    let ts = check_timeslot_feasibility(state, cfg)?;
    let rates = check_rate_constraints(state, cfg)?;
    let mut power: f64 = f64::INFINITY;
    for p in state.p_ue.iter().flatten() {
        power = power.min((cfg.p_ue_max - p) / cfg.p_ue_max).min(p / cfg.p_ue_max);
    }
    for p in &state.p_uav {
        power = power.min((cfg.p_uav_max - p) / cfg.p_uav_max).min(p / cfg.p_uav_max);
    }
    let plan = ParticipationPlan::from_state(state)?;
    let acc = accuracy_lhs(&plan, &cfg.fl, cfg.n_slots, cfg.local_iters)?;
    let accuracy = if cfg.eps_g.is_finite() {
        (cfg.eps_g - acc) / cfg.eps_g
    } else {
        f64::INFINITY
    };
    let data_floor = plan
        .d
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            if cfg.data_floor > 0.0 {
                (total - cfg.data_floor) / cfg.data_floor
            } else {
                total
            }
        })
        .fold(f64::INFINITY, f64::min);
    let participation = (0..cfg.num_fl_slots())
        .map(|s| state.a.iter().map(|row| row[s]).sum::<f64>() - cfg.a_min as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(Audit {
        timeslot: ts.min_slack(),
        rate: rates.min_slack() / cfg.model_size,
        power,
        accuracy,
        data_floor,
        participation,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Feasible,
    /// Reason line with the offending certificate.
    Infeasible(String),
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: String,
    pub seed: u64,
    pub trace: Vec<IterRecord>,
    pub state: DecisionState,
    pub breakdown: EnergyBreakdown,
    /// Accuracy-constraint left side at the final state.
    pub accuracy: f64,
    pub max_slack: f64,
    pub audit: Audit,
    pub verdict: Verdict,
    /// Seconds.
    pub wall_clock: f64,
}

impl RunReport {
    pub fn energy(&self) -> f64 {
        self.breakdown.e_total
    }

    pub fn phase_trace(&self, step: Step) -> impl Iterator<Item = &IterRecord> {
        self.trace.iter().filter(move |r| r.step == step)
    }
}

/// Straight-line, full-participation starting point.
pub fn initialize(cfg: &ScenarioConfig) -> Result<ReferencePoint> {
    cfg.validate()?;
    let m = cfg.num_fl_slots();
    let k = cfg.num_ues();
    let d = cfg.data_floor / BITS_PER_MB / m as f64;
    ReferencePoint::new(
        cfg,
        straight_line(cfg.q_ini, cfg.q_fin, cfg.n_slots),
        vec![vec![(cfg.p_ue_max / 2.0).ln(); m]; k],
        RefData::Relaxed(vec![vec![d; m]; k]),
    )
}

/// Decodes a solution, snapping the trajectory endpoints (and a frozen
/// trajectory) to their exact values.
fn decode(prog: &ConicProgram, res: &SolveResult, cfg: &ScenarioConfig, frozen: Option<&Vec<Point>>) -> Candidate {
    let mut c = prog.decode(&res.x);
    if let Some(q) = frozen {
        c.q.clone_from(q);
    }
    let n = c.q.len() - 1;
    c.q[0] = cfg.q_ini;
    c.q[n] = cfg.q_fin;
    c
}

/// Lifts each hover time to what the exact flight times require. The cone
/// holding the flight-length lower bound is only met to solver tolerance,
/// which near zero-length legs can overstate the flight time by ~1e-5 s.
fn settle_hover(mut state: DecisionState, cfg: &ScenarioConfig) -> DecisionState {
    let t_fly = fly_times(&state.q, cfg.uav_speed);
    for s in 0..state.t_hov.len() {
        let need = (0..state.a.len())
            .map(|k| cfg.t_cm + state.effective_data(k, s) * cfg.compute_time_per_bit(k) - t_fly[s])
            .fold(cfg.t_cm, f64::max);
        if state.t_hov[s] < need {
            state.t_hov[s] = need;
        }
    }
    state
}

fn relaxed_state(c: &Candidate, cfg: &ScenarioConfig) -> DecisionState {
    settle_hover(
        DecisionState {
            q: c.q.clone(),
            a: c.d_slot
                .iter()
                .map(|row| row.iter().map(|d| smooth_indicator(*d, cfg.sigmoid_beta)).collect())
                .collect(),
            data: DataAllocation::Relaxed(
                c.d_slot
                    .iter()
                    .map(|row| row.iter().map(|d| d * BITS_PER_MB).collect())
                    .collect(),
            ),
            p_ue: c.p_ue.clone(),
            p_uav: c.p_uav.clone(),
            t_hov: c.t_hov.clone(),
        },
        cfg,
    )
}

fn restricted_state(c: &Candidate, a: &[Vec<f64>], cfg: &ScenarioConfig) -> DecisionState {
    settle_hover(
        DecisionState {
            q: c.q.clone(),
            a: a.to_vec(),
            data: DataAllocation::PerUe(c.d_ue.iter().map(|d| d * BITS_PER_MB).collect()),
            p_ue: c.p_ue.clone(),
            p_uav: c.p_uav.clone(),
            t_hov: c.t_hov.clone(),
        },
        cfg,
    )
}

/// Log powers of the next reference; columns absent from the program keep
/// their previous value.
fn next_b(c: &Candidate, prev: &ReferencePoint) -> Vec<Vec<f64>> {
    c.b.iter()
        .zip(&prev.b_r)
        .map(|(row, old)| {
            row.iter()
                .zip(old)
                .map(|(b, o)| if b.is_finite() { *b } else { *o })
                .collect()
        })
        .collect()
}

fn record(
    step: Step,
    iteration: usize,
    res: &SolveResult,
    energy: f64,
    max_slack: f64,
    cut_rounds: usize,
) -> IterRecord {
    IterRecord {
        step,
        iteration,
        status: res.status,
        objective: res.objective,
        energy,
        max_slack,
        r_prim: res.r_prim,
        r_dual: res.r_dual,
        gap: res.gap,
        solver_iterations: res.iterations,
        cut_rounds,
    }
}

fn unusable(res: &SolveResult, step: Step, prog: &ConicProgram) -> EcoError {
    let what = match res.status {
        SolveStatus::Infeasible => "the convex subproblem is infeasible",
        SolveStatus::MaxIterations => "the solver hit its iteration limit",
        _ => "the solver failed numerically",
    };
    EcoError::Infeasible(format!(
        "{}: {what} at the first iterate ({} variables, {} rows, primal residual {:.2e})",
        step.name(),
        prog.num_vars,
        prog.num_rows(),
        res.r_prim
    ))
}

fn converged(prev: Option<f64>, obj: f64, rel_tol: f64) -> bool {
    prev.is_some_and(|p| (p - obj) / p.abs().max(1e-12) < rel_tol)
}

/// Relaxed-data SCA from `init`. `frozen_q` keeps the reference trajectory.
pub fn phase1(cfg: &ScenarioConfig, init: ReferencePoint, frozen_q: bool, opts: &EcoOptions) -> Result<ScaOutcome> {
    let mut r = init;
    let mut cuts: Vec<(usize, usize, f64)> = Vec::new();
    let mut trace = Vec::new();
    let mut best: Option<(Candidate, SolveResult, DecisionState, ReferencePoint)> = None;
    let mut prev = None;
    for it in 0..opts.max_iters.max(1) {
        let mut rounds = 0;
        let (prog, res) = loop {
            let bo = BuildOptions {
                soft: opts.soft,
                frozen_q,
                extra_cuts: cuts.clone(),
            };
            let prog = build_phase1(&r, cfg, &bo)?;
            let res = solve_robust(&prog, opts.solver_tol)?;
            if !res.status.usable() || rounds >= MAX_CUT_ROUNDS {
                break (prog, res);
            }
            let c = prog.decode(&res.x);
            let mut short = false;
            for s in 0..cfg.num_fl_slots() {
                let total: f64 = c
                    .d_slot
                    .iter()
                    .map(|row| smooth_indicator(row[s], cfg.sigmoid_beta))
                    .sum();
                if total < cfg.a_min as f64 - FLOOR_CUT_TOL {
                    short = true;
                    cuts.extend((0..cfg.num_ues()).map(|k| (k, s, c.d_slot[k][s])));
                }
            }
            if !short {
                break (prog, res);
            }
            rounds += 1;
        };
        if !res.status.usable() {
            if best.is_none() {
                return Err(unusable(&res, Step::Phase1, &prog));
            }
            break;
        }
        let c = decode(&prog, &res, cfg, frozen_q.then_some(&r.q_r));
        let state = relaxed_state(&c, cfg);
        let energy = total_energy(&state, cfg)?.e_total;
        trace.push(record(Step::Phase1, it, &res, energy, c.max_slack, rounds));
        r = ReferencePoint::new(cfg, c.q.clone(), next_b(&c, &r), RefData::Relaxed(c.d_slot.clone()))?;
        let obj = res.objective;
        best = Some((c, res, state, r.clone()));
        if converged(prev, obj, opts.rel_tol) {
            break;
        }
        prev = Some(obj);
    }
    let (candidate, result, state, reference) = best.expect("at least one iterate");
    Ok(ScaOutcome {
        trace,
        reference,
        candidate,
        result,
        state,
    })
}

/// Binary participation from relaxed data (Mb): `a = 1` iff the smooth
/// indicator reaches 1/2. Slots below `a_min` get their largest-data
/// non-participants promoted, and a UE left without any slot joins the slot
/// where its relaxed data is largest.
pub fn round_participation(d_mb: &[Vec<f64>], beta: f64, a_min: usize) -> Vec<Vec<f64>> {
    let k_count = d_mb.len();
    let m = d_mb.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<f64>> = d_mb
        .iter()
        .map(|row| {
            row.iter()
                .map(|d| {
                    if smooth_indicator(*d, beta) >= 0.5 - 1e-12 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    for s in 0..m {
        let mut count = (0..k_count).filter(|k| a[*k][s] == 1.0).count();
        let mut order: Vec<usize> = (0..k_count).filter(|k| a[*k][s] == 0.0).collect();
        order.sort_by(|x, y| d_mb[*y][s].total_cmp(&d_mb[*x][s]).then(x.cmp(y)));
        for k in order {
            if count >= a_min {
                break;
            }
            a[k][s] = 1.0;
            count += 1;
        }
    }
    for k in 0..k_count {
        if m > 0 && a[k].iter().all(|v| *v == 0.0) {
            let s = (0..m)
                .max_by(|x, y| d_mb[k][*x].total_cmp(&d_mb[k][*y]).then(y.cmp(x)))
                .unwrap_or(0);
            a[k][s] = 1.0;
        }
    }
    a
}

/// Per-UE starting data (Mb): mean relaxed data over the joined slots, at
/// least enough to meet the floor.
fn restricted_start(d_mb: &[Vec<f64>], a: &[Vec<f64>], floor_mb: f64) -> Vec<f64> {
    d_mb.iter()
        .zip(a)
        .map(|(row, ak)| {
            let slots = ak.iter().filter(|v| **v > 0.5).count().max(1) as f64;
            let mean = row
                .iter()
                .zip(ak)
                .filter(|(_, a)| **a > 0.5)
                .map(|(d, _)| d)
                .sum::<f64>()
                / slots;
            mean.max(floor_mb / slots)
        })
        .collect()
}

/// Fixed-participation SCA from `init` (restricted reference data).
pub fn phase2(cfg: &ScenarioConfig, init: ReferencePoint, frozen_q: bool, opts: &EcoOptions) -> Result<ScaOutcome> {
    let RefData::Restricted { a, .. } = &init.data else {
        return Err(EcoError::InvalidArgument("phase 2 needs a participation plan".into()));
    };
    let a = a.clone();
    let bo = BuildOptions {
        soft: opts.soft,
        frozen_q,
        extra_cuts: Vec::new(),
    };
    let mut r = init;
    let mut trace = Vec::new();
    let mut best = None;
    let mut prev = None;
    for it in 0..opts.max_iters.max(1) {
        let prog = build_phase2(&r, cfg, &bo)?;
        let res = solve_robust(&prog, opts.solver_tol)?;
        if !res.status.usable() {
            if best.is_none() {
                return Err(unusable(&res, Step::Phase2, &prog));
            }
            break;
        }
        let c = decode(&prog, &res, cfg, frozen_q.then_some(&r.q_r));
        let state = restricted_state(&c, &a, cfg);
        let energy = total_energy(&state, cfg)?.e_total;
        trace.push(record(Step::Phase2, it, &res, energy, c.max_slack, 0));
        r = ReferencePoint::new(
            cfg,
            c.q.clone(),
            next_b(&c, &r),
            RefData::Restricted {
                a: a.clone(),
                d: c.d_ue.clone(),
            },
        )?;
        let obj = res.objective;
        best = Some((c, res, state, r.clone()));
        if converged(prev, obj, opts.rel_tol) {
            break;
        }
        prev = Some(obj);
    }
    let (candidate, result, state, reference) = best.expect("at least one iterate");
    Ok(ScaOutcome {
        trace,
        reference,
        candidate,
        result,
        state,
    })
}

fn finish(
    scheme: &str,
    seed: u64,
    cfg: &ScenarioConfig,
    trace: Vec<IterRecord>,
    out: ScaOutcome,
    start: Instant,
) -> Result<RunReport> {
    let breakdown = total_energy(&out.state, cfg)?;
    let plan = ParticipationPlan::from_state(&out.state)?;
    let accuracy = accuracy_lhs(&plan, &cfg.fl, cfg.n_slots, cfg.local_iters)?;
    let audit = audit(&out.state, cfg)?;
    let max_slack = out.candidate.max_slack;
    let verdict = if max_slack > SLACK_TOL {
        Verdict::Infeasible(slack_certificate(&out))
    } else if !audit.passes(AUDIT_TOL) {
        let (name, v) = audit
            .entries()
            .into_iter()
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("six entries");
        Verdict::Infeasible(format!("{name} constraint violated by {:.3e}", -v))
    } else {
        Verdict::Feasible
    };
    Ok(RunReport {
        scheme: scheme.to_string(),
        seed,
        trace,
        state: out.state,
        breakdown,
        accuracy,
        max_slack,
        audit,
        verdict,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

/// Names the largest slack of the last program.
fn slack_certificate(out: &ScaOutcome) -> String {
    match &out.candidate.worst_slack {
        Some(site) => format!("{site} remains at convergence"),
        None => "no slack".into(),
    }
}

fn restricted_reference(
    cfg: &ScenarioConfig,
    q: Vec<Point>,
    b: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    d: Vec<f64>,
) -> Result<ReferencePoint> {
    ReferencePoint::new(cfg, q, b, RefData::Restricted { a, d })
}

/// Phase 1, rounding, phase 2.
fn two_phase(
    cfg: &ScenarioConfig,
    init: ReferencePoint,
    frozen_q: bool,
    opts: &EcoOptions,
) -> Result<(Vec<IterRecord>, ScaOutcome)> {
    let p1 = phase1(cfg, init, frozen_q, opts)?;
    let a = round_participation(&p1.candidate.d_slot, cfg.sigmoid_beta, cfg.a_min);
    let d = restricted_start(&p1.candidate.d_slot, &a, cfg.data_floor / BITS_PER_MB);
    let r2 = restricted_reference(cfg, p1.reference.q_r.clone(), p1.reference.b_r.clone(), a, d)?;
    let p2 = phase2(cfg, r2, frozen_q, opts)?;
    let mut trace = p1.trace;
    trace.extend(p2.trace.iter().cloned());
    Ok((trace, p2))
}

pub fn run_eco(cfg: &ScenarioConfig, seed: u64) -> Result<RunReport> {
    run_eco_with(cfg, seed, &EcoOptions::default())
}

pub fn run_eco_with(cfg: &ScenarioConfig, seed: u64, opts: &EcoOptions) -> Result<RunReport> {
    let start = Instant::now();
    let (trace, out) = two_phase(cfg, initialize(cfg)?, false, opts)?;
    finish("eco", seed, cfg, trace, out, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// `a_min` UEs drawn per slot.
    Random,
    /// Every UE in every slot.
    Fixed,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Fixed => "fixed",
        }
    }
}

/// Participation plan of a baseline.
pub fn baseline_plan(kind: BaselineKind, cfg: &ScenarioConfig, seed: u64) -> Vec<Vec<f64>> {
    let k = cfg.num_ues();
    let m = cfg.num_fl_slots();
    match kind {
        BaselineKind::Fixed => vec![vec![1.0; m]; k],
        BaselineKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = vec![vec![0.0; m]; k];
            for s in 0..m {
                for i in rand::seq::index::sample(&mut rng, k, cfg.a_min.min(k)) {
                    a[i][s] = 1.0;
                }
            }
            a
        }
    }
}

/// Fixed participation, everything else optimized from the straight-line start.
pub fn baseline_participation(kind: BaselineKind, cfg: &ScenarioConfig, seed: u64) -> Result<RunReport> {
    baseline_participation_with(kind, cfg, seed, &EcoOptions::default())
}

pub fn baseline_participation_with(
    kind: BaselineKind,
    cfg: &ScenarioConfig,
    seed: u64,
    opts: &EcoOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    let a = baseline_plan(kind, cfg, seed);
    let init = initialize(cfg)?;
    let d = a
        .iter()
        .map(|row| cfg.data_floor / BITS_PER_MB / row.iter().sum::<f64>().max(1.0))
        .collect();
    let r = restricted_reference(cfg, init.q_r, init.b_r, a, d)?;
    let out = phase2(cfg, r, false, opts)?;
    let trace = out.trace.clone();
    finish(kind.name(), seed, cfg, trace, out, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Cur,
    Str,
    Mid,
    Asy,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 4] = [
        TrajectoryKind::Cur,
        TrajectoryKind::Str,
        TrajectoryKind::Mid,
        TrajectoryKind::Asy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Cur => "CUR",
            TrajectoryKind::Str => "STR",
            TrajectoryKind::Mid => "MID",
            TrajectoryKind::Asy => "ASY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

/// Waypoints of the heuristic trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicGeometry {
    /// Apex of the half-ellipse.
    pub cur_apex: Point,
    pub mid_via: Point,
    /// `None` uses the UE centroid.
    pub asy_via: Option<Point>,
}

impl HeuristicGeometry {
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            cur_apex: Point::new(cfg.area[0] / 2.0, cfg.area[1] * 0.75),
            mid_via: Point::new(cfg.area[0] / 2.0, cfg.area[1] * 5.0 / 6.0),
            asy_via: None,
        }
    }
}

/// `n + 1` points equally spaced by arc length along a polyline.
pub fn resample_polyline(points: &[Point], n: usize) -> Vec<Point> {
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    if points.len() < 2 || total == 0.0 {
        return vec![points[0]; n + 1];
    }
    let mut seg = 0;
    (0..=n)
        .map(|i| {
            let s = total * i as f64 / n as f64;
            while seg + 2 < cum.len() && cum[seg + 1] < s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 {
                ((s - cum[seg]) / len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            points[seg] + (points[seg + 1] - points[seg]) * t
        })
        .collect()
}

/// Half-ellipse from `a` to `b` whose apex is `apex`.
fn half_ellipse(a: Point, b: Point, apex: Point, samples: usize) -> Vec<Point> {
    let center = (a + b) / 2.0;
    let u = a - center;
    let v = apex - center;
    (0..=samples)
        .map(|i| {
            let th = std::f64::consts::PI * i as f64 / samples as f64;
            center + u * th.cos() + v * th.sin()
        })
        .collect()
}

pub fn heuristic_waypoints(kind: TrajectoryKind, cfg: &ScenarioConfig, geo: &HeuristicGeometry) -> Vec<Point> {
    let (a, b) = (cfg.q_ini, cfg.q_fin);
    match kind {
        TrajectoryKind::Str => vec![a, b],
        TrajectoryKind::Mid => vec![a, geo.mid_via, b],
        TrajectoryKind::Asy => {
            let centroid = cfg.ue_positions.iter().fold(Point::zeros(), |s, p| s + p) / cfg.num_ues() as f64;
            vec![a, geo.asy_via.unwrap_or(centroid), b]
        }
        TrajectoryKind::Cur => half_ellipse(a, b, geo.cur_apex, 2000),
    }
}

/// Trajectory of a heuristic, sampled at `N + 1` arc-equidistant points.
pub fn heuristic_path(kind: TrajectoryKind, cfg: &ScenarioConfig) -> Vec<Point> {
    resample_polyline(
        &heuristic_waypoints(kind, cfg, &HeuristicGeometry::for_scenario(cfg)),
        cfg.n_slots,
    )
}

/// Frozen trajectory, everything else through both phases.
pub fn heuristic_trajectory(kind: TrajectoryKind, cfg: &ScenarioConfig) -> Result<RunReport> {
    heuristic_trajectory_with(kind, cfg, 0, &EcoOptions::default())
}

pub fn heuristic_trajectory_with(
    kind: TrajectoryKind,
    cfg: &ScenarioConfig,
    seed: u64,
    opts: &EcoOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    let mut init = initialize(cfg)?;
    init = ReferencePoint::new(cfg, heuristic_path(kind, cfg), init.b_r, init.data)?;
    let (trace, out) = two_phase(cfg, init, true, opts)?;
    finish(kind.name(), seed, cfg, trace, out, start)
}
