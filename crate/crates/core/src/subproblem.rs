//! Per-iteration convex program and the solver contract.
//!
//! A [`ConicProgram`] is a linear objective over named variable blocks plus a
//! list of cone memberships `(e_1, ..., e_m) ∈ K`, each entry an affine
//! expression. Supported cones: zero, nonnegative orthant, second-order cone
//! `e_1 >= ‖(e_2, ..., e_m)‖`, and the exponential cone
//! `e_2 · exp(e_1 / e_2) <= e_3`.
//!
//! Internal scaling of the trajectory program: positions and segment lengths
//! in units of 100 m, data in Mb, powers as natural logs of watts, objective
//! in units of 100 J.
//!
//! # Dump format
//!
//! [`ConicProgram::dump`] writes a line-oriented text file:
//!
//! ```text
//! ecofl-conic 1
//! vars <n>
//! block <name> <start> <len>          (one per block)
//! objective <constant> <nnz> <col>:<coef> ...
//! cones <count>
//! cone <zero|nonneg|soc|exp> <dim> <tag>
//! row <constant> <nnz> <col>:<coef> ...   (dim rows follow each cone line)
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting.

use crate::error::{EcoError, Result};
use crate::flbound::AccuracyTerms;
use crate::scenario::{Point, ScenarioConfig, BITS_PER_MB};
use crate::surrogates::{
    broadcast_lhs_surrogate, broadcast_payload, coupling_lin, participation_affine_ub, rate_r1_lb, rate_r2_lb,
    segment_length_lb, smooth_indicator, smooth_indicator_slope, sum_data_sq_lb, uplink_payload, AffineForm,
    ConcaveForm, DecisionVar, RefData, ReferencePoint,
};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Meters per internal position unit.
pub const POS_SCALE: f64 = 100.0;
/// Joules to objective units.
pub const OBJ_SCALE: f64 = 1e-2;
/// Penalty per unit of slack in soft-feasibility mode (J).
pub const SLACK_PENALTY: f64 = 1e6;
/// Slack above this value at convergence marks a run infeasible.
pub const SLACK_TOL: f64 = 1e-6;
/// Log powers are kept within this span below their maximum.
pub const POWER_FLOOR_SPAN: f64 = 18.4;
/// Tangent points (Mb) of the cuts that outer-approximate the smooth
/// indicator in the participation floor.
pub const FLOOR_CUT_GRID: [f64; 10] = [0.0, 0.02, 0.05, 0.08, 0.11, 0.15, 0.2, 0.3, 0.5, 1.0];

/// `constant + Σ coef · x[col]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(col: usize) -> Self {
        Self::term(col, 1.0)
    }

    pub fn term(col: usize, coef: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(col, coef)],
        }
    }

    pub fn plus(mut self, col: usize, coef: f64) -> Self {
        self.terms.push((col, coef));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, scale: f64) {
        self.constant += scale * other.constant;
        self.terms.extend(other.terms.iter().map(|(c, v)| (*c, v * scale)));
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.constant *= s;
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(c, v)| v * x[*c]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    Zero,
    Nonneg,
    Soc,
    Exp,
}

impl ConeKind {
    fn name(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Nonneg => "nonneg",
            ConeKind::Soc => "soc",
            ConeKind::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub kind: ConeKind,
    pub tag: &'static str,
    pub entries: Vec<LinExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// Where each decision quantity lives in the solution vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub q: Vec<[usize; 2]>,
    pub b: Vec<Vec<Option<usize>>>,
    pub a_tilde: Vec<Vec<Option<usize>>>,
    pub c: Vec<usize>,
    /// Relaxed `[k][slot]` columns.
    pub d_slot: Vec<Vec<usize>>,
    /// Per-UE columns.
    pub d_ue: Vec<usize>,
    pub d_hat: Vec<usize>,
    pub t_hov: Vec<usize>,
    pub d_lb: Vec<usize>,
    pub fly: Vec<usize>,
    pub p: Vec<Vec<Option<usize>>>,
    pub p_uav: Vec<usize>,
    pub slack_uplink: Vec<Vec<Option<usize>>>,
    pub slack_broadcast: Vec<Vec<Option<usize>>>,
    pub slack_accuracy: Option<usize>,
    /// Broadcast rows that exist, per `[k][bc_slot]`.
    pub broadcast_rows: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Relaxed,
    Restricted,
    Generic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub blocks: Vec<VarBlock>,
    pub num_vars: usize,
    /// Minimized.
    pub objective: LinExpr,
    pub cones: Vec<ConeRow>,
    pub layout: Layout,
    pub phase: Phase,
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self {
            blocks: Vec::new(),
            num_vars: 0,
            objective: LinExpr::default(),
            cones: Vec::new(),
            layout: Layout::default(),
            phase: Phase::Generic,
        }
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a named block of `len` variables, returning its first column.
    pub fn add_block(&mut self, name: &str, len: usize) -> usize {
        let start = self.num_vars;
        self.blocks.push(VarBlock {
            name: name.to_string(),
            start,
            len,
        });
        self.num_vars += len;
        start
    }

    pub fn block(&self, name: &str) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn add_cone(&mut self, kind: ConeKind, tag: &'static str, entries: Vec<LinExpr>) {
        debug_assert!(kind != ConeKind::Exp || entries.len() == 3);
        self.cones.push(ConeRow { kind, tag, entries });
    }

    /// `e >= 0`.
    pub fn add_nonneg(&mut self, tag: &'static str, e: LinExpr) {
        self.add_cone(ConeKind::Nonneg, tag, vec![e]);
    }

    /// `e == 0`.
    pub fn add_zero(&mut self, tag: &'static str, e: LinExpr) {
        self.add_cone(ConeKind::Zero, tag, vec![e]);
    }

    /// `exp(x) <= z`.
    pub fn add_exp(&mut self, tag: &'static str, x: LinExpr, z: LinExpr) {
        self.add_cone(ConeKind::Exp, tag, vec![x, LinExpr::constant(1.0), z]);
    }

    /// `‖v‖² <= y · z` with `y, z >= 0`.
    pub fn add_rotated(&mut self, tag: &'static str, v: Vec<LinExpr>, y: LinExpr, z: LinExpr) {
        let mut first = y.clone();
        first.add_expr(&z, 1.0);
        let mut last = y;
        last.add_expr(&z, -1.0);
        let mut entries = vec![first];
        entries.extend(v.into_iter().map(|e| e.scaled(2.0)));
        entries.push(last);
        self.add_cone(ConeKind::Soc, tag, entries);
    }

    pub fn num_rows(&self) -> usize {
        self.cones.iter().map(|c| c.entries.len()).sum()
    }

    /// Counts cones per kind.
    pub fn cone_counts(&self) -> HashMap<&'static str, usize> {
        let mut m = HashMap::new();
        for c in &self.cones {
            *m.entry(c.kind.name()).or_insert(0) += 1;
        }
        m
    }

    /// Plain-text interchange dump (see the module docs).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let expr = |out: &mut String, head: &str, e: &LinExpr| {
            let _ = write!(out, "{head} {:?} {}", e.constant, e.terms.len());
            for (c, v) in &e.terms {
                let _ = write!(out, " {c}:{v:?}");
            }
            out.push('\n');
        };
        out.push_str("ecofl-conic 1\n");
        let _ = writeln!(out, "vars {}", self.num_vars);
        for b in &self.blocks {
            let _ = writeln!(out, "block {} {} {}", b.name, b.start, b.len);
        }
        expr(&mut out, "objective", &self.objective);
        let _ = writeln!(out, "cones {}", self.cones.len());
        for c in &self.cones {
            let _ = writeln!(out, "cone {} {} {}", c.kind.name(), c.entries.len(), c.tag);
            for e in &c.entries {
                expr(&mut out, "row", e);
            }
        }
        out
    }

    /// Largest violation of any cone membership at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.cones {
            let v: Vec<f64> = c.entries.iter().map(|e| e.eval(x)).collect();
            let viol = match c.kind {
                ConeKind::Zero => v.iter().map(|a| a.abs()).fold(0.0, f64::max),
                ConeKind::Nonneg => v.iter().map(|a| (-a).max(0.0)).fold(0.0, f64::max),
                ConeKind::Soc => {
                    let n = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
                    (n - v[0]).max(0.0)
                }
                ConeKind::Exp => {
                    if v[1] > 0.0 {
                        (v[1] * (v[0] / v[1]).exp() - v[2]).max(0.0)
                    } else {
                        f64::INFINITY
                    }
                }
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Options shared by both program builders.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildOptions {
    /// Add penalized slack to the uplink, broadcast and accuracy rows.
    pub soft: bool,
    /// Fix the trajectory at the reference.
    pub frozen_q: bool,
    /// Extra tangent points `(k, slot, D in Mb)` for the participation floor.
    pub extra_cuts: Vec<(usize, usize, f64)>,
}

struct Builder<'a> {
    prog: ConicProgram,
    r: &'a ReferencePoint,
    quad_aux: HashMap<(usize, u64, u64), (usize, f64)>,
}

impl<'a> Builder<'a> {
    fn col(&self, v: DecisionVar) -> Result<(usize, f64)> {
        let l = &self.prog.layout;
        let missing = || EcoError::Solver(format!("{v:?} is not part of the program"));
        Ok(match v {
            DecisionVar::Q { n, axis } => (l.q.get(n).ok_or_else(missing)?[axis], POS_SCALE),
            DecisionVar::B { k, slot } => (l.b[k][slot].ok_or_else(missing)?, 1.0),
            DecisionVar::ATilde { k, slot } => (l.a_tilde[k][slot].ok_or_else(missing)?, 1.0),
            DecisionVar::C { slot } => (*l.c.get(slot).ok_or_else(missing)?, 1.0),
            DecisionVar::D { k, slot } => (*l.d_slot.get(k).and_then(|r| r.get(slot)).ok_or_else(missing)?, 1.0),
            DecisionVar::DUe { k } => (*l.d_ue.get(k).ok_or_else(missing)?, 1.0),
        })
    }

    fn affine(&self, f: &AffineForm) -> Result<LinExpr> {
        let mut e = LinExpr::constant(f.constant);
        for (v, c) in &f.coeffs {
            let (col, s) = self.col(*v)?;
            e.terms.push((col, c * s));
        }
        Ok(e)
    }

    /// Lower bound of a concave form: each `w ‖q[n] - c‖²` (w <= 0) becomes
    /// `w · scale · v` with `v >= ‖q[n] - c‖² / scale`.
    fn concave(&mut self, f: &ConcaveForm) -> Result<LinExpr> {
        let mut e = self.affine(&f.affine)?;
        for t in &f.quad {
            if t.weight > 0.0 {
                return Err(EcoError::Solver("convex quadratic on the concave side".into()));
            }
            let key = (t.n, t.center.x.to_bits(), t.center.y.to_bits());
            let (col, scale) = match self.quad_aux.get(&key) {
                Some(v) => *v,
                None => {
                    let scale = (self.r.q_r[t.n] - t.center).norm_squared() + self.r.altitude.powi(2);
                    let col = self.prog.add_block("dist_aux", 1);
                    let qc = self.prog.layout.q[t.n];
                    let c = t.center / POS_SCALE;
                    self.prog.add_rotated(
                        "squared distance",
                        vec![
                            LinExpr::var(qc[0]).plus_const(-c.x),
                            LinExpr::var(qc[1]).plus_const(-c.y),
                        ],
                        LinExpr::var(col),
                        LinExpr::constant(scale / (POS_SCALE * POS_SCALE)),
                    );
                    self.quad_aux.insert(key, (col, scale));
                    (col, scale)
                }
            };
            e.terms.push((col, t.weight * scale));
        }
        Ok(e)
    }

    fn slack(&mut self, name: &str) -> usize {
        let col = self.prog.add_block(name, 1);
        self.prog.add_nonneg("slack sign", LinExpr::var(col));
        self.prog.objective.terms.push((col, SLACK_PENALTY * OBJ_SCALE));
        col
    }
}

fn grid(k: usize, m: usize, prog: &mut ConicProgram, name: &str) -> Vec<Vec<usize>> {
    let start = prog.add_block(name, k * m);
    (0..k).map(|i| (0..m).map(|s| start + i * m + s).collect()).collect()
}

/// Builds the relaxed-data program around `r` (which must hold relaxed data).
pub fn build_phase1(r: &ReferencePoint, cfg: &ScenarioConfig, opts: &BuildOptions) -> Result<ConicProgram> {
    if !matches!(r.data, RefData::Relaxed(_)) {
        return Err(EcoError::InvalidArgument(
            "relaxed program needs relaxed reference data".into(),
        ));
    }
    build(r, cfg, opts, Phase::Relaxed)
}

/// Builds the fixed-participation program; `r` carries the binary plan and
/// the per-UE reference data.
pub fn build_phase2(r: &ReferencePoint, cfg: &ScenarioConfig, opts: &BuildOptions) -> Result<ConicProgram> {
    let RefData::Restricted { a, .. } = &r.data else {
        return Err(EcoError::InvalidArgument(
            "restricted program needs a participation plan".into(),
        ));
    };
    for slot in 0..cfg.num_fl_slots() {
        let count = a.iter().filter(|row| row[slot] > 0.5).count();
        if count < cfg.a_min {
            return Err(EcoError::ParticipationFloor {
                slot,
                count,
                a_min: cfg.a_min,
            });
        }
    }
    if cfg.data_floor > 0.0 {
        if let Some(k) = a.iter().position(|row| row.iter().all(|v| *v <= 0.5)) {
            return Err(EcoError::Infeasible(format!(
                "UE {k} never takes part but must train on data"
            )));
        }
    }
    build(r, cfg, opts, Phase::Restricted)
}

fn build(r: &ReferencePoint, cfg: &ScenarioConfig, opts: &BuildOptions, phase: Phase) -> Result<ConicProgram> {
    cfg.validate()?;
    if r.num_ues() != cfg.num_ues() || r.q_r.len() != cfg.n_slots + 1 || r.num_slots() != cfg.num_fl_slots() {
        return Err(EcoError::Dimension {
            what: "reference vs scenario",
            expected: cfg.n_slots + 1,
            got: r.q_r.len(),
        });
    }
    let k_count = cfg.num_ues();
    let m = cfg.num_fl_slots();
    let nb = cfg.num_bc_slots();
    let n = cfg.n_slots;
    let relaxed = phase == Phase::Relaxed;
    let mut b = Builder {
        prog: ConicProgram {
            phase,
            ..ConicProgram::default()
        },
        r,
        quad_aux: HashMap::new(),
    };

    // variables
    let q0 = b.prog.add_block("q", 2 * (n + 1));
    b.prog.layout.q = (0..=n).map(|i| [q0 + 2 * i, q0 + 2 * i + 1]).collect();
    if relaxed {
        b.prog.layout.d_slot = grid(k_count, m, &mut b.prog, "D");
    } else {
        let s = b.prog.add_block("D", k_count);
        b.prog.layout.d_ue = (s..s + k_count).collect();
    }
    let active = |k: usize, s: usize| r.transmits(k, s);
    let bcols = grid(k_count, m, &mut b.prog, "B");
    b.prog.layout.b = bcols
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(s, c)| active(k, s).then_some(*c))
                .collect()
        })
        .collect();
    let acols = grid(k_count, m, &mut b.prog, "A_tilde");
    b.prog.layout.a_tilde = acols
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(s, c)| active(k, s).then_some(*c))
                .collect()
        })
        .collect();
    let c0 = b.prog.add_block("C", nb);
    b.prog.layout.c = (c0..c0 + nb).collect();
    let t0 = b.prog.add_block("t_hov", m);
    b.prog.layout.t_hov = (t0..t0 + m).collect();
    let l0 = b.prog.add_block("d_lb", m);
    b.prog.layout.d_lb = (l0..l0 + m).collect();
    let h0 = b.prog.add_block("D_hat", m);
    b.prog.layout.d_hat = (h0..h0 + m).collect();
    let f0 = b.prog.add_block("fly", n);
    b.prog.layout.fly = (f0..f0 + n).collect();
    let pcols = grid(k_count, m, &mut b.prog, "p");
    b.prog.layout.p = pcols
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(s, c)| active(k, s).then_some(*c))
                .collect()
        })
        .collect();
    let u0 = b.prog.add_block("p_uav", nb);
    b.prog.layout.p_uav = (u0..u0 + nb).collect();

    let lay = b.prog.layout.clone();
    let qv = |i: usize, axis: usize| lay.q[i][axis];

    // objective (scaled joules)
    let p_fly = crate::energy::propulsion_power(cfg.uav_speed, &cfg.rotor);
    let p_hov = crate::energy::hover_power(&cfg.rotor);
    let mut obj = LinExpr::default();
    for &f in &lay.fly {
        obj.terms.push((f, p_fly * POS_SCALE / cfg.uav_speed));
    }
    for &t in &lay.t_hov {
        obj.terms.push((t, p_hov));
    }
    for row in &lay.p {
        for c in row.iter().flatten() {
            obj.terms.push((*c, cfg.t_cm));
        }
    }
    for &c in &lay.p_uav {
        obj.terms.push((c, cfg.t_bc));
    }
    for k in 0..k_count {
        let e_mb = cfg.compute_energy_per_bit(k) * BITS_PER_MB;
        if relaxed {
            for s in 0..m {
                obj.terms.push((lay.d_slot[k][s], e_mb));
            }
        } else if let RefData::Restricted { a, .. } = &r.data {
            let slots: f64 = a[k].iter().filter(|v| **v > 0.5).count() as f64;
            obj.terms.push((lay.d_ue[k], e_mb * slots));
        }
    }
    b.prog.objective = obj.scaled(OBJ_SCALE);

    // boundary and optional frozen trajectory
    for axis in 0..2 {
        b.prog.add_zero(
            "start point",
            LinExpr::var(qv(0, axis)).plus_const(-cfg.q_ini[axis] / POS_SCALE),
        );
        b.prog.add_zero(
            "end point",
            LinExpr::var(qv(n, axis)).plus_const(-cfg.q_fin[axis] / POS_SCALE),
        );
    }
    if opts.frozen_q {
        for i in 1..n {
            for axis in 0..2 {
                b.prog.add_zero(
                    "frozen trajectory",
                    LinExpr::var(qv(i, axis)).plus_const(-r.q_r[i][axis] / POS_SCALE),
                );
            }
        }
    }

    // flight epigraphs
    for leg in 1..=n {
        b.prog.add_cone(
            ConeKind::Soc,
            "flight length",
            vec![
                LinExpr::var(lay.fly[leg - 1]),
                LinExpr::var(qv(leg, 0)).plus(qv(leg - 1, 0), -1.0),
                LinExpr::var(qv(leg, 1)).plus(qv(leg - 1, 1), -1.0),
            ],
        );
    }

    // hover floor and mission time
    for &t in &lay.t_hov {
        b.prog
            .add_nonneg("hover covers uplink", LinExpr::var(t).plus_const(-cfg.t_cm));
    }
    let mut total = LinExpr::constant(cfg.mission_time - m as f64 * cfg.t_agg - nb as f64 * cfg.t_bc);
    for &f in &lay.fly {
        total.terms.push((f, -POS_SCALE / cfg.uav_speed));
    }
    for &t in &lay.t_hov {
        total.terms.push((t, -1.0));
    }
    b.prog.add_nonneg("mission time", total);

    // power boxes and exponential epigraphs
    let b_max = cfg.p_ue_max.ln();
    let c_max = cfg.p_uav_max.ln();
    for k in 0..k_count {
        for s in 0..m {
            if let (Some(bc), Some(pc)) = (lay.b[k][s], lay.p[k][s]) {
                b.prog
                    .add_nonneg("uplink power max", LinExpr::term(bc, -1.0).plus_const(b_max));
                b.prog.add_nonneg(
                    "uplink power floor",
                    LinExpr::var(bc).plus_const(-(b_max - POWER_FLOOR_SPAN)),
                );
                b.prog.add_exp("uplink power", LinExpr::var(bc), LinExpr::var(pc));
            }
        }
    }
    for s in 0..nb {
        let (cc, pc) = (lay.c[s], lay.p_uav[s]);
        b.prog
            .add_nonneg("broadcast power max", LinExpr::term(cc, -1.0).plus_const(c_max));
        b.prog.add_nonneg(
            "broadcast power floor",
            LinExpr::var(cc).plus_const(-(c_max - POWER_FLOOR_SPAN)),
        );
        b.prog.add_exp("broadcast power", LinExpr::var(cc), LinExpr::var(pc));
    }

    // data sign and data floor
    let floor_mb = cfg.data_floor / BITS_PER_MB;
    if relaxed {
        for k in 0..k_count {
            let mut sum = LinExpr::constant(-floor_mb);
            for s in 0..m {
                b.prog.add_nonneg("data sign", LinExpr::var(lay.d_slot[k][s]));
                sum.terms.push((lay.d_slot[k][s], 1.0));
            }
            b.prog.add_nonneg("data floor", sum);
        }
    } else if let RefData::Restricted { a, .. } = &r.data {
        for k in 0..k_count {
            let slots = a[k].iter().filter(|v| **v > 0.5).count() as f64;
            b.prog.add_nonneg("data sign", LinExpr::var(lay.d_ue[k]));
            b.prog
                .add_nonneg("data floor", LinExpr::term(lay.d_ue[k], slots).plus_const(-floor_mb));
        }
    }

    // time slots: t_cm + D Φ <= d_lb / v + t_hov, with d_lb² below the
    // linearized squared segment length
    for s in 0..m {
        for k in 0..k_count {
            let Some((dv, _)) = r.data_term(k, s) else { continue };
            let (dc, _) = b.col(dv)?;
            let phi_mb = cfg.compute_time_per_bit(k) * BITS_PER_MB;
            b.prog.add_nonneg(
                "time slot",
                LinExpr::term(lay.d_lb[s], POS_SCALE / cfg.uav_speed)
                    .plus(lay.t_hov[s], 1.0)
                    .plus(dc, -phi_mb)
                    .plus_const(-cfg.t_cm),
            );
        }
        let seg = b
            .affine(&segment_length_lb(r, s))?
            .scaled(1.0 / (POS_SCALE * POS_SCALE));
        b.prog.add_nonneg("segment sign", LinExpr::var(lay.d_lb[s]));
        b.prog.add_rotated(
            "segment length",
            vec![LinExpr::var(lay.d_lb[s])],
            seg,
            LinExpr::constant(1.0),
        );
    }

    // gain coupling
    for k in 0..k_count {
        for s in 0..m {
            if let Some(ac) = lay.a_tilde[k][s] {
                let lin = b.affine(&coupling_lin(r, k, s))?;
                b.prog
                    .add_exp("gain coupling", LinExpr::term(ac, -1.0).plus_const(r.a_r[k][s]), lin);
            }
        }
    }

    // uplink rate rows
    let q_tilde = uplink_payload(cfg);
    let mut slack_uplink = vec![vec![None; m]; k_count];
    for s in 0..m {
        let r1 = rate_r1_lb(r, s);
        let r1_expr = b.concave(&r1)?;
        for k in 0..k_count {
            if !r.transmits(k, s) {
                continue;
            }
            let mut tau_rhs = r1_expr.clone();
            match &r.data {
                RefData::Relaxed(d) => {
                    let ac = participation_affine_ub(d[k][s], DecisionVar::D { k, slot: s }, cfg.sigmoid_beta);
                    let e = b.affine(&ac)?;
                    tau_rhs.add_expr(&e, -q_tilde);
                }
                RefData::Restricted { .. } => tau_rhs.constant -= q_tilde,
            }
            if opts.soft {
                let sc = b.slack("slack_uplink");
                tau_rhs.terms.push((sc, 1.0));
                slack_uplink[k][s] = Some(sc);
            }
            let tau = b.prog.add_block("tau", 1);
            let mut eq = tau_rhs;
            eq.terms.push((tau, -1.0));
            b.prog.add_zero("rate level", eq);
            let lse = rate_r2_lb(r, k, s);
            let mut zsum = LinExpr::constant(1.0);
            for e in &lse.exponents {
                let z = b.prog.add_block("lse", 1);
                let mut x = b.affine(e)?;
                x.terms.push((tau, -1.0));
                b.prog.add_exp("interference", x, LinExpr::var(z));
                zsum.terms.push((z, -1.0));
            }
            let z = b.prog.add_block("lse", 1);
            b.prog.add_exp(
                "noise",
                LinExpr::term(tau, -1.0).plus_const(lse.log_floor),
                LinExpr::var(z),
            );
            zsum.terms.push((z, -1.0));
            b.prog.add_nonneg("uplink rate", zsum);
        }
    }
    b.prog.layout.slack_uplink = slack_uplink;

    // broadcast rows
    let q_hat = broadcast_payload(cfg);
    let mut slack_bc = vec![vec![None; nb]; k_count];
    let mut bc_rows = vec![vec![false; nb]; k_count];
    for s in 0..nb {
        for k in 0..k_count {
            let Some(row) = broadcast_lhs_surrogate(r, q_hat, k, s) else {
                continue;
            };
            let mut e = b.concave(&row.rhs)?;
            let lhs = b.affine(&row.lhs)?;
            e.add_expr(&lhs, -1.0);
            if opts.soft {
                let sc = b.slack("slack_broadcast");
                e.terms.push((sc, 1.0));
                slack_bc[k][s] = Some(sc);
            }
            b.prog.add_nonneg("broadcast rate", e);
            bc_rows[k][s] = true;
        }
    }
    b.prog.layout.slack_broadcast = slack_bc;
    b.prog.layout.broadcast_rows = bc_rows;

    // accuracy: const + κ Σ_s w_s Σ_k D²/D̂ <= eps_G, D̂ below the tangent of (ΣD)²
    for s in 0..m {
        let tangent =
            sum_data_sq_lb(r, s).ok_or_else(|| EcoError::Infeasible(format!("slot {s} has no participants")))?;
        let mut e = b.affine(&tangent)?;
        e.terms.push((lay.d_hat[s], -1.0));
        b.prog.add_nonneg("share tangent", e);
    }
    if cfg.eps_g.is_finite() {
        let terms = AccuracyTerms::for_scenario(cfg);
        let mut acc = LinExpr::constant(cfg.eps_g - terms.constant);
        for s in 0..m {
            for k in 0..k_count {
                let Some((dv, _)) = r.data_term(k, s) else { continue };
                let (dc, _) = b.col(dv)?;
                let rc = b.prog.add_block("share_sq", 1);
                b.prog.add_rotated(
                    "share square",
                    vec![LinExpr::var(dc)],
                    LinExpr::var(rc),
                    LinExpr::var(lay.d_hat[s]),
                );
                acc.terms.push((rc, -terms.kappa * terms.slot_weight[s]));
            }
        }
        if opts.soft {
            let sc = b.slack("slack_accuracy");
            acc.terms.push((sc, 1.0));
            b.prog.layout.slack_accuracy = Some(sc);
        }
        b.prog.add_nonneg("accuracy", acc);
    }

    // participation floor through tangent cuts of the smooth indicator
    if relaxed {
        let RefData::Relaxed(d_r) = &r.data else { unreachable!() };
        let y0 = b.prog.add_block("indicator", k_count * m);
        for s in 0..m {
            let mut sum = LinExpr::constant(-(cfg.a_min as f64));
            for k in 0..k_count {
                let y = y0 + k * m + s;
                let dc = lay.d_slot[k][s];
                let points = FLOOR_CUT_GRID
                    .iter()
                    .copied()
                    .chain([d_r[k][s]])
                    .chain(opts.extra_cuts.iter().filter(|c| c.0 == k && c.1 == s).map(|c| c.2));
                for p in points {
                    let slope = smooth_indicator_slope(p, cfg.sigmoid_beta);
                    b.prog.add_nonneg(
                        "indicator cut",
                        LinExpr::term(dc, slope)
                            .plus(y, -1.0)
                            .plus_const(smooth_indicator(p, cfg.sigmoid_beta) - slope * p),
                    );
                }
                b.prog
                    .add_nonneg("indicator cap", LinExpr::term(y, -1.0).plus_const(1.0));
                sum.terms.push((y, 1.0));
            }
            b.prog.add_nonneg("participation floor", sum);
        }
    }

    Ok(b.prog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Converged to the solver's reduced tolerances.
    AlmostOptimal,
    Infeasible,
    MaxIterations,
    Failed,
}

impl SolveStatus {
    pub fn usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Objective in joules, penalties included.
    pub objective: f64,
    pub r_prim: f64,
    pub r_dual: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub iterations: u32,
}

/// Default residual tolerance of [`solve`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Interior-point settings beyond the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverProfile {
    pub max_iter: u32,
    pub equilibrate: bool,
    pub static_reg: f64,
    pub max_step_fraction: f64,
}

impl Default for SolverProfile {
    fn default() -> Self {
        Self {
            max_iter: 200,
            equilibrate: true,
            static_reg: 1e-8,
            max_step_fraction: 0.99,
        }
    }
}

/// Solves the program with an interior-point method.
pub fn solve(prog: &ConicProgram, tol: f64) -> Result<SolveResult> {
    solve_with(prog, tol, &SolverProfile::default())
}

/// Fallback profiles tried in order by [`solve_robust`].
pub const FALLBACK_PROFILES: [SolverProfile; 3] = [
    SolverProfile {
        max_iter: 200,
        equilibrate: true,
        static_reg: 1e-8,
        max_step_fraction: 0.99,
    },
    SolverProfile {
        max_iter: 300,
        equilibrate: true,
        static_reg: 1e-8,
        max_step_fraction: 0.9,
    },
    SolverProfile {
        max_iter: 400,
        equilibrate: true,
        static_reg: 1e-8,
        max_step_fraction: 0.75,
    },
];

/// Retries with shorter interior-point steps when the default run stalls.
/// Infeasibility is returned at once.
pub fn solve_robust(prog: &ConicProgram, tol: f64) -> Result<SolveResult> {
    let mut last = None;
    for profile in &FALLBACK_PROFILES {
        let res = solve_with(prog, tol, profile)?;
        if res.status.usable() || res.status == SolveStatus::Infeasible {
            return Ok(res);
        }
        last = Some(res);
    }
    Ok(last.expect("at least one profile"))
}

pub fn solve_with(prog: &ConicProgram, tol: f64, profile: &SolverProfile) -> Result<SolveResult> {
    let n = prog.num_vars;
    let mut q = vec![0.0; n];
    for (c, v) in &prog.objective.terms {
        q[*c] += v;
    }
    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut bvec = Vec::with_capacity(prog.num_rows());
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    let mut row = 0;
    for c in &prog.cones {
        for e in &c.entries {
            for (col, v) in &e.terms {
                ii.push(row);
                jj.push(*col);
                vv.push(-v);
            }
            bvec.push(e.constant);
            row += 1;
        }
        let dim = c.entries.len();
        match (c.kind, cones.last_mut()) {
            (ConeKind::Zero, Some(SupportedConeT::ZeroConeT(d))) => *d += dim,
            (ConeKind::Nonneg, Some(SupportedConeT::NonnegativeConeT(d))) => *d += dim,
            (ConeKind::Zero, _) => cones.push(SupportedConeT::ZeroConeT(dim)),
            (ConeKind::Nonneg, _) => cones.push(SupportedConeT::NonnegativeConeT(dim)),
            (ConeKind::Soc, _) => cones.push(SupportedConeT::SecondOrderConeT(dim)),
            (ConeKind::Exp, _) => cones.push(SupportedConeT::ExponentialConeT()),
        }
    }
    let a = CscMatrix::new_from_triplets(row, n, ii, jj, vv);
    let p = CscMatrix::zeros((n, n));
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(profile.max_iter)
        .equilibrate_enable(profile.equilibrate)
        .static_regularization_constant(profile.static_reg)
        .max_step_fraction(profile.max_step_fraction)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .max_threads(1)
        .direct_solve_method("qdldl".to_string())
        .build()
        .map_err(|e| EcoError::Solver(format!("solver settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &bvec, &cones, settings)
        .map_err(|e| EcoError::Solver(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved => SolveStatus::AlmostOptimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
        _ => SolveStatus::Failed,
    };
    let obj = prog.objective.eval(&sol.x);
    let scale = if prog.phase == Phase::Generic {
        1.0
    } else {
        1.0 / OBJ_SCALE
    };
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
    Ok(SolveResult {
        status,
        x: sol.x.clone(),
        objective: obj * scale,
        r_prim: sol.r_prim,
        r_dual: sol.r_dual,
        gap,
        iterations: sol.iterations,
    })
}

/// Decision quantities read back from a solution vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub q: Vec<Point>,
    /// Uplink powers (W) `[k][slot]`; zero where the UE does not transmit.
    pub p_ue: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub p_uav: Vec<f64>,
    pub t_hov: Vec<f64>,
    /// Relaxed data `[k][slot]` (Mb), empty in the restricted phase.
    pub d_slot: Vec<Vec<f64>>,
    /// Per-UE data (Mb), empty in the relaxed phase.
    pub d_ue: Vec<f64>,
    pub max_slack: f64,
    /// Row holding the largest slack, if any slack is positive.
    pub worst_slack: Option<SlackSite>,
}

/// Location of a penalized slack.
#[derive(Debug, Clone, PartialEq)]
pub struct SlackSite {
    /// `uplink`, `broadcast` or `accuracy`.
    pub family: &'static str,
    pub ue: Option<usize>,
    /// FL slot for uplink rows, broadcast slot for broadcast rows.
    pub slot: Option<usize>,
    pub value: f64,
}

impl std::fmt::Display for SlackSite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} slack {:.3e}", self.family, self.value)?;
        if let (Some(k), Some(s)) = (self.ue, self.slot) {
            write!(f, " at UE {k}, slot {s}")?;
        }
        Ok(())
    }
}

impl ConicProgram {
    /// Every penalized slack at `x`.
    pub fn slack_sites(&self, x: &[f64]) -> Vec<SlackSite> {
        let l = &self.layout;
        let mut out = Vec::new();
        for (family, grid) in [("uplink", &l.slack_uplink), ("broadcast", &l.slack_broadcast)] {
            for (k, row) in grid.iter().enumerate() {
                for (s, c) in row.iter().enumerate() {
                    if let Some(c) = c {
                        out.push(SlackSite {
                            family,
                            ue: Some(k),
                            slot: Some(s),
                            value: x[*c],
                        });
                    }
                }
            }
        }
        if let Some(c) = l.slack_accuracy {
            out.push(SlackSite {
                family: "accuracy",
                ue: None,
                slot: None,
                value: x[c],
            });
        }
        out
    }

    pub fn decode(&self, x: &[f64]) -> Candidate {
        let l = &self.layout;
        let q = l.q.iter().map(|c| Point::new(x[c[0]], x[c[1]]) * POS_SCALE).collect();
        // powers come from the log variables so that they satisfy the box
        let b: Vec<Vec<f64>> =
            l.b.iter()
                .map(|row| row.iter().map(|c| c.map_or(f64::NEG_INFINITY, |c| x[c])).collect())
                .collect();
        let p_ue = b.iter().map(|row| row.iter().map(|v| v.exp()).collect()).collect();
        let p_uav = l.c.iter().map(|c| x[*c].exp()).collect();
        let t_hov = l.t_hov.iter().map(|c| x[*c]).collect();
        let d_slot = l
            .d_slot
            .iter()
            .map(|row| row.iter().map(|c| x[*c].max(0.0)).collect())
            .collect();
        let d_ue = l.d_ue.iter().map(|c| x[*c].max(0.0)).collect();
        let worst_slack = self
            .slack_sites(x)
            .into_iter()
            .filter(|s| s.value > 0.0)
            .max_by(|a, b| a.value.total_cmp(&b.value));
        let max_slack = worst_slack.as_ref().map_or(0.0, |s| s.value);
        Candidate {
            q,
            p_ue,
            b,
            p_uav,
            t_hov,
            d_slot,
            d_ue,
            max_slack,
            worst_slack,
        }
    }

    /// Penalty part of the objective at `x`, joules.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        self.slack_sites(x).iter().map(|s| s.value * SLACK_PENALTY).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::straight_line;
    use approx::assert_relative_eq;

    #[test]
    fn box_lp_corner() {
        // min x - 2y, 0 <= x <= 1, 0 <= y <= 3
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let y = p.add_block("y", 1);
        p.objective = LinExpr::term(x, 1.0).plus(y, -2.0);
        p.add_nonneg("x lo", LinExpr::var(x));
        p.add_nonneg("x hi", LinExpr::term(x, -1.0).plus_const(1.0));
        p.add_nonneg("y lo", LinExpr::var(y));
        p.add_nonneg("y hi", LinExpr::term(y, -1.0).plus_const(3.0));
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.x[x].abs() < 1e-7 && (s.x[y] - 3.0).abs() < 1e-7);
        assert_relative_eq!(s.objective, -6.0, max_relative = 1e-7);
    }

    #[test]
    fn exponential_smoke() {
        // min t s.t. e^x <= t, x >= 0
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        let t = p.add_block("t", 1);
        p.objective = LinExpr::var(t);
        p.add_exp("epigraph", LinExpr::var(x), LinExpr::var(t));
        p.add_nonneg("sign", LinExpr::var(x));
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert!(s.status.usable());
        assert!(s.x[x].abs() < 1e-6);
        assert_relative_eq!(s.objective, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 1);
        p.objective = LinExpr::var(x);
        p.add_nonneg("lo", LinExpr::var(x).plus_const(-2.0));
        p.add_nonneg("hi", LinExpr::term(x, -1.0).plus_const(1.0));
        assert_eq!(solve(&p, DEFAULT_TOL).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn rotated_cone_quadratic_over_linear() {
        // min r s.t. 3² <= r · 2  -> r = 4.5
        let mut p = ConicProgram::new();
        let r = p.add_block("r", 1);
        p.objective = LinExpr::var(r);
        p.add_rotated(
            "qol",
            vec![LinExpr::constant(3.0)],
            LinExpr::var(r),
            LinExpr::constant(2.0),
        );
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_relative_eq!(s.x[r], 4.5, max_relative = 1e-7);
    }

    pub(crate) fn initial_reference(cfg: &ScenarioConfig) -> ReferencePoint {
        let m = cfg.num_fl_slots();
        let k = cfg.num_ues();
        let d = cfg.data_floor / BITS_PER_MB / m as f64;
        ReferencePoint::new(
            cfg,
            straight_line(cfg.q_ini, cfg.q_fin, cfg.n_slots),
            vec![vec![(cfg.p_ue_max / 2.0).ln(); m]; k],
            RefData::Relaxed(vec![vec![d; m]; k]),
        )
        .unwrap()
    }

    #[test]
    fn default_program_block_sizes() {
        let cfg = ScenarioConfig::default();
        let r = initial_reference(&cfg);
        let p = build_phase1(&r, &cfg, &BuildOptions::default()).unwrap();
        let len = |n: &str| p.block(n).unwrap().len;
        assert_eq!(len("q"), 102);
        assert_eq!(len("D"), 294);
        assert_eq!(len("B"), 294);
        assert_eq!(len("A_tilde"), 294);
        assert_eq!(len("C"), 48);
        assert_eq!(len("t_hov"), 49);
        assert_eq!(len("d_lb"), 49);
        assert_eq!(len("D_hat"), 49);
    }

    #[test]
    fn single_ue_rate_rows_are_noise_only() {
        let mut cfg = ScenarioConfig::default();
        cfg.ue_positions.truncate(1);
        cfg.f_cpu.truncate(1);
        cfg.a_min = 1;
        let r = initial_reference(&cfg);
        let p = build_phase1(&r, &cfg, &BuildOptions::default()).unwrap();
        assert_eq!(p.cones.iter().filter(|c| c.tag == "interference").count(), 0);
        assert_eq!(p.cones.iter().filter(|c| c.tag == "noise").count(), cfg.num_fl_slots());
    }

    #[test]
    fn infinite_accuracy_threshold_drops_the_row() {
        let mut cfg = ScenarioConfig::default();
        cfg.eps_g = f64::INFINITY;
        let r = initial_reference(&cfg);
        let p = build_phase1(&r, &cfg, &BuildOptions::default()).unwrap();
        assert!(p.cones.iter().all(|c| c.tag != "accuracy"));
    }

    #[test]
    fn restricted_program_rejects_thin_slots() {
        let cfg = ScenarioConfig::default();
        let base = initial_reference(&cfg);
        let m = cfg.num_fl_slots();
        let mut a = vec![vec![1.0; m]; 6];
        for row in a.iter_mut().skip(1) {
            row[4] = 0.0;
        }
        let r = ReferencePoint::new(
            &cfg,
            base.q_r.clone(),
            base.b_r.clone(),
            RefData::Restricted { a, d: vec![1.0; 6] },
        )
        .unwrap();
        assert!(matches!(
            build_phase2(&r, &cfg, &BuildOptions::default()),
            Err(EcoError::ParticipationFloor { slot: 4, count: 1, .. })
        ));
    }

    #[test]
    fn dump_lists_every_cone() {
        let mut p = ConicProgram::new();
        let x = p.add_block("x", 2);
        p.objective = LinExpr::var(x);
        p.add_nonneg("a", LinExpr::var(x + 1));
        p.add_exp("b", LinExpr::var(x), LinExpr::var(x + 1));
        let text = p.dump();
        assert!(text.starts_with("ecofl-conic 1\nvars 2\nblock x 0 2\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("cone ")).count(), 2);
        assert_eq!(text.lines().filter(|l| l.starts_with("row ")).count(), 4);
    }
}
