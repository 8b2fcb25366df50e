//! Convex surrogates used by the successive convex approximation.
//!
//! Every builder returns plain function data (affine forms, concave
//! quadratics, log-sum-exp terms) over named decision variables. The data can
//! be evaluated and differentiated at any point, which is what the tests use,
//! and is compiled into cone rows by [`crate::subproblem`].
//!
//! Units inside forms: positions in meters, data sizes in megabits, powers as
//! natural logs of watts.

use crate::channel::gain_constant;
use crate::error::{EcoError, Result};
use crate::scenario::{Point, ScenarioConfig, BITS_PER_MB};
use std::collections::BTreeMap;

/// `ã_r` below this value is lifted before the broadcast tangent is taken;
/// the log term has an unbounded slope at zero.
pub const BROADCAST_TANGENT_FLOOR: f64 = 1e-3;

/// A scalar decision variable. Slots are FL-slot vector indices (`n - 1`)
/// except `Q`, which indexes trajectory points directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecisionVar {
    /// Coordinate `axis` (0 = x, 1 = y) of `q[n]`, meters.
    Q { n: usize, axis: usize },
    /// Log uplink power `ln p_k`.
    B { k: usize, slot: usize },
    /// Log gain upper bound.
    ATilde { k: usize, slot: usize },
    /// Log broadcast power, broadcast slot index.
    C { slot: usize },
    /// Relaxed per-slot data, Mb.
    D { k: usize, slot: usize },
    /// Per-UE data, Mb.
    DUe { k: usize },
}

/// `constant + Σ coeff · var`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineForm {
    pub constant: f64,
    pub coeffs: Vec<(DecisionVar, f64)>,
}

impl AffineForm {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            coeffs: Vec::new(),
        }
    }

    pub fn var(v: DecisionVar) -> Self {
        Self {
            constant: 0.0,
            coeffs: vec![(v, 1.0)],
        }
    }

    /// Adds `scale * other`, merging repeated variables.
    pub fn add_scaled(&mut self, other: &AffineForm, scale: f64) {
        self.constant += scale * other.constant;
        let mut map: BTreeMap<DecisionVar, f64> = self.coeffs.drain(..).collect();
        for (v, c) in &other.coeffs {
            *map.entry(*v).or_insert(0.0) += scale * c;
        }
        self.coeffs = map.into_iter().collect();
    }

    pub fn eval(&self, x: &dyn Fn(DecisionVar) -> f64) -> f64 {
        self.constant + self.coeffs.iter().map(|(v, c)| c * x(*v)).sum::<f64>()
    }

    pub fn gradient(&self) -> Vec<(DecisionVar, f64)> {
        self.coeffs.clone()
    }
}

/// `weight · ‖q[n] - center‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredDistance {
    pub n: usize,
    pub center: Point,
    pub weight: f64,
}

fn point_of(x: &dyn Fn(DecisionVar) -> f64, n: usize) -> Point {
    Point::new(x(DecisionVar::Q { n, axis: 0 }), x(DecisionVar::Q { n, axis: 1 }))
}

/// Affine part plus nonpositively weighted squared distances; concave.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConcaveForm {
    pub affine: AffineForm,
    pub quad: Vec<SquaredDistance>,
}

impl ConcaveForm {
    pub fn add_scaled(&mut self, other: &ConcaveForm, scale: f64) {
        self.affine.add_scaled(&other.affine, scale);
        self.quad.extend(other.quad.iter().map(|t| SquaredDistance {
            weight: t.weight * scale,
            ..*t
        }));
    }

    pub fn eval(&self, x: &dyn Fn(DecisionVar) -> f64) -> f64 {
        self.affine.eval(x)
            + self
                .quad
                .iter()
                .map(|t| t.weight * (point_of(x, t.n) - t.center).norm_squared())
                .sum::<f64>()
    }

    pub fn gradient(&self, x: &dyn Fn(DecisionVar) -> f64) -> Vec<(DecisionVar, f64)> {
        let mut map: BTreeMap<DecisionVar, f64> = self.affine.coeffs.iter().copied().collect();
        for t in &self.quad {
            let d = point_of(x, t.n) - t.center;
            for axis in 0..2 {
                *map.entry(DecisionVar::Q { n: t.n, axis }).or_insert(0.0) += 2.0 * t.weight * d[axis];
            }
        }
        map.into_iter().collect()
    }

    pub fn is_concave(&self) -> bool {
        self.quad.iter().all(|t| t.weight <= 0.0)
    }
}

/// `ln(Σ_i e^{x_i} + e^{log_floor})`, convex.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSumExp {
    pub exponents: Vec<AffineForm>,
    pub log_floor: f64,
}

impl LogSumExp {
    fn values(&self, x: &dyn Fn(DecisionVar) -> f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.exponents.iter().map(|e| e.eval(x)).collect();
        v.push(self.log_floor);
        v
    }

    pub fn eval(&self, x: &dyn Fn(DecisionVar) -> f64) -> f64 {
        log_sum_exp(&self.values(x))
    }

    pub fn gradient(&self, x: &dyn Fn(DecisionVar) -> f64) -> Vec<(DecisionVar, f64)> {
        let v = self.values(x);
        let m = log_sum_exp(&v);
        let mut map: BTreeMap<DecisionVar, f64> = BTreeMap::new();
        for (e, vi) in self.exponents.iter().zip(&v) {
            let w = (vi - m).exp();
            for (var, c) in &e.coeffs {
                *map.entry(*var).or_insert(0.0) += w * c;
            }
        }
        map.into_iter().collect()
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Smooth participation indicator `tanh(βD)`, `D` in Mb.
pub fn smooth_indicator(d_mb: f64, beta: f64) -> f64 {
    (beta * d_mb).tanh()
}

/// Derivative of [`smooth_indicator`] in `D`.
pub fn smooth_indicator_slope(d_mb: f64, beta: f64) -> f64 {
    beta / (beta * d_mb).cosh().powi(2)
}

/// `ln(e^x - 1)` for `x > 0`.
pub fn log_expm1(x: f64) -> f64 {
    x + (-(-x).exp_m1()).ln()
}

/// Derivative of [`log_expm1`].
pub fn log_expm1_slope(x: f64) -> f64 {
    1.0 / -(-x).exp_m1()
}

/// `Q ln2 / (t_cm W)`: normalized uplink payload.
pub fn uplink_payload(cfg: &ScenarioConfig) -> f64 {
    cfg.model_size * std::f64::consts::LN_2 / (cfg.t_cm * cfg.bandwidth)
}

/// `Q ln2 / (t_bc W)`: normalized broadcast payload.
pub fn broadcast_payload(cfg: &ScenarioConfig) -> f64 {
    cfg.model_size * std::f64::consts::LN_2 / (cfg.t_bc * cfg.bandwidth)
}

/// Data side of the reference point.
#[derive(Debug, Clone, PartialEq)]
pub enum RefData {
    /// Relaxed per-slot data `[k][slot]`, Mb.
    Relaxed(Vec<Vec<f64>>),
    /// Binary participation `[k][slot]` and per-UE data, Mb.
    Restricted { a: Vec<Vec<f64>>, d: Vec<f64> },
}

/// Expansion point of one SCA iteration with cached link quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePoint {
    pub q_r: Vec<Point>,
    /// `[k][slot]` log powers.
    pub b_r: Vec<Vec<f64>>,
    pub data: RefData,
    /// `ln g̃` at the reference, `[k][slot]`.
    pub a_r: Vec<Vec<f64>>,
    /// `‖q_r - g_k‖² + H²`, `[k][slot]`.
    pub s_r: Vec<Vec<f64>>,
    pub ue: Vec<Point>,
    pub altitude: f64,
    /// `(c / 4πf_c)²`.
    pub gain_const: f64,
    pub noise: f64,
    pub beta: f64,
}

impl ReferencePoint {
    pub fn new(cfg: &ScenarioConfig, q_r: Vec<Point>, b_r: Vec<Vec<f64>>, data: RefData) -> Result<Self> {
        let k = cfg.num_ues();
        let m = cfg.num_fl_slots();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(EcoError::Dimension { what, expected, got })
            }
        };
        dim("reference points", cfg.n_slots + 1, q_r.len())?;
        dim("reference power rows", k, b_r.len())?;
        for row in &b_r {
            dim("reference power slots", m, row.len())?;
        }
        match &data {
            RefData::Relaxed(d) => {
                dim("reference data rows", k, d.len())?;
                for row in d {
                    dim("reference data slots", m, row.len())?;
                }
                if d.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(EcoError::NonFinite("reference data"));
                }
            }
            RefData::Restricted { a, d } => {
                dim("reference participation rows", k, a.len())?;
                dim("reference data sizes", k, d.len())?;
                for row in a {
                    dim("reference participation slots", m, row.len())?;
                }
                if d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(EcoError::NonFinite("reference data"));
                }
            }
        }
        if q_r.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(EcoError::NonFinite("reference trajectory"));
        }
        if b_r.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EcoError::NonFinite("reference powers"));
        }
        let gain_const = gain_constant(cfg.carrier_freq);
        let h2 = cfg.uav_altitude * cfg.uav_altitude;
        let s_r: Vec<Vec<f64>> = cfg
            .ue_positions
            .iter()
            .map(|g| (0..m).map(|s| (q_r[s + 1] - g).norm_squared() + h2).collect())
            .collect();
        let a_r = s_r
            .iter()
            .map(|row| row.iter().map(|s| (gain_const / s).ln()).collect())
            .collect();
        Ok(Self {
            q_r,
            b_r,
            data,
            a_r,
            s_r,
            ue: cfg.ue_positions.clone(),
            altitude: cfg.uav_altitude,
            gain_const,
            noise: cfg.noise_power,
            beta: cfg.sigmoid_beta,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.ue.len()
    }

    pub fn num_slots(&self) -> usize {
        self.b_r.first().map_or(0, Vec::len)
    }

    /// Whether UE `k` transmits in `slot` (always in the relaxed phase).
    pub fn transmits(&self, k: usize, slot: usize) -> bool {
        match &self.data {
            RefData::Relaxed(_) => true,
            RefData::Restricted { a, .. } => a[k][slot] > 0.5,
        }
    }

    /// The data variable behind `D_k[n]` and its reference value (Mb), or
    /// `None` when the UE sits out the slot.
    pub fn data_term(&self, k: usize, slot: usize) -> Option<(DecisionVar, f64)> {
        match &self.data {
            RefData::Relaxed(d) => Some((DecisionVar::D { k, slot }, d[k][slot])),
            RefData::Restricted { a, d } => (a[k][slot] > 0.5).then_some((DecisionVar::DUe { k }, d[k])),
        }
    }

    /// Reference data of `D_k[n]` in bits.
    pub fn data_bits(&self, k: usize, slot: usize) -> f64 {
        self.data_term(k, slot).map_or(0.0, |(_, d)| d * BITS_PER_MB)
    }
}

/// Linearization of `‖q[n] - q[n-1]‖²` at the reference, `n = slot + 1`.
pub fn segment_length_lb(r: &ReferencePoint, slot: usize) -> AffineForm {
    let n = slot + 1;
    let dr = r.q_r[n] - r.q_r[n - 1];
    let mut coeffs = Vec::with_capacity(4);
    for axis in 0..2 {
        coeffs.push((DecisionVar::Q { n, axis }, 2.0 * dr[axis]));
        coeffs.push((DecisionVar::Q { n: n - 1, axis }, -2.0 * dr[axis]));
    }
    AffineForm {
        constant: -dr.norm_squared(),
        coeffs,
    }
}

/// Concave minorant of `ln g̃_k(q[n])` built from the tangent of `ln S`.
pub fn gain_log_lb(r: &ReferencePoint, k: usize, slot: usize) -> ConcaveForm {
    let s = r.s_r[k][slot];
    ConcaveForm {
        affine: AffineForm::constant(r.a_r[k][slot] + 1.0 - r.altitude * r.altitude / s),
        quad: vec![SquaredDistance {
            n: slot + 1,
            center: r.ue[k],
            weight: -1.0 / s,
        }],
    }
}

/// Softmax weights `e^{B_r+A_r} / (Σ e^{B_r+A_r} + σ²)` over transmitting UEs.
pub fn r1_weights(r: &ReferencePoint, slot: usize) -> Vec<f64> {
    let k = r.num_ues();
    let mut e: Vec<f64> = (0..k)
        .map(|i| {
            if r.transmits(i, slot) {
                r.b_r[i][slot] + r.a_r[i][slot]
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    e.push(r.noise.ln());
    let m = log_sum_exp(&e);
    e[..k].iter().map(|x| (x - m).exp()).collect()
}

/// Concave lower bound on `R1 = ln(Σ e^{B_i+A_i} + σ²)`.
pub fn rate_r1_lb(r: &ReferencePoint, slot: usize) -> ConcaveForm {
    let k = r.num_ues();
    let mut e: Vec<f64> = (0..k)
        .filter(|i| r.transmits(*i, slot))
        .map(|i| r.b_r[i][slot] + r.a_r[i][slot])
        .collect();
    e.push(r.noise.ln());
    let w = r1_weights(r, slot);
    let mut f = ConcaveForm {
        affine: AffineForm::constant(log_sum_exp(&e)),
        quad: Vec::new(),
    };
    for i in (0..k).filter(|i| r.transmits(*i, slot)) {
        let mut a = gain_log_lb(r, i, slot);
        a.affine.constant -= r.a_r[i][slot];
        f.add_scaled(&a, w[i]);
        let mut b = AffineForm::var(DecisionVar::B { k: i, slot });
        b.constant = -r.b_r[i][slot];
        f.affine.add_scaled(&b, w[i]);
    }
    f
}

/// `R2_lb = -ln(Σ_{i≠k} e^{B_i + Ã_i} + σ²)`, stored as the log-sum-exp.
pub fn rate_r2_lb(r: &ReferencePoint, k: usize, slot: usize) -> LogSumExp {
    let exponents = (0..r.num_ues())
        .filter(|i| *i != k && r.transmits(*i, slot))
        .map(|i| {
            let mut e = AffineForm::var(DecisionVar::B { k: i, slot });
            e.add_scaled(&AffineForm::var(DecisionVar::ATilde { k: i, slot }), 1.0);
            e
        })
        .collect();
    LogSumExp {
        exponents,
        log_floor: r.noise.ln(),
    }
}

/// Linearized coupling `S_lin / S_r`; the program requires
/// `e^{A_r - Ã} <= S_lin / S_r`, which implies `g̃ <= e^Ã`.
pub fn coupling_lin(r: &ReferencePoint, k: usize, slot: usize) -> AffineForm {
    let n = slot + 1;
    let s = r.s_r[k][slot];
    let dq = r.q_r[n] - r.ue[k];
    let mut coeffs = Vec::with_capacity(2);
    for axis in 0..2 {
        coeffs.push((DecisionVar::Q { n, axis }, 2.0 * dq[axis] / s));
    }
    AffineForm {
        constant: (s - 2.0 * dq.dot(&r.q_r[n])) / s,
        coeffs,
    }
}

/// Tangent `ǎ` of the smooth indicator at `d_r` (Mb), as a form in `var`.
pub fn participation_affine_ub(d_r: f64, var: DecisionVar, beta: f64) -> AffineForm {
    let slope = smooth_indicator_slope(d_r, beta);
    AffineForm {
        constant: smooth_indicator(d_r, beta) - slope * d_r,
        coeffs: vec![(var, slope)],
    }
}

/// Tangent of `(Σ_j D_j[n])²` at the reference; `None` if nobody takes part.
pub fn sum_data_sq_lb(r: &ReferencePoint, slot: usize) -> Option<AffineForm> {
    let terms: Vec<(DecisionVar, f64)> = (0..r.num_ues()).filter_map(|k| r.data_term(k, slot)).collect();
    if terms.is_empty() {
        return None;
    }
    let total: f64 = terms.iter().map(|(_, d)| d).sum();
    let mut f = AffineForm::constant(-total * total);
    for (v, _) in &terms {
        f.add_scaled(&AffineForm::var(*v), 2.0 * total);
    }
    Some(f)
}

/// Broadcast constraint of UE `k` in broadcast slot `bc_slot`:
/// `lhs <= rhs`, where `rhs = C + A_lb - ln σ²` is concave.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastRow {
    pub lhs: AffineForm,
    pub rhs: ConcaveForm,
}

/// Builds the broadcast row. The receiving FL slot is `bc_slot + 1` and the
/// link gain is taken at `q[bc_slot + 1]`. Returns `None` in the restricted
/// phase when the UE does not take part in the next slot.
pub fn broadcast_lhs_surrogate(r: &ReferencePoint, q_hat: f64, k: usize, bc_slot: usize) -> Option<BroadcastRow> {
    let next = bc_slot + 1;
    let lhs = match &r.data {
        RefData::Relaxed(d) => {
            let d_r = d[k][next];
            let a_r = smooth_indicator(d_r, r.beta).max(BROADCAST_TANGENT_FLOOR);
            let x0 = a_r * q_hat;
            let slope = log_expm1_slope(x0) * q_hat;
            let a_check = participation_affine_ub(d_r, DecisionVar::D { k, slot: next }, r.beta);
            let mut f = AffineForm::constant(log_expm1(x0) - slope * a_r);
            f.add_scaled(&a_check, slope);
            f
        }
        RefData::Restricted { a, .. } => {
            if a[k][next] <= 0.5 {
                return None;
            }
            AffineForm::constant(log_expm1(q_hat))
        }
    };
    let mut rhs = gain_log_lb(r, k, bc_slot);
    rhs.affine.constant -= r.noise.ln();
    rhs.affine
        .add_scaled(&AffineForm::var(DecisionVar::C { slot: bc_slot }), 1.0);
    Some(BroadcastRow { lhs, rhs })
}
