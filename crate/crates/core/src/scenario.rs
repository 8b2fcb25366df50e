//! Scenario configuration, the decision-state record and time-slot bookkeeping.
//!
//! Indexing conventions used throughout the crate:
//!
//! * trajectory points `q[0..=N]`, with `q[0] = q_ini` and `q[N] = q_fin`;
//! * FL slots `n = 1..=N-1` are stored at vector index `n - 1`;
//! * broadcast slots `n = 1..=N-2` are stored at vector index `n - 1`.

use crate::error::{EcoError, Result};
use crate::units::de_quantity;
use nalgebra::Vector2;
use serde::{Deserialize, Deserializer};
use std::path::Path;

/// Horizontal 2-D position in meters.
pub type Point = Vector2<f64>;

/// Bits per megabit at the reporting boundary.
pub const BITS_PER_MB: f64 = 1e6;

/// Learning-side constants of the convergence bound.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlHyperparams {
    /// Learning rate.
    pub eta: f64,
    /// Strong-convexity modulus.
    pub mu: f64,
    /// Smoothness constant.
    #[serde(rename = "L")]
    pub l_smooth: f64,
    /// Bound on the stochastic-gradient variance.
    pub eps_v2: f64,
    /// Bound on the expected squared stochastic-gradient norm.
    pub eps_s2: f64,
    /// Bound on the spread between global and local optima.
    pub eps_w: f64,
    /// Expected initial squared distance to the optimum.
    pub w0_gap: f64,
}

impl Default for FlHyperparams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            mu: 1.0,
            l_smooth: 10.0,
            eps_v2: 80.0,
            eps_s2: 1.0,
            eps_w: 0.1,
            w0_gap: 10.0,
        }
    }
}

impl FlHyperparams {
    /// Per-update contraction factor `1 - eta * mu`.
    pub fn omega(&self) -> f64 {
        1.0 - self.eta * self.mu
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EcoError::Config(m.to_string()));
        if !(self.mu > 0.0) {
            return bad("fl.mu must be positive");
        }
        if self.l_smooth < self.mu {
            return bad("fl.L must be at least fl.mu");
        }
        if [self.eps_v2, self.eps_s2, self.eps_w, self.w0_gap]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("fl bounds must be nonnegative");
        }
        if !(self.eta > 0.0) || self.eta > 1.0 / (2.0 * self.l_smooth) * (1.0 + 1e-12) {
            return bad("fl.eta must lie in (0, 1/(2L)]");
        }
        let w = self.omega();
        if !(w > 0.0 && w < 1.0) {
            return bad("1 - eta*mu must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Rotary-wing propulsion model coefficients.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorModel {
    /// Blade profile power in hover (W).
    #[serde(rename = "P0", deserialize_with = "de_quantity::power")]
    pub blade_profile: f64,
    /// Induced power in hover (W).
    #[serde(rename = "Pi", deserialize_with = "de_quantity::power")]
    pub induced: f64,
    /// Rotor blade tip speed (m/s).
    #[serde(deserialize_with = "de_quantity::speed")]
    pub u_tip: f64,
    /// Mean rotor induced velocity in hover (m/s).
    #[serde(deserialize_with = "de_quantity::speed")]
    pub v0: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    /// Air density (kg/m^3).
    pub rho: f64,
    /// Rotor solidity.
    pub s: f64,
    /// Rotor disc area (m^2).
    #[serde(rename = "A")]
    pub disc_area: f64,
}

impl Default for RotorModel {
    fn default() -> Self {
        Self {
            blade_profile: 79.86,
            induced: 88.63,
            u_tip: 120.0,
            v0: 4.03,
            d0: 0.6,
            rho: 1.225,
            s: 0.05,
            disc_area: 0.503,
        }
    }
}

/// Every constant of one scenario. Immutable after validation.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Extents of the flight area (m).
    pub area: [f64; 2],
    #[serde(deserialize_with = "de_points")]
    pub ue_positions: Vec<Point>,
    #[serde(deserialize_with = "de_quantity::length")]
    pub uav_altitude: f64,
    #[serde(deserialize_with = "de_quantity::speed")]
    pub uav_speed: f64,
    #[serde(deserialize_with = "de_point")]
    pub q_ini: Point,
    #[serde(deserialize_with = "de_point")]
    pub q_fin: Point,

    /// Number of time slots `N`.
    pub n_slots: usize,
    #[serde(deserialize_with = "de_quantity::time")]
    pub mission_time: f64,
    #[serde(deserialize_with = "de_quantity::time")]
    pub t_cm: f64,
    #[serde(deserialize_with = "de_quantity::time")]
    pub t_agg: f64,
    #[serde(deserialize_with = "de_quantity::time")]
    pub t_bc: f64,

    #[serde(deserialize_with = "de_quantity::frequency")]
    pub bandwidth: f64,
    #[serde(deserialize_with = "de_quantity::frequency")]
    pub carrier_freq: f64,
    #[serde(deserialize_with = "de_quantity::power")]
    pub noise_power: f64,
    #[serde(deserialize_with = "de_quantity::power")]
    pub p_ue_max: f64,
    #[serde(deserialize_with = "de_quantity::power")]
    pub p_uav_max: f64,

    /// Model size (bits).
    #[serde(deserialize_with = "de_quantity::bits")]
    pub model_size: f64,
    pub cycles_per_bit: f64,
    /// Chip energy coefficient (J s^2 / cycle^3).
    pub chip_coeff: f64,
    /// Per-UE CPU frequency (Hz); a single value is broadcast to all UEs.
    #[serde(deserialize_with = "de_frequencies")]
    pub f_cpu: Vec<f64>,
    /// Local SGD iterations per slot.
    pub local_iters: usize,

    pub a_min: usize,
    /// Per-UE total data floor (bits).
    #[serde(deserialize_with = "de_quantity::bits")]
    pub data_floor: f64,
    /// Accuracy threshold; `inf` removes the accuracy constraint.
    pub eps_g: f64,
    /// Sharpness of the smooth participation indicator, per megabit.
    pub sigmoid_beta: f64,

    pub fl: FlHyperparams,
    pub rotor: RotorModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let ue_positions = [
            [0.0, 400.0],
            [100.0, 600.0],
            [100.0, 400.0],
            [400.0, 600.0],
            [400.0, 400.0],
            [500.0, 400.0],
        ]
        .iter()
        .map(|p| Point::new(p[0], p[1]))
        .collect::<Vec<_>>();
        let k = ue_positions.len();
        Self {
            area: [600.0, 600.0],
            ue_positions,
            uav_altitude: 150.0,
            uav_speed: 10.0,
            q_ini: Point::new(0.0, 300.0),
            q_fin: Point::new(600.0, 300.0),
            n_slots: 50,
            mission_time: 500.0,
            t_cm: 2.0,
            t_agg: 0.5,
            t_bc: 0.5,
            bandwidth: 20e6,
            carrier_freq: 2.4e9,
            noise_power: 1e-3 * 10f64.powf(-80.0 / 10.0),
            p_ue_max: 1e-3 * 10f64.powf(31.8 / 10.0),
            p_uav_max: 1e-3 * 10f64.powf(30.0 / 10.0),
            model_size: 8.065e6,
            cycles_per_bit: 10.0,
            chip_coeff: 1e-25,
            f_cpu: vec![1e9; k],
            local_iters: 5,
            a_min: 2,
            data_floor: 50e6,
            eps_g: 10.0,
            sigmoid_beta: 5.0,
            fl: FlHyperparams::default(),
            rotor: RotorModel::default(),
        }
    }
}

fn de_point<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Point, D::Error> {
    let p = <[f64; 2]>::deserialize(d)?;
    Ok(Point::new(p[0], p[1]))
}

fn de_points<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Point>, D::Error> {
    let ps = Vec::<[f64; 2]>::deserialize(d)?;
    Ok(ps.into_iter().map(|p| Point::new(p[0], p[1])).collect())
}

fn de_frequencies<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(#[serde(deserialize_with = "de_quantity::frequency")] f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(f) => vec![f],
        OneOrMany::Many(v) => v,
    })
}

impl ScenarioConfig {
    /// Parses a TOML scenario. Unknown keys are rejected; missing keys keep
    /// their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text)?;
        let k = cfg.ue_positions.len();
        if cfg.f_cpu.len() == 1 && k != 1 {
            cfg.f_cpu = vec![cfg.f_cpu[0]; k];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    /// Number of FL slots, `N - 1`.
    pub fn num_fl_slots(&self) -> usize {
        self.n_slots - 1
    }

    /// Number of broadcast slots, `N - 2`.
    pub fn num_bc_slots(&self) -> usize {
        self.n_slots - 2
    }

    /// Local computation time per bit for UE `k` (s/bit).
    pub fn compute_time_per_bit(&self, k: usize) -> f64 {
        self.local_iters as f64 * self.cycles_per_bit / self.f_cpu[k]
    }

    /// Computation energy per bit for UE `k` (J/bit).
    pub fn compute_energy_per_bit(&self, k: usize) -> f64 {
        self.local_iters as f64 * self.chip_coeff * self.cycles_per_bit * self.f_cpu[k].powi(2)
    }

    /// A copy with a different model size, as used by the size sweeps.
    pub fn with_model_size(&self, bits: f64) -> Self {
        Self {
            model_size: bits,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EcoError::Config(m));
        let k = self.num_ues();
        if k == 0 {
            return bad("at least one UE is required".into());
        }
        if self.a_min < 1 || self.a_min > k {
            return bad(format!("a_min must lie in 1..={k}"));
        }
        if self.n_slots < 3 {
            return bad("n_slots must be at least 3".into());
        }
        if self.f_cpu.len() != k {
            return bad(format!("f_cpu has {} entries for {k} UEs", self.f_cpu.len()));
        }
        let positive = [
            ("uav_altitude", self.uav_altitude),
            ("uav_speed", self.uav_speed),
            ("mission_time", self.mission_time),
            ("t_cm", self.t_cm),
            ("t_agg", self.t_agg),
            ("t_bc", self.t_bc),
            ("bandwidth", self.bandwidth),
            ("carrier_freq", self.carrier_freq),
            ("noise_power", self.noise_power),
            ("p_ue_max", self.p_ue_max),
            ("p_uav_max", self.p_uav_max),
            ("model_size", self.model_size),
            ("cycles_per_bit", self.cycles_per_bit),
            ("chip_coeff", self.chip_coeff),
            ("sigmoid_beta", self.sigmoid_beta),
            ("area.x", self.area[0]),
            ("area.y", self.area[1]),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite"));
            }
        }
        if self.f_cpu.iter().any(|f| !(*f > 0.0)) {
            return bad("f_cpu entries must be positive".into());
        }
        if self.local_iters == 0 {
            return bad("local_iters must be positive".into());
        }
        if !(self.data_floor >= 0.0) {
            return bad("data_floor must be nonnegative".into());
        }
        if !(self.eps_g > 0.0) {
            return bad("eps_g must be positive".into());
        }
        for (name, p) in [("q_ini", self.q_ini), ("q_fin", self.q_fin)] {
            if !self.inside_area(&p) {
                return bad(format!("{name} lies outside the area"));
            }
        }
        self.fl.validate()?;
        let r = &self.rotor;
        if [r.blade_profile, r.induced, r.u_tip, r.v0, r.d0, r.rho, r.s, r.disc_area]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return bad("rotor coefficients must be positive".into());
        }
        Ok(())
    }

    fn inside_area(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.area[0] && p.y <= self.area[1]
    }
}

/// How data is assigned to UEs.
#[derive(Debug, Clone, PartialEq)]
pub enum DataAllocation {
    /// One data size `D_k` per UE (bits), used in every slot the UE joins.
    PerUe(Vec<f64>),
    /// Free per-slot data `D_k[n]` (bits), indexed `[k][n-1]`.
    Relaxed(Vec<Vec<f64>>),
}

/// One complete candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    /// Trajectory `q[0..=N]`.
    pub q: Vec<Point>,
    /// Participation level per `[k][n-1]`: binary in restricted mode,
    /// the smooth indicator in relaxed mode.
    pub a: Vec<Vec<f64>>,
    pub data: DataAllocation,
    /// UE uplink powers (W) per `[k][n-1]`.
    pub p_ue: Vec<Vec<f64>>,
    /// UAV broadcast powers (W) per `n-1`, `n = 1..=N-2`.
    pub p_uav: Vec<f64>,
    /// Hover durations (s) per `n-1`.
    pub t_hov: Vec<f64>,
}

impl DecisionState {
    /// Effective data `a_k[n] D_k` (restricted) or `D_k[n]` (relaxed), bits.
    pub fn effective_data(&self, k: usize, slot: usize) -> f64 {
        match &self.data {
            DataAllocation::PerUe(d) => self.a[k][slot] * d[k],
            DataAllocation::Relaxed(d) => d[k][slot],
        }
    }

    /// Effective-data matrix `[k][n-1]`.
    pub fn effective_data_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.a.len())
            .map(|k| (0..self.a[k].len()).map(|s| self.effective_data(k, s)).collect())
            .collect()
    }

    /// Checks all vector lengths against the scenario.
    pub fn check_dimensions(&self, cfg: &ScenarioConfig) -> Result<()> {
        let k = cfg.num_ues();
        let m = cfg.num_fl_slots();
        let dim = |what, expected, got| {
            if expected == got {
                Ok(())
            } else {
                Err(EcoError::Dimension { what, expected, got })
            }
        };
        dim("trajectory points", cfg.n_slots + 1, self.q.len())?;
        dim("participation rows", k, self.a.len())?;
        dim("uplink power rows", k, self.p_ue.len())?;
        for row in self.a.iter().chain(self.p_ue.iter()) {
            dim("slots per row", m, row.len())?;
        }
        dim("broadcast powers", cfg.num_bc_slots(), self.p_uav.len())?;
        dim("hover times", m, self.t_hov.len())?;
        match &self.data {
            DataAllocation::PerUe(d) => dim("per-UE data sizes", k, d.len())?,
            DataAllocation::Relaxed(d) => {
                dim("relaxed data rows", k, d.len())?;
                for row in d {
                    dim("relaxed data slots", m, row.len())?;
                }
            }
        }
        Ok(())
    }
}

/// Flight time of leg `n` (from `q[n-1]` to `q[n]`), `1 <= n <= N`.
pub fn fly_time(q: &[Point], n: usize, speed: f64) -> Result<f64> {
    if n == 0 || n >= q.len() {
        return Err(EcoError::IndexOutOfRange {
            what: "flight leg",
            index: n,
            lo: 1,
            hi: q.len().saturating_sub(1),
        });
    }
    Ok((q[n] - q[n - 1]).norm() / speed)
}

/// All leg flight times `t_fly[1..=N]`, indexed `n-1`.
pub fn fly_times(q: &[Point], speed: f64) -> Vec<f64> {
    q.windows(2).map(|w| (w[1] - w[0]).norm() / speed).collect()
}

/// Slack of every time-slot constraint; negative entries are violations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeslotReport {
    /// `t_hov[n] - t_cm` per slot.
    pub hover: Vec<f64>,
    /// `t_fly[n] + t_hov[n] - t_cm - a D Phi` per `[k][n-1]` (s).
    pub compute: Vec<Vec<f64>>,
    /// `T` minus the total mission time (s).
    pub total: f64,
}

impl TimeslotReport {
    pub fn min_slack(&self) -> f64 {
        self.hover
            .iter()
            .chain(self.compute.iter().flatten())
            .copied()
            .fold(self.total, f64::min)
    }
}

/// Total mission time: all flight legs, hover plus aggregation per FL slot,
/// and `N - 2` broadcasts.
pub fn mission_time(q: &[Point], t_hov: &[f64], cfg: &ScenarioConfig) -> f64 {
    let fly: f64 = fly_times(q, cfg.uav_speed).iter().sum();
    let hov: f64 = t_hov.iter().map(|t| t + cfg.t_agg).sum();
    fly + hov + cfg.num_bc_slots() as f64 * cfg.t_bc
}

pub fn check_timeslot_feasibility(state: &DecisionState, cfg: &ScenarioConfig) -> Result<TimeslotReport> {
    state.check_dimensions(cfg)?;
    let t_fly = fly_times(&state.q, cfg.uav_speed);
    let hover = state.t_hov.iter().map(|t| t - cfg.t_cm).collect();
    let compute = (0..cfg.num_ues())
        .map(|k| {
            let phi = cfg.compute_time_per_bit(k);
            (0..cfg.num_fl_slots())
                .map(|s| t_fly[s] + state.t_hov[s] - cfg.t_cm - state.effective_data(k, s) * phi)
                .collect()
        })
        .collect();
    let total = cfg.mission_time - mission_time(&state.q, &state.t_hov, cfg);
    Ok(TimeslotReport { hover, compute, total })
}

/// `n+1` equidistant points on the segment `a -> b`.
pub fn straight_line(a: Point, b: Point, n: usize) -> Vec<Point> {
    (0..=n).map(|i| a + (b - a) * (i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idle_state(cfg: &ScenarioConfig) -> DecisionState {
        let k = cfg.num_ues();
        let m = cfg.num_fl_slots();
        DecisionState {
            q: straight_line(cfg.q_ini, cfg.q_fin, cfg.n_slots),
            a: vec![vec![0.0; m]; k],
            data: DataAllocation::PerUe(vec![0.0; k]),
            p_ue: vec![vec![0.0; m]; k],
            p_uav: vec![0.0; cfg.num_bc_slots()],
            t_hov: vec![cfg.t_cm; m],
        }
    }

    #[test]
    fn fly_time_examples() {
        let q = vec![Point::new(0.0, 300.0), Point::new(60.0, 300.0)];
        assert_eq!(fly_time(&q, 1, 10.0).unwrap(), 6.0);
        let q = vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0)];
        assert_eq!(fly_time(&q, 1, 1.0).unwrap(), 5.0);
        let q = vec![Point::new(7.0, 7.0), Point::new(7.0, 7.0)];
        assert_eq!(fly_time(&q, 1, 10.0).unwrap(), 0.0);
        assert!(fly_time(&q, 0, 1.0).is_err());
        assert!(fly_time(&q, 2, 1.0).is_err());
    }

    #[test]
    fn default_config_validates() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.p_ue_max - 1.513_561_248_436_208).abs() < 1e-12);
        assert!((cfg.fl.omega() - 0.99).abs() < 1e-15);
    }

    #[test]
    fn idle_state_has_nonnegative_slack() {
        let cfg = ScenarioConfig::default();
        let r = check_timeslot_feasibility(&idle_state(&cfg), &cfg).unwrap();
        assert!(r.min_slack() >= 0.0);
        // 60 s flight, 49 * (2 + 0.5) s per slot, 48 * 0.5 s broadcast.
        assert!((r.total - (500.0 - 60.0 - 122.5 - 24.0)).abs() < 1e-9);
    }

    #[test]
    fn short_hover_is_reported() {
        let cfg = ScenarioConfig::default();
        let mut st = idle_state(&cfg);
        st.t_hov[3] = cfg.t_cm - 0.1;
        let r = check_timeslot_feasibility(&st, &cfg).unwrap();
        assert!((r.hover[3] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn compute_time_is_linear_in_data() {
        let cfg = ScenarioConfig::default();
        let mut st = idle_state(&cfg);
        st.a[0][0] = 1.0;
        st.data = DataAllocation::PerUe(vec![1e6; cfg.num_ues()]);
        let base = check_timeslot_feasibility(&idle_state(&cfg), &cfg).unwrap();
        let one = check_timeslot_feasibility(&st, &cfg).unwrap();
        st.data = DataAllocation::PerUe(vec![2e6; cfg.num_ues()]);
        let two = check_timeslot_feasibility(&st, &cfg).unwrap();
        let d1 = base.compute[0][0] - one.compute[0][0];
        let d2 = base.compute[0][0] - two.compute[0][0];
        assert!((d2 - 2.0 * d1).abs() < 1e-12);
        assert!((d1 - 0.05).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip_with_units() {
        let text = r#"
            noise_power = "-80 dBm"
            p_uav_max = "30 dBm"
            carrier_freq = "2.4 GHz"
            model_size = "10.5133 Mb"
            f_cpu = "1 GHz"
            [fl]
            eta = 0.02
            L = 20.0
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert!((cfg.noise_power - 1e-11).abs() < 1e-24);
        assert_eq!(cfg.model_size, 10.5133e6);
        assert_eq!(cfg.f_cpu.len(), 6);
        assert_eq!(cfg.fl.l_smooth, 20.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("bandwith = 1e6").is_err());
        assert!(ScenarioConfig::from_toml_str("[fl]\netaa = 0.1").is_err());
    }

    #[test]
    fn invalid_learning_rate_rejected() {
        let text = "[fl]\neta = 0.1\nL = 10.0";
        assert!(ScenarioConfig::from_toml_str(text).is_err());
    }
}
