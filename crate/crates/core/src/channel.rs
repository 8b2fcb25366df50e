//! Line-of-sight channel: distance, free-space path loss, SINR and rates.

use crate::error::{EcoError, Result};
use crate::scenario::{DecisionState, Point, ScenarioConfig};
use std::f64::consts::PI;

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Path loss of one link, in dB and as a linear gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGain {
    pub g_db: f64,
    pub g_lin: f64,
}

impl LinkGain {
    pub fn from_db(g_db: f64) -> Self {
        Self {
            g_db,
            g_lin: 10f64.powf(-g_db / 10.0),
        }
    }

    /// Gain of the link between a UAV at horizontal position `q` and a UE at `ue`.
    pub fn between(q: &Point, ue: &Point, altitude: f64, f_c: f64) -> Result<Self> {
        Ok(Self::from_db(path_loss_db(distance(q, ue, altitude), f_c)?))
    }
}

/// 3-D distance between the UAV at altitude `h` and a ground UE.
pub fn distance(q: &Point, ue: &Point, h: f64) -> f64 {
    ((q - ue).norm_squared() + h * h).sqrt()
}

/// Free-space path loss `20 log10(4 pi f d / c)` in dB.
pub fn path_loss_db(d: f64, f_c: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(EcoError::InvalidArgument(format!("distance must be positive, got {d}")));
    }
    Ok(20.0 * (4.0 * PI * f_c * d / SPEED_OF_LIGHT).log10())
}

/// `(c / (4 pi f_c))^2`: the linear gain times squared distance.
pub fn gain_constant(f_c: f64) -> f64 {
    (SPEED_OF_LIGHT / (4.0 * PI * f_c)).powi(2)
}

/// Linear gain computed directly from the squared 3-D distance.
pub fn linear_gain(q: &Point, ue: &Point, h: f64, f_c: f64) -> f64 {
    gain_constant(f_c) / ((q - ue).norm_squared() + h * h)
}

/// Uplink SINR of UE `k` given every UE's power and linear gain.
pub fn uplink_sinr(k: usize, p: &[f64], gains: &[f64], noise: f64) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(EcoError::InvalidArgument(format!(
            "noise power must be positive, got {noise}"
        )));
    }
    if p.len() != gains.len() {
        return Err(EcoError::Dimension {
            what: "gains",
            expected: p.len(),
            got: gains.len(),
        });
    }
    let interference: f64 = p
        .iter()
        .zip(gains)
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, (p, g))| p * g)
        .sum();
    Ok(p[k] * gains[k] / (interference + noise))
}

/// Shannon rate `W log2(1 + sinr)` (bits/s).
pub fn uplink_rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Broadcast rate to one UE; interference-free.
pub fn broadcast_rate(p_uav: f64, gain: f64, noise: f64, bandwidth: f64) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(EcoError::InvalidArgument(format!(
            "noise power must be positive, got {noise}"
        )));
    }
    Ok(uplink_rate(p_uav * gain / noise, bandwidth))
}

/// Slack of the uplink and broadcast rate constraints, in bits; negative
/// entries are violations.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `t_cm R_k[n] - a_k[n] Q` per `[k][n-1]`.
    pub uplink: Vec<Vec<f64>>,
    /// `t_bc R^bc_k[n] - a_k[n+1] Q` per `[k][n-1]`, `n = 1..=N-2`.
    pub broadcast: Vec<Vec<f64>>,
}

impl RateReport {
    pub fn min_slack(&self) -> f64 {
        self.uplink
            .iter()
            .chain(self.broadcast.iter())
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Linear gains `[k][n-1]` along the FL slots of a trajectory.
pub fn slot_gains(q: &[Point], cfg: &ScenarioConfig) -> Vec<Vec<f64>> {
    cfg.ue_positions
        .iter()
        .map(|ue| {
            (1..cfg.n_slots)
                .map(|n| linear_gain(&q[n], ue, cfg.uav_altitude, cfg.carrier_freq))
                .collect()
        })
        .collect()
}

pub fn check_rate_constraints(state: &DecisionState, cfg: &ScenarioConfig) -> Result<RateReport> {
    state.check_dimensions(cfg)?;
    let k_count = cfg.num_ues();
    let gains = slot_gains(&state.q, cfg);
    let mut uplink = vec![vec![0.0; cfg.num_fl_slots()]; k_count];
    for s in 0..cfg.num_fl_slots() {
        let p: Vec<f64> = (0..k_count).map(|k| state.p_ue[k][s]).collect();
        let g: Vec<f64> = (0..k_count).map(|k| gains[k][s]).collect();
        for k in 0..k_count {
            let sinr = uplink_sinr(k, &p, &g, cfg.noise_power)?;
            uplink[k][s] = cfg.t_cm * uplink_rate(sinr, cfg.bandwidth) - state.a[k][s] * cfg.model_size;
        }
    }
    let mut broadcast = vec![vec![0.0; cfg.num_bc_slots()]; k_count];
    for s in 0..cfg.num_bc_slots() {
        for k in 0..k_count {
            let r = broadcast_rate(state.p_uav[s], gains[k][s], cfg.noise_power, cfg.bandwidth)?;
            broadcast[k][s] = cfg.t_bc * r - state.a[k][s + 1] * cfg.model_size;
        }
    }
    Ok(RateReport { uplink, broadcast })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn distance_examples() {
        let g = Point::new(0.0, 0.0);
        assert_eq!(distance(&g, &g, 150.0), 150.0);
        assert_eq!(distance(&Point::new(3.0, 4.0), &g, 12.0), 13.0);
        let d = distance(&Point::new(0.0, 300.0), &Point::new(100.0, 400.0), 150.0);
        assert_relative_eq!(d, (10000.0f64 + 10000.0 + 22500.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn path_loss_examples() {
        // argument 10 -> 20 dB, argument 1 -> 0 dB
        let f = 1e9;
        let d10 = 10.0 * SPEED_OF_LIGHT / (4.0 * PI * f);
        assert_relative_eq!(path_loss_db(d10, f).unwrap(), 20.0, max_relative = 1e-12);
        assert!(path_loss_db(d10 / 10.0, f).unwrap().abs() < 1e-12);
        let pl = path_loss_db(150.0, 2.4e9).unwrap();
        assert!((pl - 83.57).abs() < 0.01, "{pl}");
        assert!(path_loss_db(0.0, f).is_err());
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(uplink_sinr(0, &[0.0], &[1e-9], 1e-11).unwrap(), 0.0);
        assert_relative_eq!(
            uplink_sinr(0, &[1.0], &[1e-9], 1e-11).unwrap(),
            100.0,
            max_relative = 1e-12
        );
        // p g = sigma^2 for two users
        let s = uplink_sinr(1, &[1.0, 1.0], &[1e-11, 1e-11], 1e-11).unwrap();
        assert_relative_eq!(s, 0.5, max_relative = 1e-12);
        assert!(uplink_sinr(0, &[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn rate_examples() {
        assert_eq!(uplink_rate(1.0, 20e6), 2.0e7);
        assert_eq!(uplink_rate(0.0, 20e6), 0.0);
        assert_relative_eq!(uplink_rate(440.0, 20e6), 20e6 * 441f64.log2(), max_relative = 1e-14);
        assert_eq!(broadcast_rate(0.0, 1e-9, 1e-11, 20e6).unwrap(), 0.0);
        assert_relative_eq!(
            broadcast_rate(1.0, 1e-11, 1e-11, 20e6).unwrap(),
            2.0e7,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            broadcast_rate(1.0, 4e-9, 1e-11, 20e6).unwrap(),
            20e6 * 401f64.log2(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn gain_via_db_matches_direct() {
        for d in [1.0, 150.0, 687.0, 5e4] {
            let via_db = LinkGain::from_db(path_loss_db(d, 2.4e9).unwrap()).g_lin;
            let direct = (SPEED_OF_LIGHT / (4.0 * PI * 2.4e9 * d)).powi(2);
            assert_relative_eq!(via_db, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn monotone_in_powers() {
        let g = [2e-9, 1e-9, 5e-10];
        let base = uplink_sinr(0, &[0.5, 0.5, 0.5], &g, 1e-11).unwrap();
        assert!(uplink_sinr(0, &[0.6, 0.5, 0.5], &g, 1e-11).unwrap() > base);
        assert!(uplink_sinr(0, &[0.5, 0.6, 0.5], &g, 1e-11).unwrap() < base);
    }
}
