//! Energy accounting: UAV propulsion, hover, broadcast, and UE uplink and
//! computation energy. Model-aggregation energy on the UAV is not counted.

use crate::error::Result;
use crate::scenario::{fly_times, DecisionState, RotorModel, ScenarioConfig};

/// Propulsion power (W) of a rotary-wing UAV in level flight at speed `v`.
pub fn propulsion_power(v: f64, rotor: &RotorModel) -> f64 {
    let v2 = v * v;
    let v0_2 = rotor.v0 * rotor.v0;
    let blade = rotor.blade_profile * (1.0 + 3.0 * v2 / (rotor.u_tip * rotor.u_tip));
    let induced_inner = (1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2);
    let induced = rotor.induced * induced_inner.max(0.0).sqrt();
    let parasite = 0.5 * rotor.d0 * rotor.rho * rotor.s * rotor.disc_area * v2 * v;
    blade + induced + parasite
}

/// Hover power `P(0) = P0 + Pi`.
pub fn hover_power(rotor: &RotorModel) -> f64 {
    rotor.blade_profile + rotor.induced
}

/// Per-component energy of one decision state (J).
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    /// Flight energy over all `N` legs.
    pub e_fly: f64,
    /// Hover energy over the FL slots.
    pub e_hov: f64,
    /// Uplink energy per UE.
    pub e_cm: Vec<f64>,
    /// Computation energy per UE.
    pub e_cp: Vec<f64>,
    /// Broadcast energy.
    pub e_bc: f64,
    pub e_total: f64,
}

impl EnergyBreakdown {
    pub fn components_sum(&self) -> f64 {
        self.e_fly + self.e_hov + self.e_cm.iter().sum::<f64>() + self.e_cp.iter().sum::<f64>() + self.e_bc
    }
}

pub fn total_energy(state: &DecisionState, cfg: &ScenarioConfig) -> Result<EnergyBreakdown> {
    state.check_dimensions(cfg)?;
    let p_fly = propulsion_power(cfg.uav_speed, &cfg.rotor);
    let p_hov = hover_power(&cfg.rotor);
    let e_fly = fly_times(&state.q, cfg.uav_speed).iter().sum::<f64>() * p_fly;
    let e_hov = state.t_hov.iter().sum::<f64>() * p_hov;
    let e_cm = state
        .p_ue
        .iter()
        .map(|row| cfg.t_cm * row.iter().sum::<f64>())
        .collect::<Vec<_>>();
    let e_cp = (0..cfg.num_ues())
        .map(|k| {
            let per_bit = cfg.compute_energy_per_bit(k);
            (0..cfg.num_fl_slots())
                .map(|s| state.effective_data(k, s) * per_bit)
                .sum()
        })
        .collect::<Vec<f64>>();
    let e_bc = cfg.t_bc * state.p_uav.iter().sum::<f64>();
    let e_total = e_fly + e_hov + e_cm.iter().sum::<f64>() + e_cp.iter().sum::<f64>() + e_bc;
    Ok(EnergyBreakdown {
        e_fly,
        e_hov,
        e_cm,
        e_cp,
        e_bc,
        e_total,
    })
}
