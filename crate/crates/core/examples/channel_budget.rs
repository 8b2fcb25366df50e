//! Link budget of the default scenario: path loss, single-UE uplink rate and
//! broadcast rate from the straight-line trajectory midpoint.

use ecofl::channel::{broadcast_rate, distance, linear_gain, path_loss_db, uplink_rate, uplink_sinr};
use ecofl::scenario::{Point, ScenarioConfig};
use ecofl::units::watts_to_dbm;

fn main() -> ecofl::Result<()> {
    let cfg = ScenarioConfig::default();
    let q = Point::new(300.0, 300.0);
    println!("UAV at ({}, {}) m, altitude {} m", q.x, q.y, cfg.uav_altitude);
    println!(
        "noise {:.1} dBm, UE max {:.1} dBm",
        watts_to_dbm(cfg.noise_power),
        watts_to_dbm(cfg.p_ue_max)
    );
    println!(
        "{:>3} {:>9} {:>9} {:>12} {:>12}",
        "k", "dist_m", "PL_dB", "uplink_Mbps", "bcast_Mbps"
    );

    let gains: Vec<f64> = cfg
        .ue_positions
        .iter()
        .map(|g| linear_gain(&q, g, cfg.uav_altitude, cfg.carrier_freq))
        .collect();
    for (k, g) in cfg.ue_positions.iter().enumerate() {
        let d = distance(&q, g, cfg.uav_altitude);
        // alone on the channel at full power
        let mut p = vec![0.0; cfg.num_ues()];
        p[k] = cfg.p_ue_max;
        let up = uplink_rate(uplink_sinr(k, &p, &gains, cfg.noise_power)?, cfg.bandwidth);
        let bc = broadcast_rate(cfg.p_uav_max, gains[k], cfg.noise_power, cfg.bandwidth)?;
        println!(
            "{k:>3} {d:>9.1} {:>9.2} {:>12.1} {:>12.1}",
            path_loss_db(d, cfg.carrier_freq)?,
            up / 1e6,
            bc / 1e6
        );
    }

    // everyone at full power: interference-limited
    let p = vec![cfg.p_ue_max; cfg.num_ues()];
    let worst = (0..cfg.num_ues())
        .map(|k| uplink_sinr(k, &p, &gains, cfg.noise_power).map(|s| uplink_rate(s, cfg.bandwidth)))
        .collect::<ecofl::Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    println!(
        "all UEs at full power: worst uplink {:.2} Mbps, model needs {:.2} Mbps",
        worst / 1e6,
        cfg.model_size / cfg.t_cm / 1e6
    );
    Ok(())
}
