//! Rotary-wing propulsion power versus speed, and the energy of flying the
//! default 600 m mission leg at different speeds.

use ecofl::energy::{hover_power, propulsion_power};
use ecofl::scenario::ScenarioConfig;

fn main() {
    let cfg = ScenarioConfig::default();
    let rotor = &cfg.rotor;
    println!("hover power P(0) = {:.2} W", hover_power(rotor));
    println!("{:>6} {:>10} {:>12}", "v_m/s", "P_W", "E_600m_J");
    for v in [0.0, 2.0, 5.0, 8.0, 10.0, 12.0, 15.0, 20.0, 25.0, 30.0] {
        let p = propulsion_power(v, rotor);
        let e = if v > 0.0 {
            format!("{:.1}", p * 600.0 / v)
        } else {
            "-".into()
        };
        println!("{v:>6.1} {p:>10.2} {e:>12}");
    }
    let (v_best, e_best) = (1..=300)
        .map(|i| i as f64 * 0.1)
        .map(|v| (v, propulsion_power(v, rotor) / v))
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    println!("energy per meter is lowest near {v_best:.1} m/s ({e_best:.2} J/m)");
}
