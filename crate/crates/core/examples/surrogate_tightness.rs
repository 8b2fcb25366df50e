//! How far each SCA surrogate sits from the function it replaces as the
//! evaluation point moves away from the reference.

use ecofl::channel::linear_gain;
use ecofl::scenario::{straight_line, Point, ScenarioConfig};
use ecofl::surrogates::{
    gain_log_lb, participation_affine_ub, rate_r1_lb, segment_length_lb, smooth_indicator, sum_data_sq_lb, DecisionVar,
    RefData, ReferencePoint,
};

fn main() -> ecofl::Result<()> {
    let cfg = ScenarioConfig::default();
    let m = cfg.num_fl_slots();
    let k = cfg.num_ues();
    let q_r = straight_line(cfg.q_ini, cfg.q_fin, cfg.n_slots);
    let b_r = vec![vec![-1.0; m]; k];
    let d_r = vec![vec![1.0; m]; k];
    let r = ReferencePoint::new(&cfg, q_r.clone(), b_r.clone(), RefData::Relaxed(d_r))?;
    let slot = 20;
    let n = slot + 1;

    println!(
        "{:>8} {:>12} {:>12} {:>12} {:>12}",
        "shift_m", "seg_gap", "gain_gap", "r1_gap", "tanh_gap"
    );
    for shift in [0.0, 5.0, 20.0, 50.0, 100.0, 200.0] {
        let mut q = q_r.clone();
        q[n] += Point::new(0.3 * shift, shift);
        let d = 1.0 + shift / 100.0;
        let x = |v: DecisionVar| match v {
            DecisionVar::Q { n, axis } => q[n][axis],
            DecisionVar::B { k, slot } => b_r[k][slot],
            DecisionVar::D { .. } => d,
            _ => 0.0,
        };
        let seg_true = (q[n] - q[n - 1]).norm_squared();
        let seg = seg_true - segment_length_lb(&r, slot).eval(&x);
        let g_true = linear_gain(&q[n], &cfg.ue_positions[0], cfg.uav_altitude, cfg.carrier_freq).ln();
        let gain = g_true - gain_log_lb(&r, 0, slot).eval(&x);
        let r1_true = ((0..k)
            .map(|i| b_r[i][slot].exp() * linear_gain(&q[n], &cfg.ue_positions[i], cfg.uav_altitude, cfg.carrier_freq))
            .sum::<f64>()
            + cfg.noise_power)
            .ln();
        let r1 = r1_true - rate_r1_lb(&r, slot).eval(&x);
        let tanh = participation_affine_ub(1.0, DecisionVar::D { k: 0, slot }, cfg.sigmoid_beta).eval(&x)
            - smooth_indicator(d, cfg.sigmoid_beta);
        println!("{shift:>8.1} {seg:>12.4e} {gain:>12.4e} {r1:>12.4e} {tanh:>12.4e}");
    }

    let tangent = sum_data_sq_lb(&r, slot).expect("everyone participates");
    for d in [0.0, 0.5, 1.0, 2.0] {
        let t = tangent.eval(&|_| d);
        println!(
            "all D = {d}: (sum D)^2 = {:.2}, tangent = {t:.2}",
            (k as f64 * d).powi(2)
        );
    }
    Ok(())
}
