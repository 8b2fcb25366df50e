//! Convergence bound of partially participating federated SGD and the
//! accuracy constraint built on it.
//!
//! Updates are indexed `i = 0, 1, ...`; update `i` belongs to FL slot
//! `i / I` (vector index), so every slot contributes `I` local updates.

use crate::error::{EcoError, Result};
use crate::scenario::{DecisionState, FlHyperparams, ScenarioConfig};

/// Participation and effective data per `[k][slot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationPlan {
    pub a: Vec<Vec<f64>>,
    /// Effective data `D_k[n]` in bits.
    pub d: Vec<Vec<f64>>,
}

impl ParticipationPlan {
    pub fn new(a: Vec<Vec<f64>>, d: Vec<Vec<f64>>) -> Result<Self> {
        if a.len() != d.len() {
            return Err(EcoError::Dimension {
                what: "plan rows",
                expected: a.len(),
                got: d.len(),
            });
        }
        let m = a.first().map_or(0, Vec::len);
        for row in a.iter().chain(d.iter()) {
            if row.len() != m {
                return Err(EcoError::Dimension {
                    what: "plan slots",
                    expected: m,
                    got: row.len(),
                });
            }
        }
        if d.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(EcoError::InvalidArgument(
                "effective data must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { a, d })
    }

    /// Every UE joins every slot with the same data size.
    pub fn uniform(num_ues: usize, num_slots: usize, bits: f64) -> Self {
        Self {
            a: vec![vec![1.0; num_slots]; num_ues],
            d: vec![vec![bits; num_slots]; num_ues],
        }
    }

    /// Binary participation `a` with per-UE data sizes.
    pub fn restricted(a: Vec<Vec<f64>>, data: &[f64]) -> Result<Self> {
        let d = a
            .iter()
            .zip(data)
            .map(|(row, dk)| row.iter().map(|ak| ak * dk).collect())
            .collect();
        if data.len() != a.len() {
            return Err(EcoError::Dimension {
                what: "per-UE data sizes",
                expected: a.len(),
                got: data.len(),
            });
        }
        Self::new(a, d)
    }

    pub fn from_state(state: &DecisionState) -> Result<Self> {
        Self::new(state.a.clone(), state.effective_data_matrix())
    }

    pub fn num_ues(&self) -> usize {
        self.d.len()
    }

    pub fn num_slots(&self) -> usize {
        self.d.first().map_or(0, Vec::len)
    }

    /// Number of UEs with positive data in `slot`.
    pub fn participants(&self, slot: usize) -> usize {
        self.d.iter().filter(|row| row[slot] > 0.0).count()
    }

    /// Checks the per-slot participant floor and the per-UE data floor.
    pub fn check_floors(&self, a_min: usize, data_floor: f64) -> Result<()> {
        for slot in 0..self.num_slots() {
            let count = self.participants(slot);
            if count < a_min {
                return Err(EcoError::ParticipationFloor { slot, count, a_min });
            }
        }
        for (k, row) in self.d.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if total < data_floor * (1.0 - 1e-9) {
                return Err(EcoError::InvalidArgument(format!(
                    "UE {k} trains on {total} bits, below the floor of {data_floor}"
                )));
            }
        }
        Ok(())
    }
}

/// Constants of the per-update bound recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub omega: f64,
    pub zeta: f64,
    pub a1: f64,
}

impl BoundConstants {
    pub fn new(fl: &FlHyperparams, local_iters: usize) -> Self {
        let eta = fl.eta;
        let l = fl.l_smooth;
        let i = local_iters as f64;
        let zeta = 2.0 * eta * (1.0 - 2.0 * eta * l);
        let a1 = (1.0 + zeta / (2.0 * eta)) * i * i * eta * eta * fl.eps_s2
            + (eta * l * l * fl.eps_w / 2.0) * (zeta + 4.0 * eta);
        Self {
            omega: fl.omega(),
            zeta,
            a1,
        }
    }
}

/// Normalized shares `D_k[n] / sum_j D_j[n]` of one slot.
pub fn weighted_shares(plan: &ParticipationPlan, slot: usize) -> Result<Vec<f64>> {
    if slot >= plan.num_slots() {
        return Err(EcoError::IndexOutOfRange {
            what: "slot",
            index: slot,
            lo: 0,
            hi: plan.num_slots().saturating_sub(1),
        });
    }
    let total: f64 = plan.d.iter().map(|row| row[slot]).sum();
    if !(total > 0.0) {
        return Err(EcoError::EmptySlot { slot });
    }
    Ok(plan.d.iter().map(|row| row[slot] / total).collect())
}

/// `sum_k D̄_k[n]^2` for every slot.
pub fn share_square_sums(plan: &ParticipationPlan) -> Result<Vec<f64>> {
    (0..plan.num_slots())
        .map(|s| Ok(weighted_shares(plan, s)?.iter().map(|x| x * x).sum()))
        .collect()
}

fn update_shares(plan: &ParticipationPlan, local_iters: usize, upto: usize) -> Result<Vec<f64>> {
    if local_iters == 0 {
        return Err(EcoError::InvalidArgument("local_iters must be positive".into()));
    }
    let per_slot = share_square_sums(plan)?;
    let needed = upto.div_ceil(local_iters);
    if needed > per_slot.len() {
        return Err(EcoError::IndexOutOfRange {
            what: "update",
            index: upto,
            lo: 0,
            hi: per_slot.len() * local_iters,
        });
    }
    Ok((0..upto).map(|l| per_slot[l / local_iters]).collect())
}

/// Bound on `E[f_G(w̄^{upto})] - f_G(w*)` in closed form.
pub fn gap_bound(plan: &ParticipationPlan, fl: &FlHyperparams, local_iters: usize, upto: usize) -> Result<f64> {
    let c = BoundConstants::new(fl, local_iters);
    let s = update_shares(plan, local_iters, upto)?;
    let w = c.omega;
    let eta = fl.eta;
    let geo = c.a1 * (1.0 - w.powi(upto as i32)) / (eta * fl.mu);
    let noise: f64 = s
        .iter()
        .enumerate()
        .map(|(l, sl)| w.powi((upto - 1 - l) as i32) * sl)
        .sum::<f64>()
        * eta
        * eta
        * fl.eps_v2;
    Ok(fl.l_smooth / 2.0 * (w.powi(upto as i32) * fl.w0_gap + geo + noise))
}

/// Bound trace for updates `0..=updates`, one recursion step per update.
pub fn bound_trace(
    plan: &ParticipationPlan,
    fl: &FlHyperparams,
    local_iters: usize,
    updates: usize,
) -> Result<Vec<f64>> {
    let c = BoundConstants::new(fl, local_iters);
    let s = update_shares(plan, local_iters, updates)?;
    let mut e = fl.w0_gap;
    let mut out = Vec::with_capacity(updates + 1);
    out.push(fl.l_smooth / 2.0 * e);
    for sl in s {
        e = c.omega * e + c.a1 + fl.eta * fl.eta * sl * fl.eps_v2;
        out.push(fl.l_smooth / 2.0 * e);
    }
    Ok(out)
}

/// Same value as [`gap_bound`], evaluated by unrolling the recursion.
pub fn gap_bound_recursive(
    plan: &ParticipationPlan,
    fl: &FlHyperparams,
    local_iters: usize,
    upto: usize,
) -> Result<f64> {
    Ok(*bound_trace(plan, fl, local_iters, upto)?
        .last()
        .expect("trace is never empty"))
}

/// Accuracy constraint split into `constant + kappa * sum_n weight[n] * S[n]`,
/// where `S[n] = sum_k D̄_k[n]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTerms {
    pub constant: f64,
    pub kappa: f64,
    /// `omega^((M-n) I) (1 - omega^I) / (eta mu)` per slot.
    pub slot_weight: Vec<f64>,
}

impl AccuracyTerms {
    pub fn new(fl: &FlHyperparams, num_fl_slots: usize, local_iters: usize) -> Self {
        let c = BoundConstants::new(fl, local_iters);
        let w = c.omega;
        let horizon = (num_fl_slots * local_iters) as i32;
        let em = fl.eta * fl.mu;
        let constant = fl.l_smooth / 2.0 * (w.powi(horizon) * fl.w0_gap + c.a1 * (1.0 - w.powi(horizon)) / em);
        let per_slot = (1.0 - w.powi(local_iters as i32)) / em;
        let slot_weight = (1..=num_fl_slots)
            .map(|n| w.powi(((num_fl_slots - n) * local_iters) as i32) * per_slot)
            .collect();
        Self {
            constant,
            kappa: fl.l_smooth / 2.0 * fl.eta * fl.eta * fl.eps_v2,
            slot_weight,
        }
    }

    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self::new(&cfg.fl, cfg.num_fl_slots(), cfg.local_iters)
    }

    pub fn evaluate(&self, share_squares: &[f64]) -> f64 {
        self.constant
            + self.kappa
                * self
                    .slot_weight
                    .iter()
                    .zip(share_squares)
                    .map(|(w, s)| w * s)
                    .sum::<f64>()
    }
}

/// Left side of the accuracy constraint over `(N-1) I` updates; accuracy
/// holds iff the value is at most `eps_G`.
pub fn accuracy_lhs(plan: &ParticipationPlan, fl: &FlHyperparams, n_slots: usize, local_iters: usize) -> Result<f64> {
    let m = n_slots.saturating_sub(1);
    if plan.num_slots() != m {
        return Err(EcoError::Dimension {
            what: "plan slots",
            expected: m,
            got: plan.num_slots(),
        });
    }
    let s = share_square_sums(plan)?;
    Ok(AccuracyTerms::new(fl, m, local_iters).evaluate(&s))
}

/// `-2<a,b> <= |a|^2 / eta + eta |b|^2`.
pub fn young_inequality_check(a: &[f64], b: &[f64], eta: f64) -> bool {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    let lhs = -2.0 * dot;
    let rhs = na / eta + eta * nb;
    lhs <= rhs + 1e-12 * rhs.abs().max(lhs.abs())
}
