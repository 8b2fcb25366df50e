//! Federated SGD on synthetic strongly convex quadratics.
//!
//! Each UE holds `f_k(w) = ½ (w - c_k)ᵀ M_k (w - c_k)`. The global objective
//! is the dataset-weighted average `f_G = Σ_k p_k f_k`. Stochastic gradients
//! are exact gradients plus `N(0, σ²/d · I)` noise, so the gradient variance
//! is exactly `σ²`.
//!
//! Seeds: the task uses stream 0 of `ChaCha8Rng::seed_from_u64(seed)`;
//! Monte-Carlo repetition `r` of a run uses stream `r + 1` of the run seed.

use crate::error::{EcoError, Result};
use crate::flbound::{bound_trace, weighted_shares, ParticipationPlan};
use crate::scenario::FlHyperparams;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Parameters of a generated task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub num_ues: usize,
    pub dim: usize,
    pub mu: f64,
    pub l_smooth: f64,
    /// Upper bound on `|w* - c_k|²`; the centers are placed at 90% of it.
    pub eps_w: f64,
    /// Stochastic-gradient variance `σ²`.
    pub noise_var: f64,
    /// `|w⁰ - w*|²` of every repetition; the direction is random.
    pub init_gap: f64,
    /// Dataset sizes; equal when empty.
    pub weights: Vec<f64>,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            num_ues: 6,
            dim: 10,
            mu: 1.0,
            l_smooth: 10.0,
            eps_w: 0.1,
            noise_var: 1.0,
            init_gap: 10.0,
            weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub hessians: Vec<DMatrix<f64>>,
    pub centers: Vec<DVector<f64>>,
    /// Normalized dataset weights `p_k`.
    pub weights: Vec<f64>,
    pub noise_var: f64,
    pub init_gap: f64,
    pub w_star: DVector<f64>,
    pub f_star: f64,
}

fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    g.qr().q()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| normal(rng))
}

impl SyntheticTask {
    pub fn generate(spec: &TaskSpec, seed: u64) -> Result<Self> {
        if spec.num_ues == 0 || spec.dim == 0 {
            return Err(EcoError::InvalidArgument(
                "task needs at least one UE and one dimension".into(),
            ));
        }
        if !(spec.mu > 0.0 && spec.l_smooth >= spec.mu) {
            return Err(EcoError::InvalidArgument("need 0 < mu <= L".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hessians = (0..spec.num_ues)
            .map(|_| {
                let q = random_orthogonal(spec.dim, &mut rng);
                let eig = DVector::from_fn(spec.dim, |i, _| match i {
                    0 => spec.mu,
                    i if i == spec.dim - 1 => spec.l_smooth,
                    _ => rng.random_range(spec.mu..=spec.l_smooth),
                });
                let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
                (&m + m.transpose()) * 0.5
            })
            .collect::<Vec<_>>();
        let anchor = gaussian_vector(spec.dim, &mut rng);
        let offsets = (0..spec.num_ues)
            .map(|_| gaussian_vector(spec.dim, &mut rng))
            .collect::<Vec<_>>();
        let weights = normalized_weights(&spec.weights, spec.num_ues)?;
        let probe = Self::from_parts(
            hessians,
            offsets.iter().map(|o| &anchor + o).collect(),
            weights,
            spec.noise_var,
            spec.init_gap,
        )?;
        let spread = probe.max_center_spread();
        if !(spread > 0.0) {
            return Ok(probe);
        }
        // |w* - c_k| scales linearly with the offsets
        let s = (0.9 * spec.eps_w / spread).sqrt();
        let task = Self::from_parts(
            probe.hessians,
            offsets.iter().map(|o| &anchor + o * s).collect(),
            probe.weights,
            spec.noise_var,
            spec.init_gap,
        )?;
        Ok(task)
    }

    pub fn from_parts(
        hessians: Vec<DMatrix<f64>>,
        centers: Vec<DVector<f64>>,
        weights: Vec<f64>,
        noise_var: f64,
        init_gap: f64,
    ) -> Result<Self> {
        let k = hessians.len();
        if centers.len() != k || weights.len() != k {
            return Err(EcoError::Dimension {
                what: "task components",
                expected: k,
                got: centers.len().min(weights.len()),
            });
        }
        if !(noise_var >= 0.0 && init_gap >= 0.0) {
            return Err(EcoError::InvalidArgument(
                "noise and init gap must be nonnegative".into(),
            ));
        }
        let dim = centers[0].len();
        let mut h = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for ((m, c), p) in hessians.iter().zip(&centers).zip(&weights) {
            h += m * *p;
            rhs += m * c * *p;
        }
        let w_star = h
            .cholesky()
            .ok_or_else(|| EcoError::InvalidArgument("global Hessian is not positive definite".into()))?
            .solve(&rhs);
        let mut task = Self {
            hessians,
            centers,
            weights,
            noise_var,
            init_gap,
            w_star,
            f_star: 0.0,
        };
        task.f_star = task.global_loss(&task.w_star.clone());
        Ok(task)
    }

    pub fn num_ues(&self) -> usize {
        self.hessians.len()
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn local_loss(&self, k: usize, w: &DVector<f64>) -> f64 {
        let r = w - &self.centers[k];
        0.5 * r.dot(&(&self.hessians[k] * &r))
    }

    pub fn local_grad(&self, k: usize, w: &DVector<f64>) -> DVector<f64> {
        &self.hessians[k] * (w - &self.centers[k])
    }

    pub fn global_loss(&self, w: &DVector<f64>) -> f64 {
        (0..self.num_ues())
            .map(|k| self.weights[k] * self.local_loss(k, w))
            .sum()
    }

    /// `max_k |w* - c_k|²`.
    pub fn max_center_spread(&self) -> f64 {
        self.centers
            .iter()
            .map(|c| (c - &self.w_star).norm_squared())
            .fold(0.0, f64::max)
    }
}

fn normalized_weights(w: &[f64], k: usize) -> Result<Vec<f64>> {
    if w.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    if w.len() != k {
        return Err(EcoError::Dimension {
            what: "task weights",
            expected: k,
            got: w.len(),
        });
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || w.iter().any(|v| *v < 0.0) {
        return Err(EcoError::InvalidArgument(
            "task weights must be nonnegative with a positive sum".into(),
        ));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

/// Result of a Monte-Carlo federated run.
#[derive(Debug, Clone, PartialEq)]
pub struct FedTrace {
    /// Mean of `f_G(w̄^i) - f_G(w*)` for `i = 0..=total_updates`.
    pub mean_gap: Vec<f64>,
    /// Largest distance between the recursively updated virtual average and
    /// the direct weighted average of the local models.
    pub max_virtual_error: f64,
    pub repetitions: usize,
}

struct RepOutcome {
    gap: Vec<f64>,
    virtual_error: f64,
}

fn run_once(
    task: &SyntheticTask,
    shares: &[Vec<f64>],
    local_iters: usize,
    eta: f64,
    total_updates: usize,
    rng: &mut ChaCha8Rng,
) -> RepOutcome {
    let d = task.dim();
    let k_count = task.num_ues();
    let noise_sd = (task.noise_var / d as f64).sqrt();
    let dir = gaussian_vector(d, rng);
    let dir = if dir.norm() > 0.0 { dir.normalize() } else { dir };
    let mut global = &task.w_star + dir * task.init_gap.sqrt();
    let mut local = vec![global.clone(); k_count];
    let mut virt = global.clone();
    let mut gap = Vec::with_capacity(total_updates + 1);
    gap.push(task.global_loss(&global) - task.f_star);
    let mut err: f64 = 0.0;
    for i in 0..total_updates {
        let slot = i / local_iters;
        let sh = &shares[slot];
        if i % local_iters == 0 {
            for (k, w) in local.iter_mut().enumerate() {
                if sh[k] > 0.0 {
                    w.copy_from(&global);
                }
            }
            virt.copy_from(&global);
        }
        let mut step = DVector::zeros(d);
        for k in 0..k_count {
            if sh[k] == 0.0 {
                continue;
            }
            let noise = DVector::from_fn(d, |_, _| noise_sd * normal(rng));
            let g = task.local_grad(k, &local[k]) + noise;
            local[k] -= &g * eta;
            step += g * sh[k];
        }
        virt -= step * eta;
        let mut avg = DVector::zeros(d);
        for k in 0..k_count {
            if sh[k] > 0.0 {
                avg += &local[k] * sh[k];
            }
        }
        err = err.max((&avg - &virt).norm());
        if (i + 1) % local_iters == 0 {
            global.copy_from(&avg);
        }
        gap.push(task.global_loss(&avg) - task.f_star);
    }
    RepOutcome {
        gap,
        virtual_error: err,
    }
}

/// Runs `I` local SGD steps per slot followed by a weighted aggregation at
/// the UAV, averaging the virtual-model gap over `repetitions` seeded runs.
pub fn run_federated_sgd(
    task: &SyntheticTask,
    plan: &ParticipationPlan,
    local_iters: usize,
    eta: f64,
    total_updates: usize,
    seed: u64,
    repetitions: usize,
) -> Result<FedTrace> {
    if local_iters == 0 || repetitions == 0 {
        return Err(EcoError::InvalidArgument(
            "local_iters and repetitions must be positive".into(),
        ));
    }
    if plan.num_ues() != task.num_ues() {
        return Err(EcoError::Dimension {
            what: "plan UEs",
            expected: task.num_ues(),
            got: plan.num_ues(),
        });
    }
    let slots = total_updates.div_ceil(local_iters);
    if slots > plan.num_slots() {
        return Err(EcoError::IndexOutOfRange {
            what: "update",
            index: total_updates,
            lo: 0,
            hi: plan.num_slots() * local_iters,
        });
    }
    let shares = (0..slots)
        .map(|s| weighted_shares(plan, s))
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<RepOutcome> = (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            run_once(task, &shares, local_iters, eta, total_updates, &mut rng)
        })
        .collect();
    let mut mean_gap = vec![0.0; total_updates + 1];
    let mut max_virtual_error: f64 = 0.0;
    for o in &outcomes {
        for (m, g) in mean_gap.iter_mut().zip(&o.gap) {
            *m += g;
        }
        max_virtual_error = max_virtual_error.max(o.virtual_error);
    }
    mean_gap.iter_mut().for_each(|m| *m /= repetitions as f64);
    Ok(FedTrace {
        mean_gap,
        max_virtual_error,
        repetitions,
    })
}

/// Constants for the bound: exact `L` and `mu` from the Hessian spectra,
/// Monte-Carlo estimates with a 10% margin for the rest (a sample mean for
/// the noise variance, maxima over the initial sphere for the others). The learning rate is
/// `min(0.01, 1/(2L))`.
pub fn estimate_constants(task: &SyntheticTask, seed: u64) -> FlHyperparams {
    const MARGIN: f64 = 1.1;
    const SAMPLES: usize = 2000;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for m in &task.hessians {
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = task.dim();
    let noise_sd = (task.noise_var / d as f64).sqrt();
    let mut var_sum = 0.0;
    let mut sq_max: f64 = 0.0;
    for _ in 0..SAMPLES {
        let xi = DVector::from_fn(d, |_, _| noise_sd * normal(&mut rng));
        var_sum += xi.norm_squared();
        let dir = gaussian_vector(d, &mut rng);
        let w = &task.w_star + dir.normalize() * task.init_gap.sqrt();
        for k in 0..task.num_ues() {
            sq_max = sq_max.max(task.local_grad(k, &w).norm_squared());
        }
    }
    // the variance bound is an expectation, so its estimate is a sample mean
    let eps_v2 = var_sum / SAMPLES as f64 * MARGIN;
    FlHyperparams {
        eta: 0.01f64.min(1.0 / (2.0 * hi)),
        mu: lo,
        l_smooth: hi,
        eps_v2,
        eps_s2: (sq_max + task.noise_var) * MARGIN,
        eps_w: task.max_center_spread() * MARGIN,
        w0_gap: task.init_gap * MARGIN,
    }
}

/// Empirical gap against the bound at every aggregation index of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub seed: u64,
    /// Aggregation indices `I, 2I, ...`.
    pub updates: Vec<usize>,
    pub gap: Vec<f64>,
    pub bound: Vec<f64>,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.gap.iter().zip(&self.bound).all(|(g, b)| g <= b)
    }

    pub fn checkpoints_held(&self) -> usize {
        self.gap.iter().zip(&self.bound).filter(|(g, b)| g <= b).count()
    }
}

/// Generates the task of `seed`, estimates its constants and compares the
/// Monte-Carlo gap under full participation (data proportional to the task
/// weights) with the recursive bound.
pub fn validate_bound(
    spec: &TaskSpec,
    local_iters: usize,
    total_updates: usize,
    repetitions: usize,
    seed: u64,
) -> Result<BoundCheck> {
    let task = SyntheticTask::generate(spec, seed)?;
    let fl = estimate_constants(&task, seed);
    let slots = total_updates.div_ceil(local_iters.max(1));
    let plan = ParticipationPlan::new(
        vec![vec![1.0; slots]; task.num_ues()],
        task.weights.iter().map(|w| vec![*w; slots]).collect(),
    )?;
    let trace = run_federated_sgd(&task, &plan, local_iters, fl.eta, total_updates, seed, repetitions)?;
    let bound = bound_trace(&plan, &fl, local_iters, total_updates)?;
    let updates: Vec<usize> = (local_iters..=total_updates).step_by(local_iters).collect();
    Ok(BoundCheck {
        seed,
        gap: updates.iter().map(|i| trace.mean_gap[*i]).collect(),
        bound: updates.iter().map(|i| bound[*i]).collect(),
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flbound::gap_bound;
    use approx::assert_relative_eq;

    fn identity_task(k: usize, dim: usize, l: f64, noise: f64, gap: f64, same_center: bool) -> SyntheticTask {
        let h = vec![DMatrix::identity(dim, dim) * l; k];
        let c = (0..k)
            .map(|i| DVector::from_element(dim, if same_center { 1.0 } else { i as f64 }))
            .collect();
        SyntheticTask::from_parts(h, c, vec![1.0 / k as f64; k], noise, gap).unwrap()
    }

    #[test]
    fn fixed_point_trace_is_zero() {
        let t = identity_task(1, 3, 2.0, 0.0, 0.0, true);
        let plan = ParticipationPlan::uniform(1, 10, 1.0);
        let tr = run_federated_sgd(&t, &plan, 1, 0.1, 10, 7, 2).unwrap();
        assert!(tr.mean_gap.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn noiseless_quadratic_contracts() {
        let (l, eta) = (2.0, 0.1);
        let t = identity_task(1, 4, l, 0.0, 3.0, true);
        let plan = ParticipationPlan::uniform(1, 20, 1.0);
        let tr = run_federated_sgd(&t, &plan, 1, eta, 20, 1, 1).unwrap();
        let rate = (1.0 - eta * l).powi(2);
        for w in tr.mean_gap.windows(2) {
            assert_relative_eq!(w[1], w[0] * rate, max_relative = 1e-10);
        }
    }

    #[test]
    fn identical_centers_keep_models_equal() {
        let t = identity_task(3, 2, 1.0, 0.0, 1.0, true);
        let plan = ParticipationPlan::uniform(3, 4, 1.0);
        let tr = run_federated_sgd(&t, &plan, 3, 0.2, 12, 3, 1).unwrap();
        assert!(tr.max_virtual_error < 1e-12);
    }

    #[test]
    fn virtual_recursion_matches_direct_average() {
        let task = SyntheticTask::generate(&TaskSpec::default(), 11).unwrap();
        let mut plan = ParticipationPlan::uniform(6, 20, 1.0);
        for s in 0..20 {
            plan.d[s % 6][s] = 0.0;
            plan.d[(s + 2) % 6][s] = 3.0;
        }
        let tr = run_federated_sgd(&task, &plan, 5, 0.01, 100, 5, 4).unwrap();
        assert!(tr.max_virtual_error < 1e-10, "{}", tr.max_virtual_error);
    }

    #[test]
    fn single_step_rounds_match_central_sgd() {
        // with I = 1 every update is an aggregation
        let task = SyntheticTask::generate(&TaskSpec::default(), 2).unwrap();
        let plan = ParticipationPlan::uniform(6, 30, 1.0);
        let tr = run_federated_sgd(&task, &plan, 1, 0.01, 30, 9, 3).unwrap();
        assert!(tr.max_virtual_error < 1e-12);
    }

    #[test]
    fn generated_task_respects_constants() {
        let spec = TaskSpec::default();
        let task = SyntheticTask::generate(&spec, 5).unwrap();
        assert!(task.max_center_spread() <= spec.eps_w * (1.0 + 1e-9));
        let est = estimate_constants(&task, 1);
        assert_relative_eq!(est.l_smooth, spec.l_smooth, max_relative = 1e-9);
        assert_relative_eq!(est.mu, spec.mu, max_relative = 1e-9);
        assert!(est.eps_w >= task.max_center_spread());
        assert!(est.validate().is_ok());
    }

    #[test]
    fn estimates_for_scaled_identity() {
        let t = identity_task(2, 3, 4.0, 0.0, 1.0, false);
        let est = estimate_constants(&t, 0);
        assert_eq!(est.l_smooth, 4.0);
        assert_eq!(est.mu, 4.0);
        assert_eq!(est.eps_v2, 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let task = SyntheticTask::generate(&TaskSpec::default(), 3).unwrap();
        let plan = ParticipationPlan::uniform(6, 4, 1.0);
        let a = run_federated_sgd(&task, &plan, 5, 0.01, 20, 42, 8).unwrap();
        let b = run_federated_sgd(&task, &plan, 5, 0.01, 20, 42, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn validation_helper_matches_direct_run() {
        let c = validate_bound(&TaskSpec::default(), 5, 50, 4, 3).unwrap();
        assert_eq!(c.updates, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(c.checkpoints_held(), c.updates.len());
        assert!(c.holds());
        assert_eq!(c, validate_bound(&TaskSpec::default(), 5, 50, 4, 3).unwrap());
    }

    #[test]
    fn bound_dominates_default_task() {
        let task = SyntheticTask::generate(&TaskSpec::default(), 0).unwrap();
        let fl = estimate_constants(&task, 0);
        let plan = ParticipationPlan::uniform(6, 40, 1.0);
        let tr = run_federated_sgd(&task, &plan, 5, fl.eta, 200, 1, 20).unwrap();
        for i in (5..=200).step_by(5) {
            let b = gap_bound(&plan, &fl, 5, i).unwrap();
            assert!(tr.mean_gap[i] <= b, "i={i} gap={} bound={b}", tr.mean_gap[i]);
        }
    }
}
