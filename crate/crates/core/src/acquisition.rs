//! Acquisition functions, equilibrium search and batch selection.
//!
//! `u1(x)` is the influence predictive mean and `u2(x) = u1(x) + kappa *
//! sqrt(V(x))`. Both are maximised by a damped fixed-point iteration
//! `x <- clip(x + eta * grad u(x))` started from every data point; the
//! distinct limits form the equilibrium set from which a batch is chosen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Bounds;
use crate::error::{AboError, Result};
use crate::influence::{dot, SurrogateState};

/// Successful steps double the step size up to `step * MAX_STEP_GROWTH`.
const MAX_STEP_GROWTH: f64 = 1024.0;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    U1,
    U2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStrategy {
    /// Highest predictive variance first.
    Variance,
    /// Highest `u2` first.
    Value,
    /// `u1` ranking for the early rounds, variance ranking afterwards.
    TwoStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub kappa: f64,
    /// Initial damping `eta` of the fixed-point step.
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Minimum box-normalised distance between distinct candidates.
    pub dedup_tol: f64,
    /// Floor on `|A|` in the `u2` gradient denominator.
    pub variance_floor: f64,
    pub batch_size: usize,
    pub strategy: BatchStrategy,
    /// Fraction of optimizer rounds ranked by exploitation under `two_stage`.
    pub two_stage_split: f64,
    /// Function maximised by the equilibrium search.
    pub function: AcquisitionKind,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            step: 0.1,
            max_iters: 200,
            grad_tol: 1e-6,
            dedup_tol: 1e-3,
            variance_floor: 1e-9,
            batch_size: 1,
            strategy: BatchStrategy::Value,
            two_stage_split: 0.5,
            function: AcquisitionKind::U2,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&'static str, bool, String); 7] = [
            ("kappa", self.kappa >= 0.0 && self.kappa.is_finite(), format!("{}", self.kappa)),
            ("step", self.step > 0.0 && self.step.is_finite(), format!("{}", self.step)),
            ("grad_tol", self.grad_tol > 0.0, format!("{}", self.grad_tol)),
            ("dedup_tol", self.dedup_tol >= 0.0, format!("{}", self.dedup_tol)),
            ("variance_floor", self.variance_floor > 0.0, format!("{}", self.variance_floor)),
            ("batch_size", self.batch_size >= 1, format!("{}", self.batch_size)),
            (
                "two_stage_split",
                self.two_stage_split > 0.0 && self.two_stage_split < 1.0,
                format!("{}", self.two_stage_split),
            ),
        ];
        for (name, ok, got) in checks {
            if !ok {
                return Err(AboError::invalid(name, format!("out of range: {got}")));
            }
        }
        Ok(())
    }
}

/// `u1(x)`: the influence predictive mean.
pub fn u1(state: &SurrogateState, x: &[f64]) -> Result<f64> {
    state.predictive_mean(x)
}

/// `u2(x) = u1(x) + kappa * sqrt(V(x))`.
pub fn u2(state: &SurrogateState, x: &[f64], kappa: f64) -> Result<f64> {
    Ok(u1(state, x)? + kappa * state.predictive_variance(x)?.sqrt())
}

/// Jacobian rows `grad_x S(x, x_i)`, accumulated as `sum_i w_i grad_x S(x, x_i)`.
fn weighted_similarity_gradient(state: &SurrogateState, x: &[f64], weights: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d];
    let mut g = vec![0.0; d];
    for (xi, w) in state.points().iter().zip(weights) {
        state.spec().grad_x_into(x, xi, &mut g);
        for (o, gj) in out.iter_mut().zip(&g) {
            *o += w * gj;
        }
    }
    out
}

/// `grad u1 = sum_i grad S(x, x_i) (M y)_i` where `I(x) = S_x M`.
pub fn grad_u1(state: &SurrogateState, x: &[f64]) -> Result<Vec<f64>> {
    state.check(x)?;
    Ok(weighted_similarity_gradient(state, x, state.weights()))
}

/// Gradient of `u2`, using `d|A|^{1/2} = sign(A) dA / (2 max(|A|, floor)^{1/2})`
/// with `A = S(x,x) - S_x M S_x^T` and `dA = dS(x,x) - J^T (M + M^T) S_x^T`.
pub fn grad_u2(state: &SurrogateState, x: &[f64], kappa: f64, variance_floor: f64) -> Result<Vec<f64>> {
    state.check(x)?;
    Ok(value_and_gradient(state, x, AcquisitionKind::U2, kappa, variance_floor).1)
}

fn value_and_gradient(
    state: &SurrogateState,
    x: &[f64],
    kind: AcquisitionKind,
    kappa: f64,
    variance_floor: f64,
) -> (f64, Vec<f64>) {
    let spec = state.spec();
    let row = spec.similarity_row_unchecked(x, state.points());
    let coefficients = state.coefficients_for_row(&row);
    let mean = dot(&coefficients, state.values());
    let mut grad = weighted_similarity_gradient(state, x, state.weights());
    if kind == AcquisitionKind::U1 || kappa == 0.0 {
        return (mean, grad);
    }
    let a = spec.eval_self_unchecked() - dot(&coefficients, &row);
    let m_row = state.apply_map(&row);
    let sym: Vec<f64> = m_row.iter().zip(&coefficients).map(|(p, q)| p + q).collect();
    let grad_quad = weighted_similarity_gradient(state, x, &sym);
    let grad_self = spec.grad_self(x);
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    let denom = 2.0 * a.abs().max(variance_floor).sqrt();
    for ((g, gs), gq) in grad.iter_mut().zip(&grad_self).zip(&grad_quad) {
        *g += kappa * sign * (gs - gq) / denom;
    }
    (mean + kappa * a.abs().sqrt(), grad)
}

/// A smooth function to be maximised over a box.
pub trait AscentObjective {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    fn value(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> AscentObjective for F {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self(x)
    }
}

/// `u1` or `u2` over a fixed surrogate.
#[derive(Debug, Clone, Copy)]
pub struct Acquisition<'a> {
    pub state: &'a SurrogateState,
    pub kind: AcquisitionKind,
    pub kappa: f64,
    pub variance_floor: f64,
}

impl AscentObjective for Acquisition<'_> {
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        value_and_gradient(self.state, x, self.kind, self.kappa, self.variance_floor)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let spec = self.state.spec();
        let row = spec.similarity_row_unchecked(x, self.state.points());
        let coefficients = self.state.coefficients_for_row(&row);
        let mean = dot(&coefficients, self.state.values());
        match self.kind {
            AcquisitionKind::U1 => mean,
            AcquisitionKind::U2 => {
                mean + self.kappa * (spec.eval_self_unchecked() - dot(&coefficients, &row)).abs().sqrt()
            }
        }
    }
}

/// Result of one damped fixed-point ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentOutcome {
    pub location: Vec<f64>,
    pub value: f64,
    /// Accepted steps.
    pub iterations: usize,
    /// Norm of the box-projected gradient at `location`.
    pub gradient_norm: f64,
    pub converged: bool,
    /// `u` at the clipped start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Iterates `x <- clip(x + eta * grad u(x))`, halving `eta` whenever the step
/// would decrease `u` and doubling it (up to a cap) after each accepted step.
/// Stops once the box-projected gradient norm is at most `grad_tol`, after
/// `max_iters` accepted steps, or when no step size makes progress.
pub fn ascend<F: AscentObjective + ?Sized>(
    objective: &F,
    bounds: &Bounds,
    x0: &[f64],
    config: &AcquisitionConfig,
) -> AscentOutcome {
    let mut x = x0.to_vec();
    bounds.clip(&mut x);
    let (mut u, mut g) = objective.value_and_gradient(&x);
    let mut eta = config.step;
    let max_eta = config.step * MAX_STEP_GROWTH;
    let mut iterations = 0;
    let mut candidate = vec![0.0; x.len()];
    let mut trace = vec![u];

    let grad_norm = |x: &[f64], g: &[f64]| norm(&bounds.project_gradient(x, g));
    loop {
        if grad_norm(&x, &g) <= config.grad_tol || iterations >= config.max_iters {
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            for ((c, xi), gi) in candidate.iter_mut().zip(&x).zip(&g) {
                *c = xi + eta * gi;
            }
            bounds.clip(&mut candidate);
            if candidate == x {
                break;
            }
            let uc = objective.value(&candidate);
            if uc >= u {
                accepted = Some(uc);
                break;
            }
            eta *= 0.5;
        }
        let Some(uc) = accepted else { break };
        x.copy_from_slice(&candidate);
        let (u_new, g_new) = objective.value_and_gradient(&x);
        debug_assert!((u_new - uc).abs() <= 1e-9 * uc.abs().max(1.0));
        u = u_new;
        g = g_new;
        trace.push(u);
        iterations += 1;
        eta = (eta * 2.0).min(max_eta);
    }
    let gradient_norm = grad_norm(&x, &g);
    AscentOutcome {
        location: x,
        value: u,
        iterations,
        gradient_norm,
        converged: gradient_norm <= config.grad_tol,
        trace,
    }
}

/// A limit point of the fixed-point iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub location: Vec<f64>,
    pub u_value: f64,
    pub variance: f64,
    /// Index of the data point the search started from.
    pub origin_index: usize,
    pub iterations_used: usize,
    /// The box-projected gradient norm is at most `grad_tol`.
    pub converged: bool,
}

/// Fixed-point ascent of `u1`/`u2` from `x0`. `origin_index` is left at 0;
/// [`equilibrium_set`] fills it in.
pub fn fixed_point_ascend(
    state: &SurrogateState,
    bounds: &Bounds,
    x0: &[f64],
    kind: AcquisitionKind,
    config: &AcquisitionConfig,
) -> Result<EquilibriumPoint> {
    state.check(x0)?;
    if x0.len() != bounds.dim() {
        return Err(AboError::DimensionMismatch {
            expected: bounds.dim(),
            got: x0.len(),
        });
    }
    let acq = Acquisition {
        state,
        kind,
        kappa: config.kappa,
        variance_floor: config.variance_floor,
    };
    let out = ascend(&acq, bounds, x0, config);
    let variance = state.signed_variance_unchecked(&out.location).abs();
    Ok(EquilibriumPoint {
        location: out.location,
        u_value: out.value,
        variance,
        origin_index: 0,
        iterations_used: out.iterations,
        converged: out.converged,
    })
}

/// Runs the ascent from every data point and merges limits closer than
/// `dedup_tol`, keeping the one with the higher `u` (ties: lower origin).
/// The result is ordered by origin index and has at most `n` entries.
pub fn equilibrium_set(
    state: &SurrogateState,
    bounds: &Bounds,
    config: &AcquisitionConfig,
    kind: AcquisitionKind,
) -> Result<Vec<EquilibriumPoint>> {
    let all: Vec<EquilibriumPoint> = state
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            fixed_point_ascend(state, bounds, p, kind, config).map(|mut e| {
                e.origin_index = i;
                e
            })
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[b].u_value.total_cmp(&all[a].u_value).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let distinct = kept
            .iter()
            .all(|&k| bounds.normalized_distance(&all[k].location, &all[i].location) > config.dedup_tol);
        if distinct {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| all[i].clone()).collect())
}

/// Where the optimizer is in its schedule; used by the two-stage strategy and
/// to seed the fallback draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionContext {
    /// 1-based optimizer round (the initial design is round 0).
    pub round: usize,
    pub total_rounds: usize,
    pub fallback_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Variance,
    U1,
    U2,
}

pub fn active_criterion(config: &AcquisitionConfig, ctx: &SelectionContext) -> Criterion {
    match config.strategy {
        BatchStrategy::Variance => Criterion::Variance,
        BatchStrategy::Value => Criterion::U2,
        BatchStrategy::TwoStage => {
            let exploit_rounds = (config.two_stage_split * ctx.total_rounds as f64).ceil() as usize;
            if ctx.round <= exploit_rounds {
                Criterion::U1
            } else {
                Criterion::Variance
            }
        }
    }
}

/// Picks up to `batch_size` equilibria by the active criterion (descending),
/// skipping candidates within `dedup_tol` of the data or of an earlier pick.
/// If nothing survives, returns `batch_size` uniform draws from the box.
pub fn select_batch(
    eq: &[EquilibriumPoint],
    state: &SurrogateState,
    bounds: &Bounds,
    config: &AcquisitionConfig,
    ctx: &SelectionContext,
) -> Result<Vec<Vec<f64>>> {
    let criterion = active_criterion(config, ctx);
    let mut scored: Vec<(f64, &EquilibriumPoint)> = eq
        .iter()
        .map(|e| {
            let score = match criterion {
                Criterion::Variance => state.predictive_variance(&e.location)?,
                Criterion::U1 => u1(state, &e.location)?,
                Criterion::U2 => u2(state, &e.location, config.kappa)?,
            };
            Ok((score, e))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.origin_index.cmp(&b.1.origin_index))
    });

    let mut batch: Vec<Vec<f64>> = Vec::new();
    for (_, e) in scored {
        if batch.len() >= config.batch_size {
            break;
        }
        let far_from = |p: &Vec<f64>| bounds.normalized_distance(p, &e.location) > config.dedup_tol;
        if state.points().iter().all(far_from) && batch.iter().all(far_from) {
            batch.push(e.location.clone());
        }
    }
    if batch.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.fallback_seed);
        batch = (0..config.batch_size).map(|_| bounds.sample_uniform(&mut rng)).collect();
    }
    Ok(batch)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::DEFAULT_RANK_TOL;
    use crate::similarity::SimilaritySpec;
    use rand::Rng;

    fn instance(seed: u64, n: usize, noise: f64) -> (SurrogateState, Bounds) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = Bounds::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let pts: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample_uniform(&mut rng)).collect();
        let ys: Vec<f64> = pts.iter().map(|p| (p[0] * 1.3).sin() + p[1] * 0.4 + rng.random_range(-0.1..0.1)).collect();
        let spec = SimilaritySpec::rbf(0.9, noise).unwrap();
        (SurrogateState::build(spec, pts, ys, DEFAULT_RANK_TOL).unwrap(), bounds)
    }

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let (mut a, mut b) = (x.to_vec(), x.to_vec());
                a[j] += h;
                b[j] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn empty_surrogate() {
        let spec = SimilaritySpec::rbf(1.0, 0.0).unwrap();
        let s = SurrogateState::build(spec, vec![], vec![], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(u1(&s, &[0.0]).unwrap(), 0.0);
        assert_eq!(u2(&s, &[0.0], 2.0).unwrap(), 2.0);
        assert_eq!(grad_u1(&s, &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn u1_scalar_example() {
        let spec = SimilaritySpec::rbf(1.0, 0.0).unwrap();
        let s = SurrogateState::build(spec, vec![vec![0.0]], vec![2.0], DEFAULT_RANK_TOL).unwrap();
        let x = [(2.0 * 2f64.ln()).sqrt()];
        assert!((u1(&s, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(u2(&s, &x, 0.0).unwrap(), u1(&s, &x).unwrap());
    }

    #[test]
    fn u2_minus_u1_is_scaled_deviation() {
        let (s, _) = instance(4, 8, 0.01);
        let x = [0.3, -0.7];
        let d = u2(&s, &x, 1.7).unwrap() - u1(&s, &x).unwrap();
        assert!((d - 1.7 * s.predictive_variance(&x).unwrap().sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let (s, b) = instance(seed, 10, 0.01);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            for _ in 0..10 {
                let x = b.sample_uniform(&mut rng);
                let g1 = grad_u1(&s, &x).unwrap();
                let f1 = fd(|p| u1(&s, p).unwrap(), &x, 1e-6);
                let g2 = grad_u2(&s, &x, 1.5, 1e-9).unwrap();
                let f2 = fd(|p| u2(&s, p, 1.5).unwrap(), &x, 1e-6);
                for j in 0..2 {
                    assert!((g1[j] - f1[j]).abs() <= 1e-4 * f1[j].abs().max(1.0), "u1 {g1:?} vs {f1:?}");
                    assert!((g2[j] - f2[j]).abs() <= 1e-4 * f2[j].abs().max(1.0), "u2 {g2:?} vs {f2:?}");
                }
            }
        }
    }

    #[test]
    fn kappa_zero_gradient_is_u1_gradient() {
        let (s, _) = instance(1, 6, 0.01);
        let x = [0.1, 0.2];
        assert_eq!(grad_u2(&s, &x, 0.0, 1e-9).unwrap(), grad_u1(&s, &x).unwrap());
    }

    #[test]
    fn floor_keeps_gradient_finite_at_data() {
        let (s, _) = instance(2, 5, 0.0);
        let x = s.points()[0].clone();
        assert!(grad_u2(&s, &x, 2.0, 1e-9).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn quadratic_hook_converges_in_one_step() {
        let c = [0.3, -0.4];
        let u = |x: &[f64]| {
            let v = -0.5 * x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            (v, x.iter().zip(&c).map(|(a, b)| b - a).collect::<Vec<_>>())
        };
        let cfg = AcquisitionConfig { step: 1.0, ..Default::default() };
        let out = ascend(&u, &Bounds::new(vec![-1.0; 2], vec![1.0; 2]).unwrap(), &[0.9, 0.9], &cfg);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.location.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-15));

        let again = ascend(&u, &Bounds::new(vec![-1.0; 2], vec![1.0; 2]).unwrap(), &c, &cfg);
        assert_eq!(again.iterations, 0);
        assert!(again.converged);
    }

    #[test]
    fn boundary_maximum_counts_as_converged() {
        let u = |x: &[f64]| (x[0], vec![1.0]);
        let out = ascend(&u, &Bounds::unit(1), &[0.2], &AcquisitionConfig::default());
        assert_eq!(out.location, vec![1.0]);
        assert!(out.converged);
    }

    #[test]
    fn equilibria_are_bounded_and_distinct() {
        for seed in 0..4 {
            let (s, b) = instance(seed, 7, 0.01);
            let cfg = AcquisitionConfig::default();
            let eq = equilibrium_set(&s, &b, &cfg, AcquisitionKind::U2).unwrap();
            assert!(!eq.is_empty() && eq.len() <= s.len());
            for (i, e) in eq.iter().enumerate() {
                if e.converged {
                    let g = grad_u2(&s, &e.location, cfg.kappa, cfg.variance_floor).unwrap();
                    assert!(norm(&b.project_gradient(&e.location, &g)) <= cfg.grad_tol);
                }
                for f in &eq[i + 1..] {
                    assert!(b.normalized_distance(&e.location, &f.location) > cfg.dedup_tol);
                }
            }
        }
    }

    #[test]
    fn single_point_and_coincident_starts() {
        let (s, b) = instance(3, 1, 0.01);
        assert_eq!(equilibrium_set(&s, &b, &AcquisitionConfig::default(), AcquisitionKind::U1).unwrap().len(), 1);

        // two nearby starts on a single bump climb to the same peak
        let spec = SimilaritySpec::rbf(1.0, 0.01).unwrap();
        let s = SurrogateState::build(spec, vec![vec![0.1], vec![-0.1]], vec![1.0, 1.0], DEFAULT_RANK_TOL).unwrap();
        let eq = equilibrium_set(&s, &Bounds::new(vec![-3.0], vec![3.0]).unwrap(), &AcquisitionConfig::default(), AcquisitionKind::U1)
            .unwrap();
        assert_eq!(eq.len(), 1);
        assert_eq!(eq[0].origin_index, 0);
    }

    fn fake_eq(loc: f64, origin: usize) -> EquilibriumPoint {
        EquilibriumPoint {
            location: vec![loc],
            u_value: 0.0,
            variance: 0.0,
            origin_index: origin,
            iterations_used: 0,
            converged: true,
        }
    }

    #[test]
    fn variance_strategy_orders_by_variance() {
        let spec = SimilaritySpec::rbf(1.0, 0.0).unwrap();
        let s = SurrogateState::build(spec, vec![vec![0.0]], vec![0.0], DEFAULT_RANK_TOL).unwrap();
        let b = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
        // V = 1 - exp(-d^2) for one noiseless point; place candidates at V = 0.5, 0.2, 0.9
        let dist = |v: f64| (-(1.0f64 - v).ln()).sqrt();
        let eq = vec![fake_eq(dist(0.5), 0), fake_eq(dist(0.2), 1), fake_eq(-dist(0.9), 2)];
        for (e, v) in eq.iter().zip([0.5, 0.2, 0.9]) {
            assert!((s.predictive_variance(&e.location).unwrap() - v).abs() < 1e-12);
        }
        let cfg = AcquisitionConfig { batch_size: 2, strategy: BatchStrategy::Variance, ..Default::default() };
        let ctx = SelectionContext { round: 1, total_rounds: 10, fallback_seed: 0 };
        let batch = select_batch(&eq, &s, &b, &cfg, &ctx).unwrap();
        assert_eq!(batch, vec![eq[2].location.clone(), eq[0].location.clone()]);

        let cfg_all = AcquisitionConfig { batch_size: 5, ..cfg };
        assert_eq!(select_batch(&eq, &s, &b, &cfg_all, &ctx).unwrap().len(), 3);
    }

    #[test]
    fn all_duplicates_fall_back_to_random() {
        let spec = SimilaritySpec::rbf(1.0, 0.0).unwrap();
        let s = SurrogateState::build(spec, vec![vec![0.0]], vec![0.0], DEFAULT_RANK_TOL).unwrap();
        let b = Bounds::new(vec![-1.0], vec![1.0]).unwrap();
        let cfg = AcquisitionConfig { batch_size: 3, ..Default::default() };
        let ctx = SelectionContext { round: 1, total_rounds: 4, fallback_seed: 9 };
        let batch = select_batch(&[fake_eq(0.0, 0)], &s, &b, &cfg, &ctx).unwrap();
        assert_eq!(batch.len(), 3);
        assert!(batch.iter().all(|p| b.contains(p)));
        assert_eq!(batch, select_batch(&[fake_eq(0.0, 0)], &s, &b, &cfg, &ctx).unwrap());
    }

    #[test]
    fn two_stage_switches_criterion() {
        let cfg = AcquisitionConfig { strategy: BatchStrategy::TwoStage, two_stage_split: 0.5, ..Default::default() };
        let at = |round| active_criterion(&cfg, &SelectionContext { round, total_rounds: 5, fallback_seed: 0 });
        assert_eq!(at(1), Criterion::U1);
        assert_eq!(at(3), Criterion::U1);
        assert_eq!(at(4), Criterion::Variance);
    }

    #[test]
    fn config_validation() {
        assert!(AcquisitionConfig::default().validate().is_ok());
        assert!(AcquisitionConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(AcquisitionConfig { two_stage_split: 1.0, ..Default::default() }.validate().is_err());
        assert!(AcquisitionConfig { kappa: -1.0, ..Default::default() }.validate().is_err());
    }
}
