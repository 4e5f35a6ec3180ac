//! Outer optimization loops: ABO, GP-UCB and random search.
//!
//! Budgets are counted in objective evaluations. Round 0 is the seeded
//! uniform initial design; every later round evaluates one batch, the last
//! one truncated to the remaining budget.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{ascend, equilibrium_set, select_batch, AcquisitionConfig, SelectionContext};
use crate::domain::{derive_seed, Bounds};
use crate::error::{AboError, Result};
use crate::influence::{GpPosterior, SurrogateState, DEFAULT_RANK_TOL};
use crate::objectives::Objective;
use crate::similarity::{SimilarityKind, SimilaritySpec};

/// Random starts added to the data-point starts of the GP-UCB inner search.
pub const UCB_RANDOM_STARTS: usize = 10;

const STREAM_INIT: u64 = 0x11;
const STREAM_EVAL: u64 = 0xE0;
const STREAM_FALLBACK: u64 = 0xFB;
const STREAM_UCB_STARTS: u64 = 0xC0;
const STREAM_RANDOM: u64 = 0x5A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Abo,
    GpUcb,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Abo => "abo",
            Method::GpUcb => "gp_ucb",
            Method::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Total objective evaluations.
    pub budget: usize,
    pub init_design_size: usize,
    pub seed: u64,
    pub bounds: Bounds,
    pub method: Method,
    pub similarity: SimilaritySpec,
    pub acquisition: AcquisitionConfig,
    /// Standardise observed values before fitting the surrogate.
    pub normalize_values: bool,
    pub rank_tol: f64,
}

impl OptimizerConfig {
    pub fn new(
        method: Method,
        bounds: Bounds,
        similarity: SimilaritySpec,
        budget: usize,
        init_design_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            budget,
            init_design_size,
            seed,
            bounds,
            method,
            similarity,
            acquisition: AcquisitionConfig::default(),
            normalize_values: true,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.init_design_size < 1 {
            return Err(AboError::invalid("init_design_size", "must be at least 1"));
        }
        if self.budget < self.init_design_size {
            return Err(AboError::invalid(
                "budget",
                format!("{} is below init_design_size {}", self.budget, self.init_design_size),
            ));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(AboError::invalid("rank_tol", format!("must lie in (0, 1), got {}", self.rank_tol)));
        }
        self.acquisition.validate()?;
        if let Some(d) = self.similarity.point_dim() {
            if d != self.bounds.dim() {
                return Err(AboError::DimensionMismatch {
                    expected: d,
                    got: self.bounds.dim(),
                });
            }
        }
        if self.method == Method::GpUcb && !matches!(self.similarity.kind(), SimilarityKind::Rbf { .. }) {
            return Err(AboError::invalid("similarity", "gp_ucb needs the rbf similarity"));
        }
        self.search_bounds().map(|_| ())
    }

    /// The box actually searched: for Gaussian-parameter spaces the variance
    /// coordinates are floored at `sigma_min`.
    pub fn search_bounds(&self) -> Result<Bounds> {
        match self.similarity.kind() {
            SimilarityKind::SymKlGaussian { half_dim, sigma_min, .. } => {
                let mut lo = self.bounds.lower().to_vec();
                for v in &mut lo[*half_dim..] {
                    *v = v.max(*sigma_min);
                }
                Bounds::new(lo, self.bounds.upper().to_vec())
            }
            SimilarityKind::Rbf { .. } => Ok(self.bounds.clone()),
        }
    }

    /// Optimizer rounds after the initial design.
    pub fn total_rounds(&self) -> usize {
        let per_round = match self.method {
            Method::GpUcb => 1,
            Method::Abo | Method::Random => self.acquisition.batch_size,
        };
        (self.budget - self.init_design_size).div_ceil(per_round)
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub point: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub round: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// `None` only if no finite value has been observed yet.
    pub best_so_far: Option<f64>,
    /// Distinct candidates produced by the inner search (0 for round 0 and
    /// random search).
    pub eq_count: usize,
    pub wall_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<Abort>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
}

impl RunHistory {
    pub fn evaluations(&self) -> usize {
        self.records.iter().map(|r| r.values.len()).sum()
    }

    pub fn best_so_far(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.best_so_far)
    }

    pub fn aborted(&self) -> Option<&Abort> {
        self.records.iter().find_map(|r| r.abort.as_ref())
    }

    pub fn points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.records.iter().flat_map(|r| r.points.iter())
    }

    /// Same records with every `wall_ms` zeroed.
    pub fn without_timing(&self) -> RunHistory {
        let mut h = self.clone();
        for r in &mut h.records {
            r.wall_ms = 0;
        }
        h
    }
}

/// The seeded uniform initial design used by every method.
pub fn initial_design(config: &OptimizerConfig) -> Result<Vec<Vec<f64>>> {
    let bounds = config.search_bounds()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_INIT, 0));
    Ok((0..config.init_design_size).map(|_| bounds.sample_uniform(&mut rng)).collect())
}

/// Shift and scale making `values` zero-mean with unit sample deviation
/// (scale 1 when they are constant).
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    values.iter().map(|v| (v - mean) / scale).collect()
}

struct Run<'o, O: ?Sized> {
    objective: &'o mut O,
    seed: u64,
    budget: usize,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    best: Option<f64>,
    history: RunHistory,
}

impl<'o, O: Objective + ?Sized> Run<'o, O> {
    fn new(objective: &'o mut O, config: &OptimizerConfig) -> Self {
        Self {
            objective,
            seed: config.seed,
            budget: config.budget,
            points: Vec::new(),
            values: Vec::new(),
            best: None,
            history: RunHistory::default(),
        }
    }

    fn remaining(&self) -> usize {
        self.budget - self.values.len()
    }

    /// Evaluates `batch` in order and appends a record. Returns false if the
    /// run aborted.
    fn evaluate(&mut self, round: usize, mut batch: Vec<Vec<f64>>, eq_count: usize, started: Instant) -> bool {
        batch.truncate(self.remaining());
        let mut rec_points = Vec::with_capacity(batch.len());
        let mut rec_values = Vec::with_capacity(batch.len());
        let mut abort = None;
        for x in batch {
            let eval_seed = derive_seed(self.seed, STREAM_EVAL, self.values.len() as u64);
            match self.objective.evaluate(&x, eval_seed) {
                Ok(v) if v.is_finite() => {
                    self.best = Some(self.best.map_or(v, |b| b.max(v)));
                    self.points.push(x.clone());
                    self.values.push(v);
                    rec_points.push(x);
                    rec_values.push(v);
                }
                Ok(v) => {
                    log::error!("objective returned {v} at {x:?}; aborting run");
                    abort = Some(Abort {
                        point: x,
                        message: format!("objective returned non-finite value {v}"),
                    });
                    break;
                }
                Err(e) => {
                    log::error!("objective failed at {x:?}: {e}; aborting run");
                    abort = Some(Abort {
                        point: x,
                        message: e.to_string(),
                    });
                    break;
                }
            }
        }
        let ok = abort.is_none();
        self.history.records.push(IterationRecord {
            round,
            points: rec_points,
            values: rec_values,
            best_so_far: self.best,
            eq_count,
            wall_ms: started.elapsed().as_millis() as u64,
            abort,
        });
        ok
    }

    fn fit_values(&self, normalize: bool) -> Vec<f64> {
        if normalize {
            standardize(&self.values)
        } else {
            self.values.clone()
        }
    }
}

/// Runs the method selected in `config`.
pub fn run<O: Objective + ?Sized>(objective: &mut O, config: &OptimizerConfig) -> Result<RunHistory> {
    match config.method {
        Method::Abo => run_abo(objective, config),
        Method::GpUcb => run_gp_ucb(objective, config),
        Method::Random => run_random(objective, config),
    }
}

/// Surrogate fit to the data gathered so far in ABO (used for diagnostics).
pub fn abo_surrogate(config: &OptimizerConfig, points: &[Vec<f64>], values: &[f64]) -> Result<SurrogateState> {
    let y = if config.normalize_values {
        standardize(values)
    } else {
        values.to_vec()
    };
    SurrogateState::build(config.similarity.clone(), points.to_vec(), y, config.rank_tol)
}

pub fn run_abo<O: Objective + ?Sized>(objective: &mut O, config: &OptimizerConfig) -> Result<RunHistory> {
    config.validate()?;
    let bounds = config.search_bounds()?;
    let total_rounds = config.total_rounds();
    let mut run = Run::new(objective, config);
    let started = Instant::now();
    if !run.evaluate(0, initial_design(config)?, 0, started) {
        return Ok(run.history);
    }
    let mut round = 0;
    while run.remaining() > 0 {
        round += 1;
        let started = Instant::now();
        let state = SurrogateState::build(
            config.similarity.clone(),
            run.points.clone(),
            run.fit_values(config.normalize_values),
            config.rank_tol,
        )?;
        let eq = equilibrium_set(&state, &bounds, &config.acquisition, config.acquisition.function)?;
        let ctx = SelectionContext {
            round,
            total_rounds,
            fallback_seed: derive_seed(config.seed, STREAM_FALLBACK, round as u64),
        };
        let batch = select_batch(&eq, &state, &bounds, &config.acquisition, &ctx)?;
        log::debug!("abo round {round}: {} equilibria, batch of {}", eq.len(), batch.len());
        if !run.evaluate(round, batch, eq.len(), started) {
            break;
        }
    }
    Ok(run.history)
}

pub fn run_gp_ucb<O: Objective + ?Sized>(objective: &mut O, config: &OptimizerConfig) -> Result<RunHistory> {
    config.validate()?;
    let bounds = config.search_bounds()?;
    let acq = &config.acquisition;
    let mut run = Run::new(objective, config);
    let started = Instant::now();
    if !run.evaluate(0, initial_design(config)?, 0, started) {
        return Ok(run.history);
    }
    let mut round = 0;
    while run.remaining() > 0 {
        round += 1;
        let started = Instant::now();
        let gp = GpPosterior::fit(&config.similarity, &run.points, &run.fit_values(config.normalize_values))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_UCB_STARTS, round as u64));
        let mut starts = run.points.clone();
        starts.extend((0..UCB_RANDOM_STARTS).map(|_| bounds.sample_uniform(&mut rng)));

        let ucb = |x: &[f64]| {
            gp.ucb_with_gradient(x, acq.kappa, acq.variance_floor)
                .expect("dimension checked by validate")
        };
        let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
        for s in &starts {
            let out = ascend(&ucb, &bounds, s, acq);
            let distinct = candidates
                .iter()
                .all(|(_, c)| bounds.normalized_distance(c, &out.location) > acq.dedup_tol);
            if distinct {
                candidates.push((out.value, out.location));
            }
        }
        let eq_count = candidates.len();
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        let next = candidates
            .into_iter()
            .map(|(_, c)| c)
            .find(|c| run.points.iter().all(|p| bounds.normalized_distance(p, c) > acq.dedup_tol))
            .unwrap_or_else(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_FALLBACK, round as u64));
                bounds.sample_uniform(&mut rng)
            });
        if !run.evaluate(round, vec![next], eq_count, started) {
            break;
        }
    }
    Ok(run.history)
}

pub fn run_random<O: Objective + ?Sized>(objective: &mut O, config: &OptimizerConfig) -> Result<RunHistory> {
    config.validate()?;
    let bounds = config.search_bounds()?;
    let mut run = Run::new(objective, config);
    let started = Instant::now();
    if !run.evaluate(0, initial_design(config)?, 0, started) {
        return Ok(run.history);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_RANDOM, 0));
    let mut round = 0;
    while run.remaining() > 0 {
        round += 1;
        let started = Instant::now();
        let n = config.acquisition.batch_size.min(run.remaining());
        let batch = (0..n).map(|_| bounds.sample_uniform(&mut rng)).collect();
        if !run.evaluate(round, batch, 0, started) {
            break;
        }
    }
    Ok(run.history)
}
