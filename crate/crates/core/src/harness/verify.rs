//! `abo verify`: fixed-seed self-checks of the surrogate, its gradients and
//! the equilibrium search.

use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::acquisition::{
    ascend, equilibrium_set, grad_u1, grad_u2, u1, u2, Acquisition, AcquisitionConfig, AcquisitionKind,
};
use crate::domain::Bounds;
use crate::influence::{
    verify_empirical_projection, verify_geometric_view, GpPosterior, SurrogateState, DEFAULT_RANK_TOL,
    GEOMETRIC_TOL, PROJECTION_TOL,
};
use crate::similarity::{grad_sym_kl_mc, GaussianConditional, SimilaritySpec};

/// Agreement required between the influence surrogate and the GP posterior.
pub const GP_EQUIVALENCE_TOL: f64 = 1e-6;
/// Relative error allowed between analytic and central-difference gradients.
pub const GRADIENT_REL_TOL: f64 = 1e-4;
/// Below this magnitude gradient errors are measured absolutely.
pub const GRADIENT_SCALE_FLOOR: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    GpEquivalence,
    GeometricView,
    EmpiricalProjection,
    Gradients,
    FixedPoint,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = [
        "gp-equivalence",
        "geometric-view",
        "empirical-projection",
        "gradients",
        "fixed-point",
        "all",
    ];

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::GpEquivalence,
                Suite::GeometricView,
                Suite::EmpiricalProjection,
                Suite::Gradients,
                Suite::FixedPoint,
            ],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::GpEquivalence => Self::NAMES[0],
            Suite::GeometricView => Self::NAMES[1],
            Suite::EmpiricalProjection => Self::NAMES[2],
            Suite::Gradients => Self::NAMES[3],
            Suite::FixedPoint => Self::NAMES[4],
            Suite::All => Self::NAMES[5],
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [
            Suite::GpEquivalence,
            Suite::GeometricView,
            Suite::EmpiricalProjection,
            Suite::Gradients,
            Suite::FixedPoint,
            Suite::All,
        ];
        all.into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}; expected one of {}", Suite::NAMES.join(", ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Multiplies the surrogate variance before it is compared. 1.0 in normal
    /// use; anything else must make the variance checks fail.
    pub variance_scale: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { variance_scale: 1.0 }
    }
}

/// One named check: the worst observed error against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub passed: bool,
}

struct Check {
    suite: &'static str,
    name: &'static str,
    tolerance: f64,
    worst: f64,
    cases: usize,
    failed: bool,
}

impl Check {
    fn new(suite: &'static str, name: &'static str, tolerance: f64) -> Self {
        Self {
            suite,
            name,
            tolerance,
            worst: 0.0,
            cases: 0,
            failed: false,
        }
    }

    /// Records an error value; NaN counts as a failure.
    fn error(&mut self, e: f64) {
        self.cases += 1;
        if e.is_nan() || e > self.tolerance {
            self.failed = true;
        }
        if e.is_nan() || e > self.worst {
            self.worst = e;
        }
    }

    fn flag(&mut self, ok: bool) {
        self.error(if ok { 0.0 } else { f64::INFINITY });
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            suite: self.suite,
            name: self.name,
            worst: self.worst,
            tolerance: self.tolerance,
            cases: self.cases,
            passed: !self.failed && self.cases > 0,
        }
    }
}

/// A random regression instance on `[-1, 1]^d`.
pub struct Instance {
    pub spec: SimilaritySpec,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub queries: Vec<Vec<f64>>,
}

fn uniform(rng: &mut ChaCha8Rng, d: usize, half_width: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// RBF instance with `d <= 5`, `n <= 20`, noise in {0.01, 0.1}.
pub fn gp_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=5);
    let n = rng.random_range(1..=20);
    let noise = if rng.random_bool(0.5) { 0.01 } else { 0.1 };
    let lengthscale = rng.random_range(0.3..1.5);
    let points: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut rng, d, 1.0)).collect();
    let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut queries: Vec<Vec<f64>> = (0..5).map(|_| uniform(&mut rng, d, 1.5)).collect();
    queries.push(points[0].clone());
    Instance {
        spec: SimilaritySpec::rbf(lengthscale, noise).expect("valid rbf"),
        points,
        values,
        queries,
    }
}

type Sampler = dyn Fn(&mut ChaCha8Rng) -> Vec<f64>;

/// Noise-free instance whose similarity matrix has repeated rows. Even seeds
/// use RBF on `[-1, 1]^d`, odd seeds the Gaussian-parameter score.
pub fn rank_deficient_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distinct = rng.random_range(1..=8);
    let repeats = rng.random_range(1..=6);
    let (spec, sample): (SimilaritySpec, Box<Sampler>) = if seed.is_multiple_of(2) {
        let d = rng.random_range(1..=4);
        (
            SimilaritySpec::rbf(rng.random_range(0.3..1.5), 0.0).expect("valid rbf"),
            Box::new(move |r: &mut ChaCha8Rng| uniform(r, d, 1.0)),
        )
    } else {
        let bounds = Bounds::new(vec![-1.0, -1.0, 0.05, 0.05], vec![1.0, 1.0, 1.0, 1.0]).expect("static box");
        (
            SimilaritySpec::sym_kl_for_box(&bounds, 1e-6, 0.0).expect("valid box"),
            Box::new(move |r: &mut ChaCha8Rng| bounds.sample_uniform(r)),
        )
    };
    let base: Vec<Vec<f64>> = (0..distinct).map(|_| sample(&mut rng)).collect();
    let mut points = base.clone();
    for _ in 0..repeats {
        let i = rng.random_range(0..base.len());
        let at = rng.random_range(0..=points.len());
        points.insert(at, base[i].clone());
    }
    let values = (0..points.len()).map(|_| rng.sample(StandardNormal)).collect();
    let mut queries: Vec<Vec<f64>> = (0..3).map(|_| sample(&mut rng)).collect();
    queries.push(points[points.len() - 1].clone());
    Instance {
        spec,
        points,
        values,
        queries,
    }
}

/// Surrogate instance for the gradient and equilibrium checks. Even seeds use
/// RBF on `[-1, 1]^2`, odd seeds the Gaussian-parameter score on a
/// `[mu; s]` box with unclamped constant.
pub fn surrogate_instance(seed: u64, n: usize) -> (SurrogateState, Bounds) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (spec, bounds) = if seed.is_multiple_of(2) {
        let b = Bounds::new(vec![-1.0; 2], vec![1.0; 2]).expect("static box");
        (SimilaritySpec::rbf(rng.random_range(0.3..0.8), 0.01).expect("valid rbf"), b)
    } else {
        let b = Bounds::new(vec![-1.0, -1.0, 0.05, 0.05], vec![1.0, 1.0, 1.0, 1.0]).expect("static box");
        (SimilaritySpec::sym_kl_for_box(&b, 1e-6, 0.01).expect("valid box"), b)
    };
    let points: Vec<Vec<f64>> = (0..n).map(|_| bounds.sample_uniform(&mut rng)).collect();
    let values = points
        .iter()
        .map(|p| (2.0 * p[0]).sin() - p[1] * p[1] + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let state = SurrogateState::build(spec, points, values, DEFAULT_RANK_TOL).expect("valid instance");
    (state, bounds)
}

/// Interior point of `bounds` (at least `margin` of the width from each face).
fn interior(rng: &mut ChaCha8Rng, bounds: &Bounds, margin: f64) -> Vec<f64> {
    bounds
        .lower()
        .iter()
        .zip(bounds.upper())
        .map(|(l, u)| {
            let w = u - l;
            rng.random_range(l + margin * w..u - margin * w)
        })
        .collect()
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut a = x.to_vec();
    (0..x.len())
        .map(|j| {
            a[j] = x[j] + h;
            let up = f(&a);
            a[j] = x[j] - h;
            let down = f(&a);
            a[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-coordinate relative error, with magnitudes below
/// [`GRADIENT_SCALE_FLOOR`] treated as the floor.
pub fn gradient_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(GRADIENT_SCALE_FLOOR))
        .fold(0.0, f64::max)
}

fn gp_equivalence(opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut mean = Check::new("gp-equivalence", "mean", GP_EQUIVALENCE_TOL);
    let mut var = Check::new("gp-equivalence", "variance", GP_EQUIVALENCE_TOL);
    for seed in 0..100 {
        let inst = gp_instance(seed);
        let gp = GpPosterior::fit(&inst.spec, &inst.points, &inst.values).expect("PD kernel");
        let state =
            SurrogateState::build(inst.spec.clone(), inst.points, inst.values, DEFAULT_RANK_TOL).expect("valid");
        for q in &inst.queries {
            let (m, v) = gp.predict(q).expect("valid query");
            mean.error((state.predictive_mean(q).expect("valid query") - m).abs());
            var.error((opts.variance_scale * state.predictive_variance(q).expect("valid query") - v).abs());
        }
    }
    vec![mean.finish(), var.finish()]
}

fn geometric_view(opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut coef = Check::new("geometric-view", "projection coefficients", GEOMETRIC_TOL);
    let mut ident = Check::new("geometric-view", "residual identity", GEOMETRIC_TOL);
    let mut mean = Check::new("geometric-view", "projected mean", GEOMETRIC_TOL);
    for seed in 0..100 {
        let inst = gp_instance(seed);
        for q in &inst.queries {
            let mut r = verify_geometric_view(&inst.spec, &inst.points, &inst.values, q).expect("PD kernel");
            r.variance *= opts.variance_scale;
            coef.error(r.coefficient_error());
            ident.error(r.identity_error());
            mean.error(r.mean_error());
        }
    }
    vec![coef.finish(), ident.finish(), mean.finish()]
}

fn empirical_projection() -> Vec<CheckResult> {
    let mut resid = Check::new("empirical-projection", "residual vs pseudo-inverse", PROJECTION_TOL);
    let mut zero = Check::new("empirical-projection", "zero fill off basis", 0.0);
    let mut deficient = Check::new("empirical-projection", "rank deficiency detected", 0.0);
    for seed in 0..50 {
        let inst = rank_deficient_instance(seed);
        let n = inst.points.len();
        let state = SurrogateState::build(inst.spec, inst.points, inst.values, DEFAULT_RANK_TOL).expect("valid");
        deficient.flag(state.rank() < n);
        for q in &inst.queries {
            let r = verify_empirical_projection(&state, q).expect("valid query");
            resid.error(r.residual_error());
            zero.error(r.off_basis_max);
        }
    }
    vec![resid.finish(), zero.finish(), deficient.finish()]
}

fn gradients() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AD);
    let mut sim = Check::new("gradients", "similarity (finite differences)", GRADIENT_REL_TOL);
    let bounds = Bounds::new(vec![-1.0, -1.0, 0.05, 0.05], vec![1.0, 1.0, 1.0, 1.0]).expect("static box");
    let spec = SimilaritySpec::sym_kl_for_box(&bounds, 1e-6, 0.0).expect("valid box");
    for _ in 0..50 {
        let x = interior(&mut rng, &bounds, 0.05);
        let x2 = interior(&mut rng, &bounds, 0.05);
        let g = spec.grad_x(&x, &x2).expect("valid pair");
        let fd = central_difference(|p| spec.eval(p, &x2).expect("valid pair"), &x, FD_STEP);
        sim.error(gradient_rel_error(&g, &fd));
    }

    let mut g1 = Check::new("gradients", "u1 (finite differences)", GRADIENT_REL_TOL);
    let mut g2 = Check::new("gradients", "u2 (finite differences)", GRADIENT_REL_TOL);
    let kappa = 2.0;
    let floor = AcquisitionConfig::default().variance_floor;
    for k in 0..50u64 {
        let (state, b) = surrogate_instance(1000 + k, 8);
        let x = interior(&mut rng, &b, 0.05);
        let g = grad_u1(&state, &x).expect("valid point");
        let fd = central_difference(|p| u1(&state, p).expect("valid point"), &x, FD_STEP);
        g1.error(gradient_rel_error(&g, &fd));
        // skip points where the floor, or the kink of |A| at 0, is within reach of the stencil
        let var = state.predictive_variance(&x).expect("valid point");
        if var > 1e3 * floor.max(FD_STEP) {
            let g = grad_u2(&state, &x, kappa, floor).expect("valid point");
            let fd = central_difference(|p| u2(&state, p, kappa).expect("valid point"), &x, FD_STEP);
            g2.error(gradient_rel_error(&g, &fd));
        }
    }

    let mut mc = Check::new("gradients", "Monte Carlo vs closed form (pooled SE units)", 3.0);
    let x = [0.3, -0.2, 0.5, 0.8];
    let x2 = [-0.1, 0.4, 0.9, 0.3];
    let closed = spec.grad_x(&x, &x2).expect("valid pair");
    let seeds = 30;
    let mut sum = [0.0; 4];
    let mut se_sq = [0.0; 4];
    for s in 0..seeds {
        let px = GaussianConditional::from_point(&x, 20_000, 2 * s).expect("valid");
        let px2 = GaussianConditional::from_point(&x2, 20_000, 2 * s + 1).expect("valid");
        let est = grad_sym_kl_mc(&px, &px2).expect("valid");
        for j in 0..4 {
            sum[j] += est.gradient[j];
            se_sq[j] += est.std_error[j] * est.std_error[j];
        }
    }
    for j in 0..4 {
        let mean = sum[j] / seeds as f64;
        let pooled = se_sq[j].sqrt() / seeds as f64;
        mc.error((mean - closed[j]).abs() / pooled);
    }
    vec![sim.finish(), g1.finish(), g2.finish(), mc.finish()]
}

fn fixed_point() -> Vec<CheckResult> {
    let config = AcquisitionConfig::default();
    let mut stationary = Check::new("fixed-point", "converged gradient norm", config.grad_tol);
    let mut monotone = Check::new("fixed-point", "monotone accepted steps", 0.0);
    let mut size = Check::new("fixed-point", "|EQ| <= n", 0.0);
    for k in 0..20u64 {
        let n = 3 + (k as usize % 10);
        let (state, bounds) = surrogate_instance(2000 + k, n);
        let kind = if k % 3 == 0 {
            AcquisitionKind::U1
        } else {
            AcquisitionKind::U2
        };
        let eq = equilibrium_set(&state, &bounds, &config, kind).expect("valid instance");
        size.flag(eq.len() <= n);
        for e in eq.iter().filter(|e| e.converged) {
            let g = match kind {
                AcquisitionKind::U1 => grad_u1(&state, &e.location),
                AcquisitionKind::U2 => grad_u2(&state, &e.location, config.kappa, config.variance_floor),
            }
            .expect("valid point");
            let pg = bounds.project_gradient(&e.location, &g);
            stationary.error(pg.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        let acq = Acquisition {
            state: &state,
            kind,
            kappa: config.kappa,
            variance_floor: config.variance_floor,
        };
        for p in state.points() {
            let out = ascend(&acq, &bounds, p, &config);
            let drop = out.trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            monotone.error(drop);
        }
    }
    vec![stationary.finish(), monotone.finish(), size.finish()]
}

/// Runs the checks of `suite`.
pub fn run_checks(suite: Suite, opts: &VerifyOptions) -> Vec<CheckResult> {
    suite
        .members()
        .into_iter()
        .flat_map(|s| match s {
            Suite::GpEquivalence => gp_equivalence(opts),
            Suite::GeometricView => geometric_view(opts),
            Suite::EmpiricalProjection => empirical_projection(),
            Suite::Gradients => gradients(),
            Suite::FixedPoint => fixed_point(),
            Suite::All => unreachable!("expanded by members"),
        })
        .collect()
}

/// Prints one line per check; true iff every check passed.
pub fn run_suite<W: Write>(suite: Suite, opts: &VerifyOptions, out: &mut W) -> std::io::Result<bool> {
    let results = run_checks(suite, opts);
    for r in &results {
        writeln!(
            out,
            "{} {}: {} (worst {:.3e}, tol {:.1e}, {} cases)",
            if r.passed { "PASS" } else { "FAIL" },
            r.suite,
            r.name,
            r.worst,
            r.tolerance,
            r.cases
        )?;
    }
    Ok(results.iter().all(|r| r.passed))
}
