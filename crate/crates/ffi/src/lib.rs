//! C ABI over `abo-core`.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! with the matching `*_free`. Every fallible call returns an [`AboStatus`];
//! on failure a message is available from [`abo_last_error_message`] on the
//! same thread. Panics never cross the boundary.
//!
//! Points are passed as `dim` contiguous doubles; point sets as `n * dim`
//! doubles in row-major order.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use abo_core::acquisition::{grad_u1, grad_u2, u1, u2};
use abo_core::influence::SurrogateState;
use abo_core::similarity::SimilaritySpec;
use abo_core::{AboError, Bounds};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AboStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Panic = 5,
}

/// Acquisition function selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AboAcquisition {
    /// Predictive mean.
    U1 = 0,
    /// Predictive mean plus `kappa` predictive standard deviations.
    U2 = 1,
}

/// Opaque similarity score.
pub struct AboSimilarity {
    spec: SimilaritySpec,
}

/// Opaque influence surrogate fitted to a data set.
pub struct AboSurrogate {
    state: SurrogateState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &AboError) -> AboStatus {
    match err {
        AboError::DimensionMismatch { .. } | AboError::LengthMismatch { .. } => AboStatus::DimensionMismatch,
        AboError::SingularMatrix(_) | AboError::Factorization(_) | AboError::NonFiniteValue(_) => {
            AboStatus::Numerical
        }
        _ => AboStatus::InvalidArgument,
    }
}

struct Failure(AboStatus, String);

impl From<AboError> for Failure {
    fn from(e: AboError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AboStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus a thread-local
/// message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> AboStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AboStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AboStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to `len` readable doubles.
unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable doubles.
unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be null or a valid pointer to `T`.
unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: checked non-null; the caller guarantees it is writable
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn abo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// RBF score `exp(-|x - x'|^2 / (2 lengthscale^2))` with observation noise variance `noise`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_rbf_new(lengthscale: f64, noise: f64, out: *mut *mut AboSimilarity) -> AboStatus {
    guard(|| write_out(out, AboSimilarity { spec: SimilaritySpec::rbf(lengthscale, noise)? }))
}

/// Symmetric-KL score between diagonal Gaussians; points are `[mean; variances]`
/// with `half_dim` means.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_sym_kl_new(
    constant: f64,
    half_dim: usize,
    sigma_min: f64,
    noise: f64,
    out: *mut *mut AboSimilarity,
) -> AboStatus {
    guard(|| {
        write_out(
            out,
            AboSimilarity {
                spec: SimilaritySpec::sym_kl(constant, half_dim, sigma_min, noise)?,
            },
        )
    })
}

/// Symmetric-KL score with the constant chosen so the score is non-negative
/// on the box `[lower, upper]` of dimension `dim`.
///
/// # Safety
/// `lower` and `upper` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_sym_kl_for_box(
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    sigma_min: f64,
    noise: f64,
    out: *mut *mut AboSimilarity,
) -> AboStatus {
    guard(|| {
        let bounds = Bounds::new(input(lower, dim, "lower")?.to_vec(), input(upper, dim, "upper")?.to_vec())?;
        write_out(
            out,
            AboSimilarity {
                spec: SimilaritySpec::sym_kl_for_box(&bounds, sigma_min, noise)?,
            },
        )
    })
}

/// # Safety
/// `sim` must be null or a handle from `abo_similarity_*_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_free(sim: *mut AboSimilarity) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// `S(x, x2)`.
///
/// # Safety
/// `x` and `x2` must point to `dim` doubles and `out` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_eval(
    sim: *const AboSimilarity,
    x: *const f64,
    x2: *const f64,
    dim: usize,
    out: *mut f64,
) -> AboStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        let v = sim.spec.eval(input(x, dim, "x")?, input(x2, dim, "x2")?)?;
        output(out, 1, "out")?[0] = v;
        Ok(())
    })
}

/// Gradient of `S(x, x2)` with respect to `x`, written to `grad` (`dim` doubles).
///
/// # Safety
/// `x`, `x2` must point to `dim` doubles and `grad` to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn abo_similarity_grad(
    sim: *const AboSimilarity,
    x: *const f64,
    x2: *const f64,
    dim: usize,
    grad: *mut f64,
) -> AboStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        let g = sim.spec.grad_x(input(x, dim, "x")?, input(x2, dim, "x2")?)?;
        output(grad, dim, "grad")?.copy_from_slice(&g);
        Ok(())
    })
}

/// Fits a surrogate to `n` points (row-major, `n * dim` doubles) and their
/// values. The similarity handle is copied and may be freed afterwards.
///
/// # Safety
/// `points` must point to `n * dim` doubles, `values` to `n` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_new(
    sim: *const AboSimilarity,
    points: *const f64,
    values: *const f64,
    n: usize,
    dim: usize,
    rank_tol: f64,
    out: *mut *mut AboSurrogate,
) -> AboStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        let total = n
            .checked_mul(dim)
            .ok_or_else(|| Failure(AboStatus::InvalidArgument, "n * dim overflows".into()))?;
        if n > 0 && dim == 0 {
            return Err(Failure(AboStatus::InvalidArgument, "dim must be positive".into()));
        }
        let flat = input(points, total, "points")?;
        let pts: Vec<Vec<f64>> = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let ys = input(values, n, "values")?.to_vec();
        let state = SurrogateState::build(sim.spec.clone(), pts, ys, rank_tol)?;
        write_out(out, AboSurrogate { state })
    })
}

/// # Safety
/// `s` must be null or a handle from `abo_surrogate_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_free(s: *mut AboSurrogate) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of data points and the numerical rank of the regularised Gram matrix.
///
/// # Safety
/// `n_out` and `rank_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_size(s: *const AboSurrogate, n_out: *mut usize, rank_out: *mut usize) -> AboStatus {
    guard(|| {
        let s = handle(s, "surrogate")?;
        if n_out.is_null() || rank_out.is_null() {
            return Err(null("output"));
        }
        *n_out = s.state.len();
        *rank_out = s.state.rank();
        Ok(())
    })
}

/// Predictive mean and variance at `x`.
///
/// # Safety
/// `x` must point to `dim` doubles; `mean` and `variance` to one writable double each.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_predict(
    s: *const AboSurrogate,
    x: *const f64,
    dim: usize,
    mean: *mut f64,
    variance: *mut f64,
) -> AboStatus {
    guard(|| {
        let s = handle(s, "surrogate")?;
        let x = input(x, dim, "x")?;
        let m = s.state.predictive_mean(x)?;
        let v = s.state.predictive_variance(x)?;
        output(mean, 1, "mean")?[0] = m;
        output(variance, 1, "variance")?[0] = v;
        Ok(())
    })
}

/// Influence coefficients of `x` (`n` doubles) and the least-squares residual norm.
///
/// # Safety
/// `x` must point to `dim` doubles, `coefficients` to `n` writable doubles
/// (`n` as reported by `abo_surrogate_size`) and `residual` to one.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_influence(
    s: *const AboSurrogate,
    x: *const f64,
    dim: usize,
    coefficients: *mut f64,
    residual: *mut f64,
) -> AboStatus {
    guard(|| {
        let s = handle(s, "surrogate")?;
        let r = s.state.influence_vector(input(x, dim, "x")?)?;
        output(coefficients, r.coefficients.len(), "coefficients")?.copy_from_slice(&r.coefficients);
        output(residual, 1, "residual")?[0] = r.residual;
        Ok(())
    })
}

/// Acquisition value at `x`, and its gradient if `grad` is non-null.
///
/// # Safety
/// `x` must point to `dim` doubles, `value` to one writable double and
/// `grad` to null or `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn abo_surrogate_acquisition(
    s: *const AboSurrogate,
    kind: AboAcquisition,
    kappa: f64,
    variance_floor: f64,
    x: *const f64,
    dim: usize,
    value: *mut f64,
    grad: *mut f64,
) -> AboStatus {
    guard(|| {
        let s = handle(s, "surrogate")?;
        if !(kappa >= 0.0) || !(variance_floor > 0.0) {
            return Err(Failure(
                AboStatus::InvalidArgument,
                format!("need kappa >= 0 and variance_floor > 0, got {kappa} and {variance_floor}"),
            ));
        }
        let x = input(x, dim, "x")?;
        let v = match kind {
            AboAcquisition::U1 => u1(&s.state, x)?,
            AboAcquisition::U2 => u2(&s.state, x, kappa)?,
        };
        output(value, 1, "value")?[0] = v;
        if !grad.is_null() {
            let g = match kind {
                AboAcquisition::U1 => grad_u1(&s.state, x)?,
                AboAcquisition::U2 => grad_u2(&s.state, x, kappa, variance_floor)?,
            };
            output(grad, dim, "grad")?.copy_from_slice(&g);
        }
        Ok(())
    })
}
