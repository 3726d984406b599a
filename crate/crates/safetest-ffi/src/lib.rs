//! C ABI over the safetest kernels.
//!
//! Covers the pieces a non-Rust experimentation pipeline needs at data-plane
//! speed: the safe t-test e-value, its batch design size, the mSPRT mixture
//! likelihood ratio, the Ville rejection threshold, and a stateful
//! sample-ratio-mismatch monitor behind an opaque handle.
//!
//! Conventions:
//! - Every fallible function returns [`StStatus`] and writes its result
//!   through an out-pointer, touched only on [`StStatus::Ok`].
//! - Null pointers are rejected with [`StStatus::NullPointer`], never
//!   dereferenced.
//! - Panics cannot cross the boundary; they are caught and surfaced as
//!   [`StStatus::Panic`].
//! - `include/safetest.h` is generated from this file by cbindgen at build
//!   time and committed alongside it.

use std::panic::{catch_unwind, AssertUnwindSafe};

use safetest::classical::SummaryStats;
use safetest::error::Error;
use safetest::msprt::msprt_log_lambda;
use safetest::safe_prop::{SrmConfig, SrmMonitor};
use safetest::safe_t::{design_batch_n, safe_t_log_evalue, SafeTConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    /// Success; out-parameters are written.
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// Structurally invalid input (zero counts, successes above totals).
    InvalidInput = 2,
    /// An argument lies outside the mathematical domain of the operation.
    Domain = 3,
    /// Inputs are formally valid but leave the statistic undefined, for
    /// example a zero pooled variance.
    Degenerate = 4,
    /// An internal series failed to converge within its term budget.
    NoConvergence = 5,
    /// The result would overflow double range.
    Overflow = 6,
    /// The design search hit its cap before the threshold became reachable.
    NotReachable = 7,
    /// An internal invariant failed; the library caught a panic.
    Panic = 8,
}

fn status_of(e: &Error) -> StStatus {
    match e {
        Error::Domain(_) => StStatus::Domain,
        Error::Degenerate(_) => StStatus::Degenerate,
        Error::NoConvergence(_) => StStatus::NoConvergence,
        Error::Overflow(_) => StStatus::Overflow,
        Error::NotReachable { .. } => StStatus::NotReachable,
        _ => StStatus::InvalidInput,
    }
}

/// Shields the boundary: a panicking body becomes [`StStatus::Panic`].
fn guarded(body: impl FnOnce() -> StStatus) -> StStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(StStatus::Panic)
}

/// Writes `value` through `out` unless it is null.
///
/// Safety: `out` must be valid for writes when non-null; callers of the
/// extern functions guarantee this per their contracts.
unsafe fn write_out<T>(out: *mut T, value: T) -> StStatus {
    if out.is_null() {
        return StStatus::NullPointer;
    }
    unsafe { out.write(value) };
    StStatus::Ok
}

/// Short static description of a status code, NUL-terminated, never null.
#[no_mangle]
pub extern "C" fn st_status_message(status: StStatus) -> *const libc::c_char {
    let msg: &'static [u8] = match status {
        StStatus::Ok => b"ok\0",
        StStatus::NullPointer => b"required pointer was null\0",
        StStatus::InvalidInput => b"structurally invalid input\0",
        StStatus::Domain => b"argument outside the mathematical domain\0",
        StStatus::Degenerate => b"degenerate input leaves the statistic undefined\0",
        StStatus::NoConvergence => b"internal series failed to converge\0",
        StStatus::Overflow => b"result would overflow double range\0",
        StStatus::NotReachable => b"design cap reached before the threshold\0",
        StStatus::Panic => b"internal invariant failed\0",
    };
    msg.as_ptr().cast()
}

/// Log of the Ville rejection threshold `1/alpha`. An e-process rejects its
/// null at level alpha exactly when its log e-value reaches this bound.
///
/// # Safety
///
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn st_ville_log_threshold(alpha: f64, out: *mut f64) -> StStatus {
    guarded(|| {
        if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
            return StStatus::Domain;
        }
        unsafe { write_out(out, -alpha.ln()) }
    })
}

/// Log e-value of the safe t-test for a minimal effect `delta`, from
/// per-group summary statistics (count, mean, unbiased sample variance).
/// Group t is treatment, group c control; the alternative is a positive
/// standardized lift of delta on t.
///
/// # Safety
///
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn st_safe_t_log_evalue(
    n_t: u64,
    mean_t: f64,
    var_t: f64,
    n_c: u64,
    mean_c: f64,
    var_c: f64,
    delta: f64,
    out: *mut f64,
) -> StStatus {
    guarded(|| {
        let summaries = (|| {
            Ok::<_, Error>((SummaryStats::new(n_t, mean_t, var_t)?, SummaryStats::new(n_c, mean_c, var_c)?))
        })();
        let (t, c) = match summaries {
            Ok(pair) => pair,
            Err(e) => return status_of(&e),
        };
        match safe_t_log_evalue(&t, &c, delta) {
            Ok(log_e) => unsafe { write_out(out, log_e) },
            Err(e) => status_of(&e),
        }
    })
}

/// Smallest per-group batch size at which a sample showing exactly the
/// design effect `delta` already rejects at level alpha, searched up to
/// `cap`. Fails with `NOT_REACHABLE` when the cap is too small.
///
/// # Safety
///
/// `out_n` must be a valid pointer to a uint64_t.
#[no_mangle]
pub unsafe extern "C" fn st_safe_t_design_n(
    delta: f64,
    alpha: f64,
    cap: u64,
    out_n: *mut u64,
) -> StStatus {
    guarded(|| {
        let config = match SafeTConfig::new(delta, alpha) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        match design_batch_n(&config, cap) {
            Ok(n) => unsafe { write_out(out_n, n) },
            Err(e) => status_of(&e),
        }
    })
}

/// Log of the mSPRT mixture likelihood ratio after `n` pairs with observed
/// mean difference `mean_diff`, null difference `theta0`, known per-arm
/// variance `sigma2`, and mixing variance `gamma2`.
///
/// # Safety
///
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn st_msprt_log_lambda(
    n: u64,
    mean_diff: f64,
    theta0: f64,
    sigma2: f64,
    gamma2: f64,
    out: *mut f64,
) -> StStatus {
    guarded(|| match msprt_log_lambda(n, mean_diff, theta0, sigma2, gamma2) {
        Ok(log_lambda) => unsafe { write_out(out, log_lambda) },
        Err(e) => status_of(&e),
    })
}

/// Sequential sample-ratio-mismatch monitor. Opaque; create with
/// `st_srm_monitor_new`, feed with `st_srm_monitor_observe`, destroy with
/// `st_srm_monitor_free`.
pub struct StSrmMonitor {
    inner: SrmMonitor,
}

/// Creates a monitor for intended treatment share `theta0`, smallest
/// mismatch worth detecting `epsilon` (prior concentration
/// `1/(10 epsilon^2)` per side), and level `alpha`. On success writes an
/// owned handle; free it with `st_srm_monitor_free`.
///
/// # Safety
///
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn st_srm_monitor_new(
    theta0: f64,
    epsilon: f64,
    alpha: f64,
    out: *mut *mut StSrmMonitor,
) -> StStatus {
    guarded(|| {
        let monitor = match SrmConfig::new(theta0, epsilon, alpha).and_then(SrmMonitor::new) {
            Ok(m) => m,
            Err(e) => return status_of(&e),
        };
        let handle = Box::into_raw(Box::new(StSrmMonitor { inner: monitor }));
        unsafe { write_out(out, handle) }
    })
}

/// Feeds one batch of assignment counts (treatment is the arm with intended
/// share theta0) and writes the batch's log e-value contribution. The
/// monitor's running evidence and rejection state advance as a side effect.
///
/// # Safety
///
/// `monitor` must be a live handle from `st_srm_monitor_new`; `out_log_e`
/// must be a valid pointer to a double. No other thread may use the handle
/// concurrently.
#[no_mangle]
pub unsafe extern "C" fn st_srm_monitor_observe(
    monitor: *mut StSrmMonitor,
    n_treatment: u64,
    n_control: u64,
    out_log_e: *mut f64,
) -> StStatus {
    if monitor.is_null() {
        return StStatus::NullPointer;
    }
    let monitor = unsafe { &mut *monitor };
    guarded(|| match monitor.inner.observe(n_treatment, n_control) {
        Ok(log_e) => unsafe { write_out(out_log_e, log_e) },
        Err(e) => status_of(&e),
    })
}

/// Writes the accumulated log e-value of the monitor.
///
/// # Safety
///
/// `monitor` must be a live handle; `out` a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn st_srm_monitor_log_e(
    monitor: *const StSrmMonitor,
    out: *mut f64,
) -> StStatus {
    if monitor.is_null() {
        return StStatus::NullPointer;
    }
    let monitor = unsafe { &*monitor };
    guarded(|| unsafe { write_out(out, monitor.inner.log_e()) })
}

/// Writes the total assignment count at which the monitor first rejected,
/// or 0 if it has not rejected. A real rejection count is never 0.
///
/// # Safety
///
/// `monitor` must be a live handle; `out_n` a valid pointer to a uint64_t.
#[no_mangle]
pub unsafe extern "C" fn st_srm_monitor_rejected_at(
    monitor: *const StSrmMonitor,
    out_n: *mut u64,
) -> StStatus {
    if monitor.is_null() {
        return StStatus::NullPointer;
    }
    let monitor = unsafe { &*monitor };
    guarded(|| unsafe { write_out(out_n, monitor.inner.rejected_at().unwrap_or(0)) })
}

/// Destroys a monitor handle. Null is a no-op. The handle must not be used
/// afterwards.
///
/// # Safety
///
/// `monitor` must be null or a live handle from `st_srm_monitor_new`, freed
/// at most once.
#[no_mangle]
pub unsafe extern "C" fn st_srm_monitor_free(monitor: *mut StSrmMonitor) {
    if monitor.is_null() {
        return;
    }
    drop(unsafe { Box::from_raw(monitor) });
}
