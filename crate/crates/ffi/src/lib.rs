//! C interface to the universal mirror-prox solvers.
//!
//! Problems and run reports are opaque handles created by `ump_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`UmpStatus`]; on failure a description is available from
//! [`ump_last_error_message`] on the same thread.
//!
//! Functions taking `*const c_char` expect NUL-terminated UTF-8. Array
//! arguments come with an explicit length, which must match the problem
//! dimension.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use umprox::problems::{add_gaussian_noise, ProblemDescription};
use umprox::sump::run_stochastic;
use umprox::ump::run;
use umprox::{Point, RunOptions, RunReport, VIProblem};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UmpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    SolverError = 4,
    LengthMismatch = 5,
    OutOfRange = 6,
    Unavailable = 7,
    Panic = 8,
}

/// A problem instance: operator, feasible set and known constants.
pub struct UmpProblem {
    inner: VIProblem,
}

/// The outcome of one solver run.
pub struct UmpReport {
    inner: RunReport,
}

/// One logged row of a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UmpRow {
    /// Completed iterations.
    pub k: u64,
    /// Step parameter after `k` iterations.
    pub l: f64,
    /// Gap certificate `2D²L/k`.
    pub certificate: f64,
}

/// Scalars describing a finished run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UmpSummary {
    pub iterations: u64,
    pub diameter: f64,
    pub l0: f64,
    pub final_l: f64,
    pub certificate: f64,
    pub oracle_calls: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let msg = CString::new(bytes).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(UmpStatus, String);

impl From<umprox::Error> for Failure {
    fn from(e: umprox::Error) -> Self {
        let status = if e.is_invalid_input() {
            UmpStatus::InvalidArgument
        } else {
            UmpStatus::SolverError
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(UmpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UmpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UmpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UmpStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes a handle obtained from this library or null.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, expected: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len != expected {
        return Err(Failure(
            UmpStatus::LengthMismatch,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and the caller guarantees `len` readable values.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len != expected {
        return Err(Failure(
            UmpStatus::LengthMismatch,
            format!("{what} has length {len}, expected {expected}"),
        ));
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and the caller guarantees `len` writable values.
    Ok(unsafe { std::slice::from_raw_parts_mut(ptr, len) })
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null output pointer supplied by the caller.
    unsafe { out.write(value) };
    Ok(())
}

fn into_handle<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn ump_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ump_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from its JSON description, e.g.
/// `{"kind": "matrix_game", "a": [[0, 1], [-1, 0]]}`.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ump_problem_from_json(json: *const c_char, out: *mut *mut UmpProblem) -> UmpStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        // SAFETY: non-null NUL-terminated string per the contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(UmpStatus::InvalidUtf8, e.to_string()))?;
        let desc: ProblemDescription = serde_json::from_str(text).map_err(umprox::Error::from)?;
        let problem = VIProblem::from_description(&desc)?;
        unsafe { write_out(out, into_handle(UmpProblem { inner: problem }), "out") }
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must be null or a handle from [`ump_problem_from_json`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ump_problem_free(problem: *mut UmpProblem) {
    if !problem.is_null() {
        // SAFETY: handle created by `into_handle` and not yet freed.
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Dimension of the problem, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ump_problem_dim(problem: *const UmpProblem) -> usize {
    unsafe { problem.as_ref() }.map_or(0, |p| p.inner.set().dim())
}

/// Euclidean diameter of the feasible set.
///
/// # Safety
/// `problem` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_problem_diameter(problem: *const UmpProblem, out: *mut f64) -> UmpStatus {
    guard(|| {
        let p = unsafe { deref(problem, "problem") }?;
        unsafe { write_out(out, p.inner.diameter(), "out") }
    })
}

/// Projects `y` onto the feasible set, writing the result to `out`.
/// Both arrays have length `len`, the problem dimension.
///
/// # Safety
/// `y` must point to `len` readable and `out` to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ump_project(
    problem: *const UmpProblem,
    y: *const f64,
    out: *mut f64,
    len: usize,
) -> UmpStatus {
    guard(|| {
        let p = unsafe { deref(problem, "problem") }?;
        let dim = p.inner.set().dim();
        let y = unsafe { slice(y, len, dim, "y") }?;
        let x = p.inner.set().project(&Point::new(y.to_vec())?)?;
        unsafe { slice_mut(out, len, dim, "out") }?.copy_from_slice(&x);
        Ok(())
    })
}

/// Runs the deterministic method for `iterations` steps from the default
/// start.
///
/// # Safety
/// `problem` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_solve(problem: *const UmpProblem, iterations: u64, out: *mut *mut UmpReport) -> UmpStatus {
    guard(|| {
        let p = unsafe { deref(problem, "problem") }?;
        let report = run(&p.inner, iterations, &RunOptions::default())?;
        unsafe { write_out(out, into_handle(UmpReport { inner: report }), "out") }
    })
}

/// Runs the stochastic method with Gaussian noise of level `sigma` on the
/// operator, using the given seed.
///
/// # Safety
/// `problem` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_solve_stochastic(
    problem: *const UmpProblem,
    iterations: u64,
    sigma: f64,
    seed: u64,
    out: *mut *mut UmpReport,
) -> UmpStatus {
    guard(|| {
        let p = unsafe { deref(problem, "problem") }?;
        let oracle = add_gaussian_noise(&p.inner, sigma)?;
        let report = run_stochastic(&p.inner, &oracle, iterations, seed, &RunOptions::default())?;
        unsafe { write_out(out, into_handle(UmpReport { inner: report.report }), "out") }
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must be null or a handle from a solve call that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ump_report_free(report: *mut UmpReport) {
    if !report.is_null() {
        // SAFETY: handle created by `into_handle` and not yet freed.
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Final scalars of a run.
///
/// # Safety
/// `report` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_report_summary(report: *const UmpReport, out: *mut UmpSummary) -> UmpStatus {
    guard(|| {
        let r = &unsafe { deref(report, "report") }?.inner;
        let last = r
            .rows
            .last()
            .ok_or_else(|| Failure(UmpStatus::Unavailable, "report has no rows".into()))?;
        let summary = UmpSummary {
            iterations: r.iterations,
            diameter: r.diameter,
            l0: r.l0,
            final_l: last.l,
            certificate: last.certificate,
            oracle_calls: r.oracle_calls,
        };
        unsafe { write_out(out, summary, "out") }
    })
}

/// Number of logged rows, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ump_report_row_count(report: *const UmpReport) -> usize {
    unsafe { report.as_ref() }.map_or(0, |r| r.inner.rows.len())
}

/// Logged row `index`.
///
/// # Safety
/// `report` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_report_row(report: *const UmpReport, index: usize, out: *mut UmpRow) -> UmpStatus {
    guard(|| {
        let r = &unsafe { deref(report, "report") }?.inner;
        let row = r.rows.get(index).ok_or_else(|| {
            Failure(
                UmpStatus::OutOfRange,
                format!("row {index} requested, report has {}", r.rows.len()),
            )
        })?;
        unsafe {
            write_out(
                out,
                UmpRow {
                    k: row.k,
                    l: row.l,
                    certificate: row.certificate,
                },
                "out",
            )
        }
    })
}

/// Copies the averaged iterate `ŵ` into `out` of length `len`.
///
/// # Safety
/// `report` must be null or a live handle; `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ump_report_average(report: *const UmpReport, out: *mut f64, len: usize) -> UmpStatus {
    guard(|| {
        let r = &unsafe { deref(report, "report") }?.inner;
        unsafe { slice_mut(out, len, r.w_hat.len(), "out") }?.copy_from_slice(&r.w_hat);
        Ok(())
    })
}

/// Exact restricted gap of the report's averaged iterate. Returns
/// `Unavailable` for problems without a closed-form gap.
///
/// # Safety
/// Handles must be null or live; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn ump_report_exact_gap(
    problem: *const UmpProblem,
    report: *const UmpReport,
    out: *mut f64,
) -> UmpStatus {
    guard(|| {
        let p = &unsafe { deref(problem, "problem") }?.inner;
        let r = &unsafe { deref(report, "report") }?.inner;
        if !p.has_exact_gap() {
            return Err(Failure(
                UmpStatus::Unavailable,
                format!("no exact gap for {}", p.label()),
            ));
        }
        if r.w_hat.len() != p.set().dim() {
            return Err(Failure(
                UmpStatus::LengthMismatch,
                "report does not belong to this problem".into(),
            ));
        }
        let gap = p.exact_gap(&r.w_hat)?.value;
        unsafe { write_out(out, gap, "out") }
    })
}
