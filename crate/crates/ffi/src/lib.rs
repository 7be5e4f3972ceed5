//! C ABI over the `boundkey` library.
//!
//! Objects cross the boundary as opaque handles (`BkState`, `BkOperator`) that
//! the caller releases with the matching `*_free`. Every fallible call returns
//! a [`BkStatus`]; on failure, [`bk_last_error_message`] describes the error
//! for the calling thread. Strings handed out by the library are released
//! with [`bk_string_free`]. Matrices are exchanged row-major with the leftmost
//! subsystem most significant.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use boundkey::matrix::{self, MatrixJson, Operator};
use boundkey::private::{self, CcqReport, ProductBasis};
use boundkey::protocol::{self, MemCap};
use boundkey::states::{self, KeyShieldState};
use boundkey::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotHermitian = 4,
    MemoryCap = 5,
    Numerical = 6,
    Parse = 7,
    Panic = 8,
}

/// A key/shield state on `[A, B, A', B']`.
pub struct BkState(KeyShieldState);

/// A dense operator with subsystem dimensions.
pub struct BkOperator(Operator);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn status_of(err: &Error) -> BkStatus {
    match err {
        Error::ShapeMismatch { .. } | Error::DimensionMismatch(_) | Error::SubsystemOutOfRange { .. } => {
            BkStatus::DimensionMismatch
        }
        Error::NotHermitian { .. } => BkStatus::NotHermitian,
        Error::InvalidParameter(_) => BkStatus::InvalidArgument,
        Error::MemoryCap { .. } => BkStatus::MemoryCap,
        Error::NotDensityMatrix(_) | Error::NotUnitary { .. } | Error::DegeneratePostselection(_) => {
            BkStatus::Numerical
        }
        Error::Format(_) | Error::Json(_) | Error::Csv(_) | Error::Io(_) => BkStatus::Parse,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::Lib(err)
    }
}

/// Runs `body`, converting errors and panics into a status and the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> BkStatus {
    let (status, msg) = match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => return BkStatus::Ok,
        Ok(Err(Failure::Null(what))) => (BkStatus::NullPointer, format!("null pointer: {what}")),
        Ok(Err(Failure::Arg(msg))) => (BkStatus::InvalidArgument, msg),
        Ok(Err(Failure::Lib(err))) => (status_of(&err), err.to_string()),
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (BkStatus::Panic, format!("panic: {text}"))
        }
    };
    set_last_error(&msg);
    status
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn cap_of(mem_cap: usize) -> MemCap {
    if mem_cap == 0 {
        MemCap::DEFAULT
    } else {
        MemCap(mem_cap)
    }
}

fn into_c_string(text: String) -> Result<*mut c_char, Failure> {
    CString::new(text).map(CString::into_raw).map_err(|_| Failure::Arg("string contains a NUL byte".into()))
}

/// Message for the last failed call on this thread; empty if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn bk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `ρ^(D)` with shield dimension `dim` per side (`dim >= 3`).
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn bk_make_rho(dim: usize, out: *mut *mut BkState) -> BkStatus {
    guard(|| {
        let state = states::make_rho(dim)?;
        write(out, Box::into_raw(Box::new(BkState(state))), "out")
    })
}

/// `ρ^(D,k)` from its closed form. `mem_cap = 0` selects the default cap.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn bk_rho_k_closed_form(
    dim: usize,
    k: usize,
    mem_cap: usize,
    out: *mut *mut BkState,
) -> BkStatus {
    guard(|| {
        let state = protocol::rho_k_closed_form(dim, k, cap_of(mem_cap))?;
        write(out, Box::into_raw(Box::new(BkState(state))), "out")
    })
}

/// One dense recurrence step; `success_probability` may be null.
///
/// # Safety
/// `accumulated` and `fresh` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_recurrence_step(
    accumulated: *const BkState,
    fresh: *const BkState,
    mem_cap: usize,
    out: *mut *mut BkState,
    success_probability: *mut f64,
) -> BkStatus {
    guard(|| {
        let acc = deref(accumulated, "accumulated")?;
        let fresh = deref(fresh, "fresh")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let result = protocol::recurrence_step(&acc.0, &fresh.0, cap_of(mem_cap))?;
        if !success_probability.is_null() {
            success_probability.write(result.success_probability);
        }
        out.write(Box::into_raw(Box::new(BkState(result.state))));
        Ok(())
    })
}

/// Side length of the state's matrix.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_state_dim(state: *const BkState, out: *mut usize) -> BkStatus {
    guard(|| write(out, deref(state, "state")?.0.rho().dim(), "out"))
}

/// Copies the state's matrix row-major into `re` and `im` (each `len = dim * dim` long).
/// `im` may be null for real states.
///
/// # Safety
/// `re` (and `im`, if given) must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bk_state_copy_matrix(
    state: *const BkState,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> BkStatus {
    guard(|| {
        let m = deref(state, "state")?.0.rho();
        let n = m.dim();
        if len != n * n {
            return Err(Failure::Arg(format!("buffer length {len} for a {n}x{n} matrix")));
        }
        if re.is_null() {
            return Err(Failure::Null("re"));
        }
        if im.is_null() && !m.is_real() {
            return Err(Failure::Arg("state has an imaginary part; pass an im buffer".into()));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        for r in 0..n {
            for c in 0..n {
                re[r * n + c] = m.data()[(r, c)].re;
            }
        }
        if !im.is_null() {
            let im = std::slice::from_raw_parts_mut(im, len);
            for r in 0..n {
                for c in 0..n {
                    im[r * n + c] = m.data()[(r, c)].im;
                }
            }
        }
        Ok(())
    })
}

/// Trace norm of the `|00><11|` key block.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_state_key_block_trace_norm(state: *const BkState, out: *mut f64) -> BkStatus {
    guard(|| {
        let norm = protocol::key_block_trace_norm(&deref(state, "state")?.0)?;
        write(out, norm, "out")
    })
}

/// Smallest eigenvalue after transposing `B` and `B'`, and whether it is at least `-tol`.
///
/// # Safety
/// `state` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_state_check_ppt(
    state: *const BkState,
    tol: f64,
    min_eigenvalue: *mut f64,
    is_ppt: *mut bool,
) -> BkStatus {
    guard(|| {
        let report = states::check_ppt(&deref(state, "state")?.0, tol)?;
        write(min_eigenvalue, report.min_eigenvalue, "min_eigenvalue")?;
        write(is_ppt, report.is_ppt, "is_ppt")
    })
}

/// ccq report of the state in the standard key basis as JSON
/// `{"p", "eve_pairwise_max_distance", "secure", "dw_rate"}`.
///
/// # Safety
/// `state` must be a live handle; `out` receives a string for [`bk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn bk_state_ccq_report_json(state: *const BkState, tol: f64, out: *mut *mut c_char) -> BkStatus {
    guard(|| {
        let state = &deref(state, "state")?.0;
        let c = private::ccq(state, &ProductBasis::standard(state.key_dim()))?;
        let json = serde_json_string(&CcqReport::from_ccq(&c, tol)?)?;
        write(out, into_c_string(json)?, "out")
    })
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string(value).map_err(|e| Failure::Lib(e.into()))
}

/// Copies the state into an operator handle.
///
/// # Safety
/// `state` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_state_to_operator(state: *const BkState, out: *mut *mut BkOperator) -> BkStatus {
    guard(|| {
        let op = deref(state, "state")?.0.rho().clone();
        write(out, Box::into_raw(Box::new(BkOperator(op))), "out")
    })
}

/// # Safety
/// `state` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bk_state_free(state: *mut BkState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// `X_D` on `C^D ⊗ C^D`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_make_x(dim: usize, out: *mut *mut BkOperator) -> BkStatus {
    guard(|| {
        let x = states::make_x(dim)?.x;
        write(out, Box::into_raw(Box::new(BkOperator(x))), "out")
    })
}

/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_dim(op: *const BkOperator, out: *mut usize) -> BkStatus {
    guard(|| write(out, deref(op, "op")?.0.dim(), "out"))
}

/// Sum of singular values.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_trace_norm(op: *const BkOperator, out: *mut f64) -> BkStatus {
    guard(|| write(out, matrix::trace_norm(&deref(op, "op")?.0), "out"))
}

/// Parses `{"dims": [..], "re": [[..]], "im": [[..]]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_from_json(json: *const c_char, out: *mut *mut BkOperator) -> BkStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text =
            CStr::from_ptr(json).to_str().map_err(|_| Failure::Lib(Error::Format("input is not UTF-8".into())))?;
        let parsed: MatrixJson = serde_json::from_str(text).map_err(Error::from)?;
        let op = Operator::try_from(parsed)?;
        write(out, Box::into_raw(Box::new(BkOperator(op))), "out")
    })
}

/// Serializes an operator in the form accepted by [`bk_operator_from_json`].
///
/// # Safety
/// `op` must be a live handle; `out` receives a string for [`bk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn bk_operator_to_json(op: *const BkOperator, out: *mut *mut c_char) -> BkStatus {
    guard(|| {
        let json = serde_json_string(&MatrixJson::from(&deref(op, "op")?.0))?;
        write(out, into_c_string(json)?, "out")
    })
}

/// # Safety
/// `op` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_free(op: *mut BkOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Key-block criterion series for `k = 1..=k_max` as CSV.
///
/// # Safety
/// `out` receives a string for [`bk_string_free`].
#[no_mangle]
pub unsafe extern "C" fn bk_criterion_csv(dim: usize, k_max: usize, mem_cap: usize, out: *mut *mut c_char) -> BkStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let csv = protocol::criterion_series(dim, k_max, cap_of(mem_cap))?.to_csv()?;
        out.write(into_c_string(csv)?);
        Ok(())
    })
}
