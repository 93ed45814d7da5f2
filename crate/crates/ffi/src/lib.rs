//! C ABI over `ebw-core`.
//!
//! Patterns are opaque heap handles created by `ebw_pattern_new` and released
//! with `ebw_pattern_free`. Every fallible call returns an [`EbwStatus`];
//! results are written through out-pointers, and on failure a message is kept
//! per thread and can be read with `ebw_last_error_message`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ebw_core::analytic;
use ebw_core::ebw::{self, DistanceLaw};
use ebw_core::patterns::AntennaPattern;
use ebw_core::scaling;
use ebw_core::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbwStatus {
    Ok = 0,
    InvalidParameter = 1,
    Numerical = 2,
    Io = 3,
    NullPointer = 4,
    InvalidUtf8 = 5,
    Panic = 6,
}

/// Opaque antenna pattern.
pub struct EbwPattern {
    inner: AntennaPattern,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> EbwStatus {
    match e {
        Error::InvalidParameter(_) => EbwStatus::InvalidParameter,
        Error::Numerical(_) => EbwStatus::Numerical,
        Error::Io(_) => EbwStatus::Io,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (EbwStatus, String)>) -> EbwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EbwStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EbwStatus::Panic
        }
    }
}

fn core<T>(r: ebw_core::Result<T>) -> Result<T, (EbwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EbwStatus, String) {
    (EbwStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (EbwStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn pattern<'a>(p: *const EbwPattern, what: &str) -> Result<&'a AntennaPattern, (EbwStatus, String)> {
    p.as_ref().map(|p| &p.inner).ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ebw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ebw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build a pattern from an id such as `omni`, `sector(0.25)`, `esnla(4)` or
/// `chebyshev(N=6;d=0.5;rms=30)`.
///
/// # Safety
/// `id` must be a valid NUL-terminated string and `out_pattern` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ebw_pattern_new(id: *const c_char, out_pattern: *mut *mut EbwPattern) -> EbwStatus {
    guard(|| {
        let slot = out(out_pattern, "out_pattern")?;
        *slot = std::ptr::null_mut();
        if id.is_null() {
            return Err(null("id"));
        }
        let id = CStr::from_ptr(id)
            .to_str()
            .map_err(|_| (EbwStatus::InvalidUtf8, "id is not valid UTF-8".to_string()))?;
        let inner = core(id.parse::<AntennaPattern>())?;
        *slot = Box::into_raw(Box::new(EbwPattern { inner }));
        Ok(())
    })
}

/// Release a pattern. Null is accepted.
///
/// # Safety
/// `p` must come from `ebw_pattern_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ebw_pattern_free(p: *mut EbwPattern) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Write the pattern id (as produced by the core library) into `buf`.
/// Returns the full id length excluding the NUL, or 0 for a null pattern.
///
/// # Safety
/// `p` must be a live handle or null; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ebw_pattern_id(p: *const EbwPattern, buf: *mut c_char, len: usize) -> usize {
    let Some(p) = p.as_ref() else { return 0 };
    let id = p.inner.id();
    if !buf.is_null() && len > 0 {
        let n = id.len().min(len - 1);
        std::ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    id.len()
}

/// Gain `G(θ)`, or `G(θ)^{1/α}` when `starred` is nonzero.
///
/// # Safety
/// `p` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ebw_pattern_gain(
    p: *const EbwPattern,
    theta: f64,
    alpha: f64,
    starred: c_int,
    value: *mut f64,
) -> EbwStatus {
    guard(|| {
        let p = pattern(p, "pattern")?;
        let v = out(value, "value")?;
        if starred != 0 && !(alpha >= 1.0) {
            return Err((EbwStatus::InvalidParameter, format!("alpha must be >= 1, got {alpha}")));
        }
        *v = p.evaluate(theta, alpha, starred != 0);
        Ok(())
    })
}

/// Monte Carlo effective beam width for the basis distance law of order `h`.
///
/// # Safety
/// `p` must be a live handle; `value` and `std_error` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebw_effective_beam_width(
    p: *const EbwPattern,
    h: f64,
    alpha: f64,
    samples: u64,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> EbwStatus {
    guard(|| {
        let p = pattern(p, "pattern")?;
        let (v, se) = (out(value, "value")?, out(std_error, "std_error")?);
        let law = core(DistanceLaw::basis(h))?;
        let e = core(ebw::effective_beam_width(p, &law, alpha, samples, seed))?;
        *v = e.value;
        *se = e.std_error;
        Ok(())
    })
}

/// Monte Carlo `Pr(YZ > X)` for a receive and a transmit pattern.
///
/// # Safety
/// `rx` and `tx` must be live handles; `value` and `std_error` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebw_interference_probability(
    rx: *const EbwPattern,
    tx: *const EbwPattern,
    h: f64,
    alpha: f64,
    samples: u64,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> EbwStatus {
    guard(|| {
        let (rx, tx) = (pattern(rx, "rx")?, pattern(tx, "tx")?);
        let (v, se) = (out(value, "value")?, out(std_error, "std_error")?);
        let law = core(DistanceLaw::basis(h))?;
        let e = core(ebw::interference_probability(rx, tx, &law, alpha, samples, seed))?;
        *v = e.value;
        *se = e.std_error;
        Ok(())
    })
}

/// Guard zone `Δ = SIR₀^{1/α} − 1` and `c₁ = π(1+Δ)²`.
///
/// # Safety
/// `delta` and `c1` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebw_guard_zone(sir0: f64, alpha: f64, delta: *mut f64, c1: *mut f64) -> EbwStatus {
    guard(|| {
        let (d, c) = (out(delta, "delta")?, out(c1, "c1")?);
        let g = core(analytic::guard_zone(sir0, alpha))?;
        *d = g.delta;
        *c = g.c1;
        Ok(())
    })
}

/// Rayleigh interference factor `F(α)`. For `α ≤ 2` the factor diverges:
/// `*divergent` is set to 1 and `*value` to +infinity.
///
/// # Safety
/// `value` and `divergent` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebw_f_alpha(alpha: f64, value: *mut f64, divergent: *mut c_int) -> EbwStatus {
    guard(|| {
        let (v, dv) = (out(value, "value")?, out(divergent, "divergent")?);
        match core(analytic::f_alpha(alpha))?.value() {
            Some(x) => {
                *v = x;
                *dv = 0;
            }
            None => {
                *v = f64::INFINITY;
                *dv = 1;
            }
        }
        Ok(())
    })
}

/// Least-squares fit of `w = b1 / n^γ` in log-log space.
///
/// # Safety
/// `n` and `w` must point to `len` doubles; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ebw_fit_power_law(
    n: *const f64,
    w: *const f64,
    len: usize,
    b1: *mut f64,
    gamma: *mut f64,
    r2: *mut f64,
) -> EbwStatus {
    guard(|| {
        if n.is_null() || w.is_null() {
            return Err(null("input array"));
        }
        let (b, g, r) = (out(b1, "b1")?, out(gamma, "gamma")?, out(r2, "r2")?);
        let (ns, ws) = (std::slice::from_raw_parts(n, len), std::slice::from_raw_parts(w, len));
        let pts: Vec<(f64, f64)> = ns.iter().copied().zip(ws.iter().copied()).collect();
        let f = core(scaling::fit_power_law_points(&pts))?;
        *b = f.b1;
        *g = f.gamma;
        *r = f.r2;
        Ok(())
    })
}
