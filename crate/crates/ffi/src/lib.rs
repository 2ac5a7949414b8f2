//! C ABI over `netsynth`.
//!
//! Objects are opaque heap handles freed by their `*_free` function. Every entry
//! point returns an [`NsStatus`]; on failure [`ns_last_error`] describes the cause.
//! Matrices cross the boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use netsynth::analysis::{dense_closed_loop, hinf_norm, verify_certificate};
use netsynth::lmi::MultiplierMode;
use netsynth::model::io::system_from_json;
use netsynth::model::{ControllerGains, HomogeneousSystem};
use netsynth::synthesis::{synthesize, SynthesisMode, SynthesisOptions, SynthesisResult};
use netsynth::Error;

/// Opaque network description.
pub struct NsSystem(HomogeneousSystem);

/// Opaque synthesis result.
pub struct NsResult(SynthesisResult);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    InvalidArgument = 5,
    Infeasible = 6,
    VerificationFailed = 7,
    SizeGuard = 8,
    Solver = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NsMode {
    Kron = 0,
    Blockdiag = 1,
    Full = 2,
}

/// Synthesis settings. Non-positive gamma bounds and epsilon select the library defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NsOptions {
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub bisect_tol: f64,
    pub epsilon: f64,
    /// Nonzero: multiplier condition only at the extreme eigenvalues.
    pub multiplier_extremes: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> NsStatus {
    match e {
        Error::Parse(_) => NsStatus::Parse,
        Error::Validation(_) | Error::Shape(_) | Error::UnsupportedInterconnection(_) | Error::UnknownFixture(_) => {
            NsStatus::Validation
        }
        Error::InvalidArgument(_) => NsStatus::InvalidArgument,
        Error::InfeasibleAtGammaHi { .. } => NsStatus::Infeasible,
        Error::VerificationFailed { .. } | Error::SingularF { .. } => NsStatus::VerificationFailed,
        Error::SizeGuard { .. } => NsStatus::SizeGuard,
        Error::Solver(_) => NsStatus::Solver,
        Error::Io(_) => NsStatus::Io,
    }
}

enum Fail {
    Status(NsStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NsStatus::Ok
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {msg}"));
            NsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(NsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Status(NsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn matrix_arg(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(p, rows * cols);
    Ok(DMatrix::from_row_slice(rows, cols, s))
}

unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64, len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let need = m.len();
    if len < need {
        return Err(Fail::Status(NsStatus::BufferTooSmall, format!("buffer holds {len} values, need {need}")));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

/// Message for the most recent failure on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ns_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[no_mangle]
pub extern "C" fn ns_options_default() -> NsOptions {
    let d = SynthesisOptions::default();
    NsOptions { gamma_lo: 0.0, gamma_hi: 0.0, bisect_tol: d.bisect_tol, epsilon: 0.0, multiplier_extremes: 0 }
}

/// Parses a JSON system description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_system_from_json(json: *const c_char, out: *mut *mut NsSystem) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sys = system_from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(NsSystem(sys)));
        Ok(())
    })
}

/// Loads a bundled system by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_system_fixture(name: *const c_char, out: *mut *mut NsSystem) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let sys = netsynth::fixtures::load_fixture(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(NsSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `sys` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_system_free(sys: *mut NsSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of subsystems, states and inputs per subsystem.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_system_dims(
    sys: *const NsSystem,
    n_subsystems: *mut usize,
    n_states: *mut usize,
    n_inputs: *mut usize,
) -> NsStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if n_subsystems.is_null() || n_states.is_null() || n_inputs.is_null() {
            return Err(null("output"));
        }
        *n_subsystems = s.0.n_subsystems();
        *n_states = s.0.dims.n;
        *n_inputs = s.0.dims.n_u;
        Ok(())
    })
}

fn options_from(o: Option<&NsOptions>) -> SynthesisOptions {
    let mut opts = SynthesisOptions::default();
    if let Some(o) = o {
        opts.gamma_lo = (o.gamma_lo > 0.0).then_some(o.gamma_lo);
        opts.gamma_hi = (o.gamma_hi > 0.0).then_some(o.gamma_hi);
        opts.bisect_tol = o.bisect_tol;
        opts.epsilon = (o.epsilon > 0.0).then_some(o.epsilon);
        if o.multiplier_extremes != 0 {
            opts.multiplier_mode = MultiplierMode::ConvexifiedExtremes;
        }
    }
    opts
}

/// Synthesises and verifies a controller. `options` may be null for defaults.
///
/// # Safety
/// `sys` must be a live handle, `options` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ns_synthesize(
    sys: *const NsSystem,
    mode: NsMode,
    options: *const NsOptions,
    out: *mut *mut NsResult,
) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        let mode = match mode {
            NsMode::Kron => SynthesisMode::Kron,
            NsMode::Blockdiag => SynthesisMode::Blockdiag,
            NsMode::Full => SynthesisMode::Full,
        };
        let r = synthesize(&s.0, mode, &options_from(options.as_ref()))?;
        *out = Box::into_raw(Box::new(NsResult(r)));
        Ok(())
    })
}

/// # Safety
/// `res` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_result_free(res: *mut NsResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Certified and verified γ.
///
/// # Safety
/// `res` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn ns_result_gamma(res: *const NsResult, certified: *mut f64, verified: *mut f64) -> NsStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        if !certified.is_null() {
            *certified = r.0.gamma_certified;
        }
        if !verified.is_null() {
            *verified = r.0.gamma_verified;
        }
        Ok(())
    })
}

/// Copies K^d and K^i (n_u × n each, row-major) into buffers of `len` doubles.
///
/// # Safety
/// `res` must be a live handle and both buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_result_gains(res: *const NsResult, k_d: *mut f64, k_i: *mut f64, len: usize) -> NsStatus {
    guard(|| {
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        write_matrix(&r.0.gains.k_d, k_d, len)?;
        write_matrix(&r.0.gains.k_i, k_i, len)
    })
}

/// Full result as JSON. Free the string with [`ns_string_free`].
///
/// # Safety
/// `res` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ns_result_to_json(res: *const NsResult, out: *mut *mut c_char) -> NsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let r = res.as_ref().ok_or_else(|| null("res"))?;
        let text = serde_json::to_string(&r.0).map_err(|e| Fail::Status(NsStatus::Parse, e.to_string()))?;
        *out = CString::new(text).map_err(|e| Fail::Status(NsStatus::Parse, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn gains_arg(s: &NsSystem, k_d: *const f64, k_i: *const f64) -> Result<ControllerGains, Fail> {
    let (r, c) = (s.0.dims.n_u, s.0.dims.n);
    Ok(ControllerGains { k_d: matrix_arg(k_d, r, c, "k_d")?, k_i: matrix_arg(k_i, r, c, "k_i")? })
}

/// H∞ norm of the network closed under u = (I⊗K^d + P⊗K^i)x; +∞ if unstable.
///
/// # Safety
/// `sys` must be a live handle, `k_d` and `k_i` must hold n_u·n doubles, `norm` valid.
#[no_mangle]
pub unsafe extern "C" fn ns_closed_loop_hinf(
    sys: *const NsSystem,
    k_d: *const f64,
    k_i: *const f64,
    norm: *mut f64,
) -> NsStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if norm.is_null() {
            return Err(null("norm"));
        }
        let k = gains_arg(s, k_d, k_i)?;
        let ss = dense_closed_loop(&s.0, &k)?;
        *norm = hinf_norm(&ss, 1e-7)?.norm;
        Ok(())
    })
}

/// Checks that the gains stabilise the network with H∞ norm at most γ.
/// Returns `Ok` and sets `passed` to 0 or 1.
///
/// # Safety
/// As for [`ns_closed_loop_hinf`]; `passed` valid.
#[no_mangle]
pub unsafe extern "C" fn ns_verify(
    sys: *const NsSystem,
    k_d: *const f64,
    k_i: *const f64,
    gamma: f64,
    passed: *mut i32,
) -> NsStatus {
    guard(|| {
        let s = sys.as_ref().ok_or_else(|| null("sys"))?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Fail::Lib(Error::InvalidArgument(format!("gamma must be positive, got {gamma}"))));
        }
        let k = gains_arg(s, k_d, k_i)?;
        let rep = verify_certificate(&s.0, &k, gamma);
        *passed = rep.passed as i32;
        Ok(())
    })
}
