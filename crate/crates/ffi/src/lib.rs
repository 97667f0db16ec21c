//! C ABI over the `microlocal` toolkit.
//!
//! Every function returns an [`MlStatus`]; on failure the message is kept in
//! a thread-local slot readable with [`ml_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_from_json` functions and released by
//! the matching `*_free`. Panics never cross the boundary; they are reported
//! as [`MlStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use microlocal::flow::{integrate, Tolerances, Trajectory};
use microlocal::geometry::{beta, grad_tau, tau_incoming, tau_outgoing, Cometric, CometricSpec, Orientation, PhasePoint};
use microlocal::linalg::quad_form;
use microlocal::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Wrong dimension, non-UTF-8 text or an out-of-range index.
    InvalidArgument = 2,
    /// The metric description was rejected.
    Config = 3,
    /// The phase point lies outside the domain of the requested quantity.
    Domain = 4,
    /// Any other failure of the computation.
    Computation = 5,
    /// The library panicked; this is a bug.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlOrientation {
    Incoming = 0,
    Outgoing = 1,
}

impl From<MlOrientation> for Orientation {
    fn from(o: MlOrientation) -> Self {
        match o {
            MlOrientation::Incoming => Orientation::Incoming,
            MlOrientation::Outgoing => Orientation::Outgoing,
        }
    }
}

/// Opaque cometric handle.
pub struct MlCometric {
    inner: Cometric,
}

/// Opaque trajectory handle.
pub struct MlTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MlStatus {
    match e {
        Error::Config { .. } | Error::UnsupportedFamily(_) => MlStatus::Config,
        Error::Domain { .. } | Error::ExcludedPoint(_) | Error::SingularConfiguration { .. } | Error::ZeroVelocity { .. } => {
            MlStatus::Domain
        }
        Error::DimensionMismatch { .. } | Error::InvalidParameters(_) => MlStatus::InvalidArgument,
        _ => MlStatus::Computation,
    }
}

struct Fail(MlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MlStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside microlocal".into());
            MlStatus::Panic
        }
    }
}

unsafe fn cometric<'a>(g: *const MlCometric) -> Result<&'a Cometric, Fail> {
    g.as_ref().map(|h| &h.inner).ok_or_else(|| null("cometric"))
}

/// Copies `x` and `xi` (each `n` doubles) after checking them against `g`.
unsafe fn phase_point(g: &Cometric, x: *const f64, xi: *const f64, n: usize) -> Result<PhasePoint, Fail> {
    if x.is_null() || xi.is_null() {
        return Err(null("x or xi"));
    }
    if n != g.dim() {
        return Err(Fail(MlStatus::InvalidArgument, format!("dimension {n}, metric has {}", g.dim())));
    }
    let x = std::slice::from_raw_parts(x, n).to_vec();
    let xi = std::slice::from_raw_parts(xi, n).to_vec();
    Ok(PhasePoint::new(x, xi))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output"));
    }
    out.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ml_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the message of the last failure on this thread into `buf`
/// (truncated, always NUL-terminated when `len > 0`). Returns the full
/// message length without the terminator, or 0 if the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ml_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Builds a cometric from its JSON description (the `metric` block of a run
/// configuration).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_cometric_from_json(json: *const c_char, out: *mut *mut MlCometric) -> MlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Fail(MlStatus::InvalidArgument, "json is not UTF-8".into()))?;
        let spec: CometricSpec = serde_json::from_str(text).map_err(|e| Fail(MlStatus::Config, e.to_string()))?;
        let g = Cometric::new(spec)?;
        write(out, Box::into_raw(Box::new(MlCometric { inner: g })))
    })
}

/// Flat Minkowski cometric `diag(1, -1, ..., -1)` in dimension `n`.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_cometric_minkowski(n: usize, out: *mut *mut MlCometric) -> MlStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail(MlStatus::InvalidArgument, "dimension must be positive".into()));
        }
        write(out, Box::into_raw(Box::new(MlCometric { inner: Cometric::minkowski(n) })))
    })
}

/// Releases a cometric; null is ignored.
///
/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ml_cometric_free(g: *mut MlCometric) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_cometric_dim(g: *const MlCometric, out: *mut usize) -> MlStatus {
    guard(|| write(out, cometric(g)?.dim()))
}

/// `p2(x, xi) = g(x) xi . xi`.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_principal_symbol(
    g: *const MlCometric,
    x: *const f64,
    xi: *const f64,
    n: usize,
    out: *mut f64,
) -> MlStatus {
    guard(|| {
        let g = cometric(g)?;
        let p = phase_point(g, x, xi, n)?;
        write(out, quad_form(&g.at(&p.x), &p.xi))
    })
}

/// Direction cosine between `x` and the group velocity of `xi`.
///
/// # Safety
/// As for [`ml_principal_symbol`].
#[no_mangle]
pub unsafe extern "C" fn ml_beta(g: *const MlCometric, x: *const f64, xi: *const f64, n: usize, out: *mut f64) -> MlStatus {
    guard(|| {
        let g = cometric(g)?;
        let p = phase_point(g, x, xi, n)?;
        write(out, beta(&p, g)?)
    })
}

/// Escape time `tau` for the given orientation; [`MlStatus::Domain`] outside
/// its cone.
///
/// # Safety
/// As for [`ml_principal_symbol`].
#[no_mangle]
pub unsafe extern "C" fn ml_tau(
    g: *const MlCometric,
    x: *const f64,
    xi: *const f64,
    n: usize,
    orientation: MlOrientation,
    sigma_inf: f64,
    out: *mut f64,
) -> MlStatus {
    guard(|| {
        let g = cometric(g)?;
        let p = phase_point(g, x, xi, n)?;
        let t = match orientation {
            MlOrientation::Incoming => tau_incoming(&p, sigma_inf, g)?,
            MlOrientation::Outgoing => tau_outgoing(&p, sigma_inf, g)?,
        };
        write(out, t)
    })
}

/// Gradient of `tau`; `dx` and `dxi` receive `n` doubles each.
///
/// # Safety
/// `x`, `xi`, `dx` and `dxi` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ml_grad_tau(
    g: *const MlCometric,
    x: *const f64,
    xi: *const f64,
    n: usize,
    orientation: MlOrientation,
    sigma_inf: f64,
    dx: *mut f64,
    dxi: *mut f64,
) -> MlStatus {
    guard(|| {
        let g = cometric(g)?;
        let p = phase_point(g, x, xi, n)?;
        if dx.is_null() || dxi.is_null() {
            return Err(null("dx or dxi"));
        }
        let (a, b) = grad_tau(&p, orientation.into(), sigma_inf, g)?;
        ptr::copy_nonoverlapping(a.as_ptr(), dx, n);
        ptr::copy_nonoverlapping(b.as_ptr(), dxi, n);
        Ok(())
    })
}

/// Integrates the Hamilton flow of `p2` over `[t_minus, t_plus]` with the
/// default tolerances.
///
/// # Safety
/// `x` and `xi` must hold `n` doubles; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_flow_integrate(
    g: *const MlCometric,
    x: *const f64,
    xi: *const f64,
    n: usize,
    t_minus: f64,
    t_plus: f64,
    out: *mut *mut MlTrajectory,
) -> MlStatus {
    guard(|| {
        let g = cometric(g)?;
        let p = phase_point(g, x, xi, n)?;
        let tr = integrate(&p, (t_minus, t_plus), Tolerances::default(), g, None)?;
        write(out, Box::into_raw(Box::new(MlTrajectory { inner: tr })))
    })
}

/// Number of stored samples.
///
/// # Safety
/// `tr` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ml_trajectory_len(tr: *const MlTrajectory, out: *mut usize) -> MlStatus {
    guard(|| {
        let tr = tr.as_ref().ok_or_else(|| null("trajectory"))?;
        write(out, tr.inner.len())
    })
}

/// Sample `k`: time, position and momentum (`x` and `xi` receive the
/// dimension's worth of doubles).
///
/// # Safety
/// `t` must be valid for a write; `x` and `xi` for `dim` doubles each.
#[no_mangle]
pub unsafe extern "C" fn ml_trajectory_sample(
    tr: *const MlTrajectory,
    k: usize,
    t: *mut f64,
    x: *mut f64,
    xi: *mut f64,
) -> MlStatus {
    guard(|| {
        let tr = &tr.as_ref().ok_or_else(|| null("trajectory"))?.inner;
        if k >= tr.len() {
            return Err(Fail(MlStatus::InvalidArgument, format!("sample {k} of {}", tr.len())));
        }
        if x.is_null() || xi.is_null() {
            return Err(null("x or xi"));
        }
        let s = &tr.states[k];
        ptr::copy_nonoverlapping(s.x.as_ptr(), x, s.x.len());
        ptr::copy_nonoverlapping(s.xi.as_ptr(), xi, s.xi.len());
        write(t, tr.times[k])
    })
}

/// Releases a trajectory; null is ignored.
///
/// # Safety
/// `tr` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ml_trajectory_free(tr: *mut MlTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Runs the command-line driver with `argv[0..argc]` (program name first)
/// and returns its exit status: 0 pass, 1 check failed, 2 configuration
/// error, 3 computation error. Null or non-UTF-8 arguments give 2.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ml_run(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        set_error("argv is empty".into());
        return microlocal::cli::EXIT_CONFIG;
    }
    let mut args = Vec::with_capacity(argc as usize);
    for i in 0..argc as usize {
        let a = *argv.add(i);
        match (!a.is_null()).then(|| CStr::from_ptr(a).to_str()) {
            Some(Ok(s)) => args.push(s.to_string()),
            _ => {
                set_error(format!("argument {i} is null or not UTF-8"));
                return microlocal::cli::EXIT_CONFIG;
            }
        }
    }
    catch_unwind(|| microlocal::cli::run(args)).unwrap_or_else(|_| {
        set_error("panic inside microlocal".into());
        microlocal::cli::EXIT_COMPUTATION
    })
}
