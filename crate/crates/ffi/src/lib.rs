//! C ABI for the `imub` simulator.
//!
//! Every entry point returns an [`ImubStatus`]; outputs go through pointer
//! arguments. On failure the message is kept per thread and can be read with
//! [`imub_last_error`]. Objects are opaque handles released with their
//! matching `_free` function. Strings returned to the caller are released
//! with [`imub_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use imub::cli::{run_suite, ExperimentDoc, Suite};
use imub::migration::{srw_kernel, MatrixSpec, MigrationMatrix};
use imub::quadrant::{self, Axis, MassType, QuadrantPoint};
use imub::verify::{interface_formula, ReplicaRunner};
use imub::Error;
use rand_chacha::ChaCha8Rng;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImubStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImubAxis {
    Horizontal = 0,
    Vertical = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImubBoundaryPoint {
    pub axis: ImubAxis,
    pub value: f64,
}

/// Opaque migration matrix.
pub struct ImubMatrix(MigrationMatrix);

/// Opaque exact sampler owning its random stream.
pub struct ImubSampler(ChaCha8Rng);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ImubStatus {
    match e {
        Error::Io(_) => ImubStatus::Io,
        Error::Json(_) | Error::Csv(_) => ImubStatus::Parse,
        _ => ImubStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard<F: FnOnce() -> Result<(), (ImubStatus, String)>>(f: F) -> ImubStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ImubStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ImubStatus::Panic
        }
    }
}

fn lib<T>(r: imub::Result<T>) -> Result<T, (ImubStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (ImubStatus, String) {
    (ImubStatus::NullPointer, format!("{name} is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (ImubStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (ImubStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ImubStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn c_string(s: String) -> Result<*mut c_char, (ImubStatus, String)> {
    CString::new(s).map(CString::into_raw).map_err(|_| (ImubStatus::InvalidArgument, "string contains nul".into()))
}

fn point(u: f64, v: f64) -> Result<QuadrantPoint, (ImubStatus, String)> {
    lib(QuadrantPoint::new(u, v))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn imub_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn imub_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `a_t(0, l)` of the rate-1 symmetric simple random walk.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_srw_kernel(t: f64, l: i64, out: *mut f64) -> ImubStatus {
    guard(|| {
        if !(t >= 0.0) {
            return Err((ImubStatus::InvalidArgument, format!("time must be nonnegative, got {t}")));
        }
        *out_ref(out, "out")? = srw_kernel(t, l);
        Ok(())
    })
}

/// Mass of the vertical half-axis above `c` under the harmonic measure at `(u, v)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_vertical_tail(u: f64, v: f64, c: f64, out: *mut f64) -> ImubStatus {
    guard(|| {
        *out_ref(out, "out")? = lib(quadrant::vertical_tail(point(u, v)?, c))?;
        Ok(())
    })
}

/// `p`-th moment of coordinate `coordinate` (1 or 2) under the harmonic measure.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_moment_p(u: f64, v: f64, coordinate: u32, p: f64, out: *mut f64) -> ImubStatus {
    guard(|| {
        let i = match coordinate {
            1 => MassType::One,
            2 => MassType::Two,
            _ => return Err((ImubStatus::InvalidArgument, format!("coordinate must be 1 or 2, got {coordinate}"))),
        };
        *out_ref(out, "out")? = lib(quadrant::moment_p(point(u, v)?, i, p))?;
        Ok(())
    })
}

/// Probability that type 2 is present at site `k` at time `t` for step
/// initial data `(u, 0)` left of the origin and `(0, v)` from it on.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_interface_formula(u: f64, v: f64, t: f64, k: i64, out: *mut f64) -> ImubStatus {
    guard(|| {
        if !(u > 0.0 && v > 0.0 && t >= 0.0) {
            return Err((ImubStatus::InvalidArgument, "need u, v > 0 and t >= 0".into()));
        }
        *out_ref(out, "out")? = interface_formula(u, v, t, k);
        Ok(())
    })
}

/// New sampler on replica `stream` of the master seed.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_sampler_new(seed: u64, stream: u64, out: *mut *mut ImubSampler) -> ImubStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let rng = imub::StreamFactory::new(seed, "ffi-sampler").replica(stream);
        *slot = Box::into_raw(Box::new(ImubSampler(rng)));
        Ok(())
    })
}

/// Exact draw from the harmonic measure at `(u, v)`.
///
/// # Safety
/// `sampler` must come from [`imub_sampler_new`]; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_sampler_draw(sampler: *mut ImubSampler, u: f64, v: f64, out: *mut ImubBoundaryPoint) -> ImubStatus {
    guard(|| {
        let s = out_ref(sampler, "sampler")?;
        let out = out_ref(out, "out")?;
        let b = quadrant::sample(point(u, v)?, &mut s.0);
        *out = ImubBoundaryPoint {
            axis: match b.axis() {
                Axis::Horizontal => ImubAxis::Horizontal,
                Axis::Vertical => ImubAxis::Vertical,
            },
            value: b.value(),
        };
        Ok(())
    })
}

/// # Safety
/// `sampler` must come from [`imub_sampler_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn imub_sampler_free(sampler: *mut ImubSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Builds a matrix from its JSON description, e.g.
/// `{"kind":"ssrw_z","radius":50,"topology":"absorbing"}`.
///
/// # Safety
/// `spec` must be a nul-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_matrix_from_json(spec: *const c_char, out: *mut *mut ImubMatrix) -> ImubStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let spec: MatrixSpec = serde_json::from_str(str_arg(spec, "spec")?).map_err(|e| (ImubStatus::Parse, e.to_string()))?;
        *slot = Box::into_raw(Box::new(ImubMatrix(lib(spec.build())?)));
        Ok(())
    })
}

/// Number of sites.
///
/// # Safety
/// `m` must be a live matrix handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn imub_matrix_len(m: *const ImubMatrix, out: *mut usize) -> ImubStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        *out_ref(out, "out")? = m.0.len();
        Ok(())
    })
}

/// Copies the sorted site labels into `buf`, which holds `len` entries.
///
/// # Safety
/// `m` must be a live matrix handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn imub_matrix_sites(m: *const ImubMatrix, buf: *mut i64, len: usize) -> ImubStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < m.0.len() {
            return Err((ImubStatus::BufferTooSmall, format!("need {} entries", m.0.len())));
        }
        std::slice::from_raw_parts_mut(buf, m.0.len()).copy_from_slice(m.0.sites());
        Ok(())
    })
}

/// `out = exp(tA) f` for a field `f` of `len` entries in site order.
///
/// # Safety
/// `m` must be a live matrix handle; `f` and `out` must be valid for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn imub_matrix_flow(m: *const ImubMatrix, f: *const f64, len: usize, t: f64, out: *mut f64) -> ImubStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matrix"))?;
        if f.is_null() || out.is_null() {
            return Err(null("field"));
        }
        if len != m.0.len() {
            return Err((ImubStatus::InvalidArgument, format!("field has {len} entries, matrix has {}", m.0.len())));
        }
        let g = lib(m.0.flow(std::slice::from_raw_parts(f, len), t, imub::migration::DEFAULT_FLOW_TOL))?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&g);
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`imub_matrix_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn imub_matrix_free(m: *mut ImubMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Runs one verification suite (`"martingale"`, `"quadrant"`, ...) on an
/// experiment document and returns its JSON report in `*out_json`.
/// `doc_json` may be null for the `quadrant` and `interface` suites.
///
/// # Safety
/// String arguments must be nul-terminated; `out_json` and `pass` must be
/// valid for writes. Release `*out_json` with [`imub_string_free`].
#[no_mangle]
pub unsafe extern "C" fn imub_verify_json(
    doc_json: *const c_char,
    suite: *const c_char,
    seed: u64,
    workers: usize,
    out_json: *mut *mut c_char,
    pass: *mut bool,
) -> ImubStatus {
    guard(|| {
        let out_json = out_ref(out_json, "out_json")?;
        let pass = out_ref(pass, "pass")?;
        let suite: Suite = serde_json::from_value(serde_json::Value::String(str_arg(suite, "suite")?.to_owned()))
            .map_err(|e| (ImubStatus::InvalidArgument, e.to_string()))?;
        let exp = if doc_json.is_null() {
            None
        } else {
            let doc: ExperimentDoc =
                serde_json::from_str(str_arg(doc_json, "doc_json")?).map_err(|e| (ImubStatus::Parse, e.to_string()))?;
            Some(lib(doc.resolve())?)
        };
        let report = lib(run_suite(exp.as_ref(), suite, &ReplicaRunner::new(seed, workers)))?;
        let text = serde_json::to_string(&report).map_err(|e| (ImubStatus::Parse, e.to_string()))?;
        *out_json = c_string(text)?;
        *pass = report.pass;
        Ok(())
    })
}
