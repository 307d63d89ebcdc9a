//! C interface to matcube.
//!
//! Every function returns a `MatcubeStatus`. On failure a message is kept per
//! thread and can be read with `matcube_last_error`. Handles are opaque and
//! must be released with the matching `_free` function. Strings returned by
//! the library are released with `matcube_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use matcube::cube::{bental_test, construct_full_certificate, quad_test, verify_certificate, vertex_oracle, Certificate, VERTEX_LIMIT};
use matcube::io::{certificate_from_file, certificate_to_file, parse_instance, Instance};
use matcube::numerics::SymMatrix;
use matcube::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcubeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Dimension = 3,
    Numerical = 4,
    Solver = 5,
    Precondition = 6,
    TooManyVertices = 7,
    Io = 8,
    Panic = 9,
}

/// Outcome of a positivity check, matching the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcubeVerdict {
    Certified = 0,
    Refuted = 1,
    Inconclusive = 2,
}

/// Certificate search method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcubeMethod {
    BenTal = 0,
    Quadratic = 1,
    Full = 2,
}

/// Opaque matrix cube instance.
pub struct MatcubeInstance {
    inner: matcube::cube::MatrixCubeInstance,
}

/// Opaque certificate together with the instance dimensions it refers to.
pub struct MatcubeCertificate {
    inner: Certificate,
    n: usize,
    m: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MatcubeStatus {
    match e {
        Error::Dimension(_) => MatcubeStatus::Dimension,
        Error::InvalidInput(_) | Error::Json(_) => MatcubeStatus::InvalidInput,
        Error::Numerical(_) | Error::ConstructionMismatch { .. } => MatcubeStatus::Numerical,
        Error::Solver { .. } => MatcubeStatus::Solver,
        Error::Precondition(_) => MatcubeStatus::Precondition,
        Error::TooManyVertices { .. } => MatcubeStatus::TooManyVertices,
        Error::Io(_) => MatcubeStatus::Io,
    }
}

/// Runs `f`, recording errors and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), (MatcubeStatus, String)>) -> MatcubeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MatcubeStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            MatcubeStatus::Panic
        }
    }
}

fn lib<T>(r: matcube::Result<T>) -> Result<T, (MatcubeStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MatcubeStatus, String) {
    (MatcubeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MatcubeStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (MatcubeStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn matcube_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn matcube_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an instance from `m + 1` row-major `n × n` matrices stored
/// consecutively in `data`, on the cube of half-width `radius`.
///
/// # Safety
/// `data` must point to `(m + 1) n²` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_instance_new(
    n: usize,
    m: usize,
    data: *const c_double,
    radius: c_double,
    out: *mut *mut MatcubeInstance,
) -> MatcubeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if data.is_null() {
            return Err(null("data"));
        }
        if n == 0 {
            return Err((MatcubeStatus::Dimension, "n must be positive".into()));
        }
        let len = n.checked_mul(n).and_then(|k| k.checked_mul(m + 1)).ok_or_else(|| (MatcubeStatus::Dimension, "size overflow".to_string()))?;
        let vals = std::slice::from_raw_parts(data, len);
        let h = vals
            .chunks(n * n)
            .map(|c| SymMatrix::from_rows(&c.chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>()))
            .collect::<matcube::Result<Vec<_>>>();
        let inner = lib(matcube::cube::MatrixCubeInstance::new(lib(h)?, radius))?;
        *out = Box::into_raw(Box::new(MatcubeInstance { inner }));
        Ok(())
    })
}

/// Parses a cube instance from the JSON instance format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_instance_from_json(json: *const c_char, out: *mut *mut MatcubeInstance) -> MatcubeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(json, "json")?;
        match lib(parse_instance(text))? {
            Instance::Cube(inner) => {
                *out = Box::into_raw(Box::new(MatcubeInstance { inner }));
                Ok(())
            }
            other => Err((MatcubeStatus::InvalidInput, format!("expected a cube instance, got {}", other.kind()))),
        }
    })
}

/// # Safety
/// `inst` must be null or come from one of the instance constructors.
#[no_mangle]
pub unsafe extern "C" fn matcube_instance_free(inst: *mut MatcubeInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live instance; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_instance_dims(inst: *const MatcubeInstance, n: *mut usize, m: *mut usize) -> MatcubeStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if n.is_null() || m.is_null() {
            return Err(null("n or m"));
        }
        *n = inst.inner.n();
        *m = inst.inner.m();
        Ok(())
    })
}

/// Smallest eigenvalue of `G` over the cube vertices. `argmin`, if not
/// null, receives the minimizing vertex (`m` doubles, scaled by the radius).
///
/// # Safety
/// `inst` must be a live instance; `min_lambda` must be writable; `argmin`
/// must be null or point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn matcube_vertex_min(inst: *const MatcubeInstance, min_lambda: *mut c_double, argmin: *mut c_double) -> MatcubeStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if min_lambda.is_null() {
            return Err(null("min_lambda"));
        }
        let v = lib(vertex_oracle(&inst.inner))?;
        *min_lambda = v.min_lambda;
        if !argmin.is_null() {
            for (i, d) in v.argmin.iter().enumerate() {
                *argmin.add(i) = d * inst.inner.radius();
            }
        }
        Ok(())
    })
}

/// Searches for a certificate. On return `*verdict` is set; `*cert` holds a
/// new certificate when the verdict is `Certified` and null otherwise.
/// `Refuted` is only reported by the full method, which checks vertices first.
///
/// # Safety
/// `inst` must be a live instance; `verdict` and `cert` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_certify(
    inst: *const MatcubeInstance,
    method: MatcubeMethod,
    verdict: *mut MatcubeVerdict,
    cert: *mut *mut MatcubeCertificate,
) -> MatcubeStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if verdict.is_null() || cert.is_null() {
            return Err(null("verdict or cert"));
        }
        *cert = ptr::null_mut();
        *verdict = MatcubeVerdict::Inconclusive;
        let i = &inst.inner;
        let found = match method {
            MatcubeMethod::BenTal => lib(bental_test(i))?.certificate,
            MatcubeMethod::Quadratic => lib(quad_test(i))?.certificate,
            MatcubeMethod::Full => {
                if i.m() > VERTEX_LIMIT {
                    return Err((MatcubeStatus::TooManyVertices, format!("full certificates need m <= {VERTEX_LIMIT}")));
                }
                let v = lib(vertex_oracle(i))?;
                if v.min_lambda < -matcube::cube::full::PRECONDITION_TOL * i.coeff_scale() {
                    *verdict = MatcubeVerdict::Refuted;
                    return Ok(());
                }
                Some(lib(construct_full_certificate(i))?)
            }
        };
        if let Some(c) = found {
            *verdict = MatcubeVerdict::Certified;
            *cert = Box::into_raw(Box::new(MatcubeCertificate { inner: c, n: i.n(), m: i.m() }));
        }
        Ok(())
    })
}

/// Re-checks `cert` against `inst` without any solver.
///
/// # Safety
/// Handles must be live; `valid` must be writable; `residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn matcube_certificate_verify(
    inst: *const MatcubeInstance,
    cert: *const MatcubeCertificate,
    valid: *mut c_int,
    residual: *mut c_double,
) -> MatcubeStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        if valid.is_null() {
            return Err(null("valid"));
        }
        let r = lib(verify_certificate(&inst.inner, &cert.inner))?;
        *valid = c_int::from(r.valid);
        if !residual.is_null() {
            *residual = r.residual;
        }
        Ok(())
    })
}

/// Serializes a certificate to the JSON certificate format. Release the
/// string with `matcube_string_free`.
///
/// # Safety
/// `cert` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_certificate_to_json(cert: *const MatcubeCertificate, out: *mut *mut c_char) -> MatcubeStatus {
    guard(|| {
        let cert = cert.as_ref().ok_or_else(|| null("cert"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let file = certificate_to_file(&cert.inner, cert.n, cert.m, None);
        let text = lib(matcube::io::certificate_json(&file))?;
        *out = CString::new(text).map_err(|_| (MatcubeStatus::Numerical, "NUL in JSON".to_string()))?.into_raw();
        Ok(())
    })
}

/// Parses a certificate from the JSON certificate format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn matcube_certificate_from_json(json: *const c_char, out: *mut *mut MatcubeCertificate) -> MatcubeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(json, "json")?;
        let file = lib(matcube::io::parse_certificate_file(text))?;
        let inner = lib(certificate_from_file(&file))?;
        *out = Box::into_raw(Box::new(MatcubeCertificate { inner, n: file.n, m: file.m }));
        Ok(())
    })
}

/// # Safety
/// `cert` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn matcube_certificate_free(cert: *mut MatcubeCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn matcube_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
