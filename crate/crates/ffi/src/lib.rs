//! C ABI for `homsum`.
//!
//! Kernels cross the boundary as opaque `HsKernel` handles owned by the
//! caller and released with `hs_kernel_free`. Every fallible call returns an
//! `HsStatus`; on failure `hs_last_error` describes the problem for the
//! calling thread. Panics are caught and reported as `HS_STATUS_PANIC`.

use homsum::contraction::{chi_square_defect, contraction_norm, influence_profile, symmetrized_contraction_norm};
use homsum::kernel::{generate_family, read_kernel_file, write_kernel_file, Family, KernelFamilySpec};
use homsum::moments::gaussian_fourth_moment;
use homsum::simulate::{sample_sums, Law, SampleConfig};
use homsum::{Error, SymmetricKernel};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result codes. Zero means success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Io = 4,
    Panic = 5,
}

/// Opaque kernel handle.
pub struct HsKernel {
    inner: SymmetricKernel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Io(_) => HsStatus::Io,
        _ if e.exit_code() == 3 => HsStatus::Capacity,
        _ => HsStatus::InvalidArgument,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), HsStatus>) -> HsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HsStatus::Panic
        }
    }
}

fn fail(e: Error) -> HsStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> HsStatus {
    set_error(format!("null pointer: {what}"));
    HsStatus::NullPointer
}

unsafe fn kernel_ref<'a>(k: *const HsKernel) -> Result<&'a SymmetricKernel, HsStatus> {
    k.as_ref().map(|h| &h.inner).ok_or_else(|| null("kernel"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, HsStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, HsStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        HsStatus::InvalidArgument
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], HsStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_handle(k: SymmetricKernel, out: &mut *mut HsKernel) {
    *out = Box::into_raw(Box::new(HsKernel { inner: k }));
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a kernel from `nnz` canonical tuples. `indices` holds `nnz * order`
/// strictly increasing 1-based indices, tuple after tuple.
///
/// # Safety
/// `indices` and `values` must point to arrays of the stated lengths and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_new(
    order: usize,
    dim: usize,
    indices: *const usize,
    values: *const f64,
    nnz: usize,
    out: *mut *mut HsKernel,
) -> HsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let len = nnz.checked_mul(order).ok_or_else(|| fail(Error::ParameterOutOfRange("nnz * order overflows".into())))?;
        let idx = slice(indices, len, "indices")?;
        let vals = slice(values, nnz, "values")?;
        let entries = (0..nnz).map(|t| (&idx[t * order..(t + 1) * order], vals[t]));
        let k = SymmetricKernel::new(order, dim, entries).map_err(fail)?;
        into_handle(k, out);
        Ok(())
    })
}

/// Generates a named family kernel (`single_pair`, `constant`,
/// `disjoint_pairs`, `walsh`, `random_sparse`) with variance `sigma2`.
///
/// # Safety
/// `family` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_generate(
    family: *const c_char,
    order: usize,
    size: usize,
    sigma2: f64,
    seed: u64,
    out: *mut *mut HsKernel,
) -> HsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let family: Family = c_str(family, "family")?.parse().map_err(fail)?;
        let spec = KernelFamilySpec::new(family, order, size).with_sigma2(sigma2).with_seed(seed);
        into_handle(generate_family(&spec).map_err(fail)?, out);
        Ok(())
    })
}

/// Reads a kernel file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_read(path: *const c_char, out: *mut *mut HsKernel) -> HsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = c_str(path, "path")?;
        into_handle(read_kernel_file(Path::new(path)).map_err(fail)?, out);
        Ok(())
    })
}

/// Writes a kernel file.
///
/// # Safety
/// `kernel` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_write(kernel: *const HsKernel, path: *const c_char) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let path = c_str(path, "path")?;
        write_kernel_file(k, Path::new(path)).map_err(fail)
    })
}

/// Returns a new handle rescaled so that the variance equals `sigma2`.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_normalize(kernel: *const HsKernel, sigma2: f64, out: *mut *mut HsKernel) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let out = out_ref(out, "out")?;
        into_handle(k.normalize_to_variance(sigma2).map_err(fail)?, out);
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `kernel` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_free(kernel: *mut HsKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Order d, or 0 for NULL.
///
/// # Safety
/// `kernel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_order(kernel: *const HsKernel) -> usize {
    kernel.as_ref().map_or(0, |h| h.inner.order())
}

/// Dimension N, or 0 for NULL.
///
/// # Safety
/// `kernel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_dim(kernel: *const HsKernel) -> usize {
    kernel.as_ref().map_or(0, |h| h.inner.dim())
}

/// Number of stored canonical entries, or 0 for NULL.
///
/// # Safety
/// `kernel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_nnz(kernel: *const HsKernel) -> usize {
    kernel.as_ref().map_or(0, |h| h.inner.nnz())
}

/// Kernel value at an arbitrary index tuple of length d.
///
/// # Safety
/// `idx` must point to `len` indices and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_evaluate(kernel: *const HsKernel, idx: *const usize, len: usize, out: *mut f64) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let out = out_ref(out, "out")?;
        *out = k.evaluate(slice(idx, len, "idx")?).map_err(fail)?;
        Ok(())
    })
}

/// Homogeneous sum Q(x) for a point of length N.
///
/// # Safety
/// `x` must point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_evaluate_sum(kernel: *const HsKernel, x: *const f64, len: usize, out: *mut f64) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let out = out_ref(out, "out")?;
        *out = k.evaluate_sum(slice(x, len, "x")?).map_err(fail)?;
        Ok(())
    })
}

unsafe fn scalar(kernel: *const HsKernel, out: *mut f64, f: impl FnOnce(&SymmetricKernel) -> Result<f64, Error>) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let out = out_ref(out, "out")?;
        *out = f(k).map_err(fail)?;
        Ok(())
    })
}

/// Squared norm over ordered tuples.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_squared_norm(kernel: *const HsKernel, out: *mut f64) -> HsStatus {
    scalar(kernel, out, |k| Ok(k.squared_norm()))
}

/// Variance d!·‖f‖².
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_kernel_variance(kernel: *const HsKernel, out: *mut f64) -> HsStatus {
    scalar(kernel, out, |k| Ok(k.variance()))
}

/// Norm of the r-th contraction of the kernel with itself.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_contraction_norm(kernel: *const HsKernel, r: usize, out: *mut f64) -> HsStatus {
    scalar(kernel, out, |k| contraction_norm(k, r))
}

/// Norm of the symmetrized r-th contraction.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_symmetrized_contraction_norm(kernel: *const HsKernel, r: usize, out: *mut f64) -> HsStatus {
    scalar(kernel, out, |k| symmetrized_contraction_norm(k, r))
}

/// Chi-square defect ‖c_d·f ⋆̃_{d/2} f − f‖ for even d.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_chi_square_defect(kernel: *const HsKernel, out: *mut f64) -> HsStatus {
    scalar(kernel, out, chi_square_defect)
}

/// Exact E[Q⁴] under Gaussian inputs for a unit-variance kernel.
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_gaussian_fourth_moment(kernel: *const HsKernel, out: *mut f64) -> HsStatus {
    scalar(kernel, out, gaussian_fourth_moment)
}

/// Fills `values` with the N influences (entry 0 is index 1) and writes the
/// maximum to `max`. Pass NULL and 0 to read only the maximum.
///
/// # Safety
/// `values` must point to `len` writable doubles (or be NULL with `len` 0)
/// and `max` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_influences(kernel: *const HsKernel, values: *mut f64, len: usize, max: *mut f64) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let max = out_ref(max, "max")?;
        let prof = influence_profile(k);
        if len != 0 {
            if len != prof.values.len() {
                return Err(fail(Error::DimensionMismatch { expected: prof.values.len(), got: len }));
            }
            if values.is_null() {
                return Err(null("values"));
            }
            std::slice::from_raw_parts_mut(values, len).copy_from_slice(&prof.values);
        }
        *max = prof.max;
        Ok(())
    })
}

/// Normal-approximation term T₁ (exact for small kernels, else an upper bound).
///
/// # Safety
/// `kernel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hs_t1(kernel: *const HsKernel, out: *mut f64) -> HsStatus {
    scalar(kernel, out, |k| homsum::bounds::t1(k).map(|e| e.value))
}

/// Smooth-function constant C* for budget (a, b, B3) and order d.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_c_star(a: f64, b: f64, b3: f64, order: usize, out: *mut f64) -> HsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let budget = homsum::bounds::TestFunctionBudget::new(a, b, b3);
        *out = homsum::bounds::c_star(&budget, order);
        Ok(())
    })
}

/// Draws `n` samples of Q(X) into `samples` for an i.i.d. input law
/// (`gaussian`, `rademacher`, `uniform`, `shifted_exponential`,
/// `two_point:p`). Output depends only on the seed, not on `workers`.
///
/// # Safety
/// `law` must be a NUL-terminated string and `samples` must point to `n`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_simulate(
    kernel: *const HsKernel,
    law: *const c_char,
    n: usize,
    seed: u64,
    workers: usize,
    samples: *mut f64,
) -> HsStatus {
    guard(|| {
        let k = kernel_ref(kernel)?;
        let law: Law = c_str(law, "law")?.parse().map_err(fail)?;
        if samples.is_null() && n > 0 {
            return Err(null("samples"));
        }
        let cfg = SampleConfig::new(n, seed).with_workers(workers);
        let summary = sample_sums(k, law, &cfg).map_err(fail)?;
        if n > 0 {
            std::slice::from_raw_parts_mut(samples, n).copy_from_slice(&summary.samples);
        }
        Ok(())
    })
}
