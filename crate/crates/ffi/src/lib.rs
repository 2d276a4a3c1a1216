//! C ABI over `srquant`.
//!
//! Objects cross the boundary as opaque heap handles (`SrqArray`,
//! `SrqReferenceSet`, `SrqQuantizer`) created by `srq_*` constructors and
//! released with the matching `*_free`. Every fallible call returns an
//! [`SrqStatus`]; the message of the last failure on the calling thread is
//! available from [`srq_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use srquant::{
    grouping, lut, metrics, ComponentArray, Error, Grouping, MismatchModel, ReferenceSet, SelectedQuantizer, TargetGrid,
};

pub const SRQ_GROUPING_BW: u32 = 0;
pub const SRQ_GROUPING_HS: u32 = 1;
pub const SRQ_GROUPING_UN: u32 = 2;
pub const SRQ_GROUPING_RS: u32 = 3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    TooManyComponents = 3,
    OutOfRange = 4,
    NonMonotone = 5,
    Inconsistent = 6,
    Format = 7,
    Version = 8,
    Truncated = 9,
    Checksum = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Component array with nominal and actual weights.
pub struct SrqArray(ComponentArray);

/// Sorted references of one array.
pub struct SrqReferenceSet(ReferenceSet);

/// Selected boundaries and their assemblies.
pub struct SrqQuantizer(SelectedQuantizer);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SrqStatus {
    match e {
        Error::InvalidParameter(_) | Error::InvalidArray(_) | Error::NegativeWeight { .. } => {
            SrqStatus::InvalidArgument
        }
        Error::TooManyComponents { .. } => SrqStatus::TooManyComponents,
        Error::MaskOutOfRange { .. } | Error::InputOutOfRange(_) => SrqStatus::OutOfRange,
        Error::NonMonotone(_) => SrqStatus::NonMonotone,
        Error::Inconsistent(_) => SrqStatus::Inconsistent,
        Error::Format(_) | Error::Json(_) => SrqStatus::Format,
        Error::Version(_) => SrqStatus::Version,
        Error::Truncated { .. } => SrqStatus::Truncated,
        Error::Checksum { .. } => SrqStatus::Checksum,
        Error::Io(_) => SrqStatus::Io,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), SrqError>) -> SrqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrqStatus::Ok,
        Ok(Err(SrqError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside srquant");
            SrqStatus::Panic
        }
    }
}

struct SrqError(SrqStatus, String);

impl From<Error> for SrqError {
    fn from(e: Error) -> Self {
        SrqError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> SrqError {
    SrqError(SrqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, SrqError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), SrqError> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_to<T: Copy>(src: &[T], buf: *mut T, cap: usize) -> Result<(), SrqError> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if cap < src.len() {
        return Err(SrqError(
            SrqStatus::BufferTooSmall,
            format!("buffer holds {cap} elements, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn grouping_of(tag: u32, s: u32, n0_prime: u32) -> Result<Grouping, SrqError> {
    Ok(match tag {
        SRQ_GROUPING_BW => Grouping::BinaryWeighted,
        SRQ_GROUPING_HS => Grouping::HalfSplit,
        SRQ_GROUPING_UN => Grouping::Uniform,
        SRQ_GROUPING_RS => Grouping::Redundant { s, n0_prime },
        other => {
            return Err(SrqError(
                SrqStatus::InvalidArgument,
                format!("unknown grouping tag {other}"),
            ))
        }
    })
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn srq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a grouping. `s` and `n0_prime` are only read for `SRQ_GROUPING_RS`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn srq_array_build(
    grouping_tag: u32,
    n0: u32,
    s: u32,
    n0_prime: u32,
    out: *mut *mut SrqArray,
) -> SrqStatus {
    guard(|| {
        let array = grouping::build(grouping_of(grouping_tag, s, n0_prime)?, n0)?;
        write_out(out, Box::into_raw(Box::new(SrqArray(array))), "out")
    })
}

/// Builds an array from a raw nominal weight list summing to `2^n0 - 1`.
///
/// # Safety
/// `weights` must point to `len` readable `uint32_t`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_array_from_nominal(
    n0: u32,
    weights: *const u32,
    len: usize,
    out: *mut *mut SrqArray,
) -> SrqStatus {
    guard(|| {
        if weights.is_null() {
            return Err(null("weights"));
        }
        let nominal = std::slice::from_raw_parts(weights, len).to_vec();
        let array = ComponentArray::from_nominal(n0, Grouping::Custom, nominal)?;
        write_out(out, Box::into_raw(Box::new(SrqArray(array))), "out")
    })
}

/// Draws actual weights for trial `trial` of a mismatch model with ratio
/// `sigma_m` and seed `seed`. The input array is left untouched.
///
/// # Safety
/// `array` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_array_sample(
    array: *const SrqArray,
    sigma_m: f64,
    seed: u64,
    trial: u64,
    out: *mut *mut SrqArray,
) -> SrqStatus {
    guard(|| {
        let array = deref(array, "array")?;
        let model = MismatchModel::new(sigma_m, seed)?;
        let sampled = array.0.sample(&model, trial);
        write_out(out, Box::into_raw(Box::new(SrqArray(sampled))), "out")
    })
}

/// Component count, or 0 for a null handle.
///
/// # Safety
/// `array` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srq_array_len(array: *const SrqArray) -> usize {
    array.as_ref().map_or(0, |a| a.0.len())
}

/// # Safety
/// `array` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srq_array_n0(array: *const SrqArray) -> u32 {
    array.as_ref().map_or(0, |a| a.0.n0())
}

/// Copies the nominal weights into `buf` (capacity `cap` elements).
///
/// # Safety
/// `array` must be a live handle and `buf` must hold `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn srq_array_nominal(array: *const SrqArray, buf: *mut u32, cap: usize) -> SrqStatus {
    guard(|| copy_to(deref(array, "array")?.0.nominal(), buf, cap))
}

/// Copies the actual weights into `buf` (capacity `cap` elements).
///
/// # Safety
/// `array` must be a live handle and `buf` must hold `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn srq_array_actual(array: *const SrqArray, buf: *mut f64, cap: usize) -> SrqStatus {
    guard(|| copy_to(deref(array, "array")?.0.actual(), buf, cap))
}

/// # Safety
/// `array` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srq_array_free(array: *mut SrqArray) {
    if !array.is_null() {
        drop(Box::from_raw(array));
    }
}

/// Reference generated by `mask` under the array's actual weights.
///
/// # Safety
/// `array` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_decode_assembly(array: *const SrqArray, mask: u64, value: *mut f64) -> SrqStatus {
    guard(|| {
        let v = srquant::decode_assembly(mask, &deref(array, "array")?.0)?;
        write_out(value, v, "value")
    })
}

/// Enumerates all `2^n` references (n <= 26).
///
/// # Safety
/// `array` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_references_enumerate(array: *const SrqArray, out: *mut *mut SrqReferenceSet) -> SrqStatus {
    guard(|| {
        let refs = srquant::enumerate_references(&deref(array, "array")?.0)?;
        write_out(out, Box::into_raw(Box::new(SrqReferenceSet(refs))), "out")
    })
}

/// # Safety
/// `refs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srq_references_len(refs: *const SrqReferenceSet) -> usize {
    refs.as_ref().map_or(0, |r| r.0.len())
}

/// Entry `index` of the sorted reference set.
///
/// # Safety
/// `refs` must be a live handle; `value` and `mask` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_references_get(
    refs: *const SrqReferenceSet,
    index: usize,
    value: *mut f64,
    mask: *mut u64,
) -> SrqStatus {
    guard(|| {
        let refs = &deref(refs, "refs")?.0;
        if index >= refs.len() {
            return Err(SrqError(
                SrqStatus::OutOfRange,
                format!("index {index} >= {}", refs.len()),
            ));
        }
        write_out(value, refs.values()[index], "value")?;
        write_out(mask, refs.mask(index), "mask")
    })
}

/// # Safety
/// `refs` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srq_references_free(refs: *mut SrqReferenceSet) {
    if !refs.is_null() {
        drop(Box::from_raw(refs));
    }
}

/// Exact nearest-reference selection for every interior target `i / 2^nk`.
///
/// # Safety
/// `refs` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_select_exhaustive(
    refs: *const SrqReferenceSet,
    nk: u32,
    delta: f64,
    out: *mut *mut SrqQuantizer,
) -> SrqStatus {
    guard(|| {
        let q = srquant::select_quantizer_exhaustive(&deref(refs, "refs")?.0, TargetGrid::new(nk, delta)?)?;
        write_out(out, Box::into_raw(Box::new(SrqQuantizer(q))), "out")
    })
}

/// Approximate greedy selection (descending-weight scan per target).
///
/// # Safety
/// `array` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_select_greedy(
    array: *const SrqArray,
    nk: u32,
    delta: f64,
    out: *mut *mut SrqQuantizer,
) -> SrqStatus {
    guard(|| {
        let q = srquant::select_quantizer_greedy(&deref(array, "array")?.0, TargetGrid::new(nk, delta)?)?;
        write_out(out, Box::into_raw(Box::new(SrqQuantizer(q))), "out")
    })
}

/// Target resolution, or 0 for a null handle.
///
/// # Safety
/// `q` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srq_quantizer_nk(q: *const SrqQuantizer) -> u32 {
    q.as_ref().map_or(0, |q| q.0.nk())
}

/// Copies the `2^nk + 1` boundaries into `buf`.
///
/// # Safety
/// `q` must be a live handle and `buf` must hold `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn srq_quantizer_boundaries(q: *const SrqQuantizer, buf: *mut f64, cap: usize) -> SrqStatus {
    guard(|| copy_to(deref(q, "quantizer")?.0.boundaries(), buf, cap))
}

/// Copies the `2^nk - 1` interior masks into `buf`.
///
/// # Safety
/// `q` must be a live handle and `buf` must hold `cap` writable elements.
#[no_mangle]
pub unsafe extern "C" fn srq_quantizer_masks(q: *const SrqQuantizer, buf: *mut u64, cap: usize) -> SrqStatus {
    guard(|| copy_to(deref(q, "quantizer")?.0.masks(), buf, cap))
}

/// Code of `x` in `[0, 1)`.
///
/// # Safety
/// `q` must be a live handle; `code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_quantize(q: *const SrqQuantizer, x: f64, code: *mut u64) -> SrqStatus {
    guard(|| {
        let c = deref(q, "quantizer")?.0.quantize(x)?;
        write_out(code, c, "code")
    })
}

/// Total mean-square error and entropy over the central `delta` fraction of codes.
///
/// # Safety
/// `q` must be a live handle; `m_total` and `h` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_entropy(q: *const SrqQuantizer, delta: f64, m_total: *mut f64, h: *mut f64) -> SrqStatus {
    guard(|| {
        let r = metrics::entropy_report(&deref(q, "quantizer")?.0, delta)?;
        write_out(m_total, r.m_total, "m_total")?;
        write_out(h, r.h, "h")
    })
}

/// `nk + log2(delta)`.
#[no_mangle]
pub extern "C" fn srq_shannon_limit(nk: u32, delta: f64) -> f64 {
    metrics::shannon_limit(nk, delta)
}

/// Writes a calibration LUT. `bytes` (optional) receives the file size.
///
/// # Safety
/// Handles must be live; `path` must be a NUL-terminated UTF-8 string;
/// `bytes` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn srq_lut_export(
    q: *const SrqQuantizer,
    array: *const SrqArray,
    path: *const c_char,
    bytes: *mut u64,
) -> SrqStatus {
    guard(|| {
        let q = deref(q, "quantizer")?;
        let array = deref(array, "array")?;
        let path = path_of(path)?;
        let n = lut::export_lut(&q.0, &array.0, path)?;
        if !bytes.is_null() {
            bytes.write(n);
        }
        Ok(())
    })
}

/// Reads and validates a calibration LUT.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `q_out` and `array_out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn srq_lut_import(
    path: *const c_char,
    q_out: *mut *mut SrqQuantizer,
    array_out: *mut *mut SrqArray,
) -> SrqStatus {
    guard(|| {
        if q_out.is_null() || array_out.is_null() {
            return Err(null("out"));
        }
        let (q, array) = lut::import_lut(path_of(path)?)?;
        q_out.write(Box::into_raw(Box::new(SrqQuantizer(q))));
        array_out.write(Box::into_raw(Box::new(SrqArray(array))));
        Ok(())
    })
}

/// # Safety
/// `q` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn srq_quantizer_free(q: *mut SrqQuantizer) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

unsafe fn path_of<'a>(p: *const c_char) -> Result<&'a str, SrqError> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| SrqError(SrqStatus::InvalidArgument, "path is not UTF-8".into()))
}
