//! C ABI over the maskslic library.
//!
//! Conventions:
//! - handles (`MslVolume`, `MslMask`, `MslLabeling`) are opaque; create them
//!   through the constructors and release them with the matching `_free`;
//! - every fallible call returns an [`MslStatus`]; `MSL_STATUS_OK` is zero;
//! - on failure, [`msl_last_error_message`] returns a thread-local
//!   human-readable message valid until the next failing call on the same
//!   thread;
//! - buffers passed in are copied, buffers returned out are borrowed views
//!   owned by the handle they came from.
//!
//! The C header is generated into `include/maskslic.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maskslic::{
    consistency_score, label_consistency, segment, Backend, Error, FeatureVolume, Labeling,
    LcAggregation, Mask, SlicParams,
};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MslStatus {
    Ok = 0,
    DimsMismatch = 1,
    EmptyMask = 2,
    OutOfBounds = 3,
    TooManySeeds = 4,
    NoSeedsInMask = 5,
    DegenerateData = 6,
    TooFewItems = 7,
    DivisionByZero = 8,
    BadMagic = 9,
    VersionUnsupported = 10,
    TruncatedPayload = 11,
    BadSpec = 12,
    InvalidInput = 13,
    Io = 14,
    NullArgument = 100,
    Panic = 101,
}

/// Clustering backend selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MslBackend {
    MaskSlic = 0,
    NaiveWholeImage = 1,
    NaiveGridFiltered = 2,
}

/// Segmentation parameters, passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MslParams {
    pub n_regions: usize,
    pub compactness: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub enforce_connectivity: bool,
    pub backend: MslBackend,
}

pub struct MslVolume {
    inner: FeatureVolume,
}

pub struct MslMask {
    inner: Mask,
}

pub struct MslLabeling {
    inner: Labeling,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(e: &Error) -> MslStatus {
    let text = CString::new(format!("{}: {e}", e.code())).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    match e {
        Error::DimsMismatch { .. } => MslStatus::DimsMismatch,
        Error::EmptyMask => MslStatus::EmptyMask,
        Error::OutOfBounds => MslStatus::OutOfBounds,
        Error::TooManySeeds { .. } => MslStatus::TooManySeeds,
        Error::NoSeedsInMask => MslStatus::NoSeedsInMask,
        Error::DegenerateData => MslStatus::DegenerateData,
        Error::TooFewItems { .. } => MslStatus::TooFewItems,
        Error::DivisionByZero => MslStatus::DivisionByZero,
        Error::BadMagic => MslStatus::BadMagic,
        Error::VersionUnsupported(_) => MslStatus::VersionUnsupported,
        Error::TruncatedPayload { .. } => MslStatus::TruncatedPayload,
        Error::BadSpec(_) => MslStatus::BadSpec,
        Error::InvalidInput(_) => MslStatus::InvalidInput,
        Error::Io(_) => MslStatus::Io,
    }
}

fn set_message(status: MslStatus, msg: &str) -> MslStatus {
    let text = CString::new(msg.to_string()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
    status
}

fn guard(f: impl FnOnce() -> MslStatus + std::panic::UnwindSafe) -> MslStatus {
    match catch_unwind(f) {
        Ok(status) => status,
        Err(_) => set_message(MslStatus::Panic, "E_PANIC: internal panic"),
    }
}

/// Message of the most recent failure on this thread. Borrowed; valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn msl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn msl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        None
    } else {
        CStr::from_ptr(ptr).to_str().ok()
    }
}

/// Builds a feature volume from a sample buffer laid out with the last
/// spatial axis fastest and the channel innermost.
///
/// # Safety
/// `dims` and `spacing` must point to `ndim` readable elements, `data` to
/// `data_len` readable doubles, and `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_volume_create(
    dims: *const usize,
    ndim: usize,
    channels: usize,
    spacing: *const f64,
    data: *const f64,
    data_len: usize,
    out: *mut *mut MslVolume,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        let (Some(dims), Some(spacing), Some(data)) = (
            slice_arg(dims, ndim),
            slice_arg(spacing, ndim),
            slice_arg(data, data_len),
        ) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null buffer");
        };
        if out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null out pointer");
        }
        match FeatureVolume::new(dims, channels, spacing, data.to_vec()) {
            Ok(v) => {
                *out = Box::into_raw(Box::new(MslVolume { inner: v }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// Reads a volume file (time series files are rejected here).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_volume_read(
    path: *const c_char,
    out: *mut *mut MslVolume,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        let Some(path) = path_arg(path) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: bad path");
        };
        if out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null out pointer");
        }
        match maskslic::io::read_volume(path).and_then(|v| v.into_features()) {
            Ok(v) => {
                *out = Box::into_raw(Box::new(MslVolume { inner: v }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// # Safety
/// `volume` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn msl_volume_free(volume: *mut MslVolume) {
    if !volume.is_null() {
        drop(Box::from_raw(volume));
    }
}

/// Builds a mask from a byte buffer (nonzero = foreground).
///
/// # Safety
/// `dims` must point to `ndim` elements and `bits` to `bits_len` bytes;
/// `out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_mask_create(
    dims: *const usize,
    ndim: usize,
    bits: *const u8,
    bits_len: usize,
    out: *mut *mut MslMask,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        let (Some(dims), Some(bits)) = (slice_arg(dims, ndim), slice_arg(bits, bits_len)) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null buffer");
        };
        if out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null out pointer");
        }
        match Mask::new(dims, bits.iter().map(|&b| b != 0).collect()) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(MslMask { inner: m }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// Reads a mask file (nonzero samples are foreground).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_mask_read(path: *const c_char, out: *mut *mut MslMask) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        let Some(path) = path_arg(path) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: bad path");
        };
        if out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null out pointer");
        }
        match maskslic::io::read_mask(path) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(MslMask { inner: m }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// # Safety
/// `mask` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn msl_mask_free(mask: *mut MslMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Runs the selected segmentation backend.
///
/// # Safety
/// `volume` and `mask` must be live handles; `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_segment(
    volume: *const MslVolume,
    mask: *const MslMask,
    params: MslParams,
    out: *mut *mut MslLabeling,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        if volume.is_null() || mask.is_null() || out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null handle");
        }
        let volume = &(*volume).inner;
        let mask = &(*mask).inner;
        let backend = match params.backend {
            MslBackend::MaskSlic => Backend::MaskSlic,
            MslBackend::NaiveWholeImage => Backend::NaiveWholeImage,
            MslBackend::NaiveGridFiltered => Backend::NaiveGridFiltered,
        };
        let slic_params = match SlicParams::new(params.n_regions, params.compactness) {
            Ok(p) => p
                .with_backend(backend)
                .with_max_iters(params.max_iters)
                .with_residual_tol(params.residual_tol)
                .with_connectivity(params.enforce_connectivity),
            Err(e) => return set_error(&e),
        };
        match segment(volume, mask, &slic_params) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(MslLabeling { inner: l }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// Number of distinct regions of a labeling; 0 for a null handle.
///
/// # Safety
/// `labeling` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_num_regions(labeling: *const MslLabeling) -> usize {
    if labeling.is_null() {
        return 0;
    }
    (*labeling).inner.num_regions()
}

/// Number of voxels in the label grid; 0 for a null handle.
///
/// # Safety
/// `labeling` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_len(labeling: *const MslLabeling) -> usize {
    if labeling.is_null() {
        return 0;
    }
    (*labeling).inner.labels().len()
}

/// Borrowed view of the label grid (-1 marks background), valid while the
/// handle lives. Null for a null handle.
///
/// # Safety
/// `labeling` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_data(labeling: *const MslLabeling) -> *const i32 {
    if labeling.is_null() {
        return ptr::null();
    }
    (*labeling).inner.labels().as_ptr()
}

/// Writes a labeling to a volume file (single-channel i32 payload).
///
/// # Safety
/// `labeling` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_write(
    labeling: *const MslLabeling,
    path: *const c_char,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        if labeling.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null handle");
        }
        let Some(path) = path_arg(path) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: bad path");
        };
        match maskslic::io::write_labeling(&(*labeling).inner, path) {
            Ok(()) => MslStatus::Ok,
            Err(e) => set_error(&e),
        }
    }))
}

/// Reads a labeling from a volume file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_read(
    path: *const c_char,
    out: *mut *mut MslLabeling,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        let Some(path) = path_arg(path) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: bad path");
        };
        if out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null out pointer");
        }
        match maskslic::io::read_labeling(path) {
            Ok(l) => {
                *out = Box::into_raw(Box::new(MslLabeling { inner: l }));
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// # Safety
/// `labeling` must be a handle from this library, not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn msl_labeling_free(labeling: *mut MslLabeling) {
    if !labeling.is_null() {
        drop(Box::from_raw(labeling));
    }
}

/// Mean best-overlap inconsistency between two labelings after shifting the
/// first by `offset` (`offset_len` entries, one per axis).
///
/// # Safety
/// `a` and `b` must be live handles, `offset` must point to `offset_len`
/// elements and `c_s_out` must be a valid destination.
#[no_mangle]
pub unsafe extern "C" fn msl_consistency_score(
    a: *const MslLabeling,
    b: *const MslLabeling,
    offset: *const i64,
    offset_len: usize,
    c_s_out: *mut f64,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        if a.is_null() || b.is_null() || c_s_out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null handle");
        }
        let Some(offset) = slice_arg(offset, offset_len) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null offset");
        };
        match consistency_score(&(*a).inner, &(*b).inner, offset) {
            Ok(r) => {
                *c_s_out = r.c_s;
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}

/// Voxel-weighted label consistency of a labeling against a ground-truth
/// grid (same length as the label grid), restricted to `mask`.
///
/// # Safety
/// Handles must be live, `truth` must point to `truth_len` elements, and the
/// out pointers must be valid destinations.
#[no_mangle]
pub unsafe extern "C" fn msl_label_consistency(
    labeling: *const MslLabeling,
    truth: *const i32,
    truth_len: usize,
    mask: *const MslMask,
    lc_out: *mut f64,
    e_out: *mut f64,
) -> MslStatus {
    guard(AssertUnwindSafe(|| {
        if labeling.is_null() || mask.is_null() || lc_out.is_null() || e_out.is_null() {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null handle");
        }
        let Some(truth) = slice_arg(truth, truth_len) else {
            return set_message(MslStatus::NullArgument, "E_NULL_ARGUMENT: null truth");
        };
        match label_consistency(
            &(*labeling).inner,
            truth,
            &(*mask).inner,
            LcAggregation::VoxelMean,
        ) {
            Ok(r) => {
                *lc_out = r.summary_lc;
                *e_out = r.e;
                MslStatus::Ok
            }
            Err(e) => set_error(&e),
        }
    }))
}
