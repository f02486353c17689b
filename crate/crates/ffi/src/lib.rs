//! C ABI over `tdseg`.
//!
//! Every fallible call returns a [`TdsegStatus`]; on anything but
//! `TDSEG_STATUS_OK` a description is available from
//! [`tdseg_last_error_message`] on the same thread. Objects cross the
//! boundary as opaque handles and must be released with the matching
//! `*_free` function. Strings returned through out-parameters are owned by
//! the caller and released with [`tdseg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdseg::knowledge::{self, KnowledgeBase};
use tdseg::{pgm, Image, ScaleSelection, SegmentationConfig, SegmentationResult};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdsegStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ImageError = 3,
    KnowledgeBaseError = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdsegScaleSelection {
    Fixed = 0,
    Density = 1,
}

/// Segmentation parameters. Obtain defaults from [`tdseg_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TdsegConfig {
    pub delta: f64,
    pub tau: f64,
    pub max_refine_iters: usize,
    pub stop_threshold: usize,
    pub drop_ratio: f64,
    pub scale_selection: TdsegScaleSelection,
}

impl From<&TdsegConfig> for SegmentationConfig {
    fn from(c: &TdsegConfig) -> Self {
        SegmentationConfig {
            delta: c.delta,
            tau: c.tau,
            max_refine_iters: c.max_refine_iters,
            stop_threshold: c.stop_threshold,
            drop_ratio: c.drop_ratio,
            scale_selection: match c.scale_selection {
                TdsegScaleSelection::Fixed => ScaleSelection::Fixed,
                TdsegScaleSelection::Density => ScaleSelection::Density,
            },
        }
    }
}

/// Opaque grayscale image.
pub struct TdsegImage(Image);

/// Opaque segmentation result, including the object registry.
pub struct TdsegResult(SegmentationResult);

/// Opaque, validated knowledge base.
pub struct TdsegKnowledgeBase(KnowledgeBase);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TdsegStatus, String);

impl Failure {
    fn new(status: TdsegStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TdsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TdsegStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            TdsegStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(TdsegStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(TdsegStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(TdsegStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(TdsegStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(TdsegStatus::InvalidArgument, "output contains a NUL byte"))
}

/// Default segmentation parameters.
#[no_mangle]
pub extern "C" fn tdseg_config_default() -> TdsegConfig {
    let d = SegmentationConfig::default();
    TdsegConfig {
        delta: d.delta,
        tau: d.tau,
        max_refine_iters: d.max_refine_iters,
        stop_threshold: d.stop_threshold,
        drop_ratio: d.drop_ratio,
        scale_selection: match d.scale_selection {
            ScaleSelection::Fixed => TdsegScaleSelection::Fixed,
            ScaleSelection::Density => TdsegScaleSelection::Density,
        },
    }
}

/// Message for the last failed call on this thread, or null after a
/// successful one. The pointer stays valid until the next call into this
/// library on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn tdseg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds an image from `width * height` row-major 8-bit samples.
///
/// # Safety
/// `data` must point to at least `width * height` readable bytes and `out`
/// must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tdseg_image_from_gray8(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut TdsegImage,
) -> TdsegStatus {
    guard(|| {
        check_out(out, "out")?;
        if data.is_null() {
            return Err(Failure::new(TdsegStatus::NullPointer, "data is null"));
        }
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Failure::new(TdsegStatus::InvalidArgument, "dimensions overflow"))?;
        let samples = std::slice::from_raw_parts(data, n);
        let img = Image::from_gray8(width, height, samples)
            .map_err(|e| Failure::new(TdsegStatus::ImageError, e))?;
        *out = Box::into_raw(Box::new(TdsegImage(img)));
        Ok(())
    })
}

/// Reads a binary or ASCII PGM file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_image_from_pgm_file(
    path: *const c_char,
    out: *mut *mut TdsegImage,
) -> TdsegStatus {
    guard(|| {
        check_out(out, "out")?;
        let path = c_str(path, "path")?;
        let img = pgm::read(path).map_err(|e| Failure::new(TdsegStatus::ImageError, e))?;
        *out = Box::into_raw(Box::new(TdsegImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdseg_image_free(img: *mut TdsegImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Entropy in bits per pixel of the image's prediction residuals.
///
/// # Safety
/// `img` must be a live image handle and `bits` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_image_information_density(
    img: *const TdsegImage,
    bits: *mut f64,
) -> TdsegStatus {
    guard(|| {
        let img = deref(img, "img")?;
        check_out(bits, "bits")?;
        *bits = tdseg::information_density(&img.0);
        Ok(())
    })
}

/// Runs the full top-down segmentation. A null `config` means defaults.
///
/// # Safety
/// `img` must be a live image handle, `config` null or valid, and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_segment(
    img: *const TdsegImage,
    config: *const TdsegConfig,
    out: *mut *mut TdsegResult,
) -> TdsegStatus {
    guard(|| {
        let img = deref(img, "img")?;
        check_out(out, "out")?;
        let cfg = config.as_ref().map_or_else(SegmentationConfig::default, Into::into);
        let res = tdseg::run_pipeline(&img.0, &cfg)
            .map_err(|e| Failure::new(TdsegStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(TdsegResult(res)));
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdseg_result_free(res: *mut TdsegResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Index of the level segmentation started at; levels `0..=top` are available.
///
/// # Safety
/// `res` must be a live result handle and `top` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_result_top_level(
    res: *const TdsegResult,
    top: *mut usize,
) -> TdsegStatus {
    guard(|| {
        let res = deref(res, "res")?;
        check_out(top, "top")?;
        *top = res.0.top_level;
        Ok(())
    })
}

fn level_of(res: &TdsegResult, level: usize) -> Result<&tdseg::LevelSegmentation, Failure> {
    res.0.level(level).ok_or_else(|| {
        Failure::new(
            TdsegStatus::InvalidArgument,
            format!("level {level} out of range 0..={}", res.0.top_level),
        )
    })
}

/// Dimensions of the label map at `level`.
///
/// # Safety
/// `res` must be a live result handle; `width` and `height` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tdseg_result_level_dims(
    res: *const TdsegResult,
    level: usize,
    width: *mut usize,
    height: *mut usize,
) -> TdsegStatus {
    guard(|| {
        let res = deref(res, "res")?;
        check_out(width, "width")?;
        check_out(height, "height")?;
        let lvl = level_of(res, level)?;
        *width = lvl.labels.width();
        *height = lvl.labels.height();
        Ok(())
    })
}

/// Copies the row-major label map of `level` into `buf`, which must hold
/// `width * height` entries.
///
/// # Safety
/// `res` must be a live result handle and `buf` must point to `buf_len`
/// writable `uint32_t`s.
#[no_mangle]
pub unsafe extern "C" fn tdseg_result_copy_labels(
    res: *const TdsegResult,
    level: usize,
    buf: *mut u32,
    buf_len: usize,
) -> TdsegStatus {
    guard(|| {
        let res = deref(res, "res")?;
        check_out(buf, "buf")?;
        let labels = level_of(res, level)?.labels.labels();
        if buf_len < labels.len() {
            return Err(Failure::new(
                TdsegStatus::BufferTooSmall,
                format!("buffer holds {buf_len} labels, level {level} has {}", labels.len()),
            ));
        }
        ptr::copy_nonoverlapping(labels.as_ptr(), buf, labels.len());
        Ok(())
    })
}

/// Object registry as JSON. Free the string with [`tdseg_string_free`].
///
/// # Safety
/// `res` must be a live result handle and `json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_result_registry_json(
    res: *const TdsegResult,
    json: *mut *mut c_char,
) -> TdsegStatus {
    guard(|| {
        let res = deref(res, "res")?;
        check_out(json, "json")?;
        *json = into_c_string(res.0.registry.to_json())?;
        Ok(())
    })
}

/// Parses and validates a knowledge base document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_kb_from_json(
    json: *const c_char,
    out: *mut *mut TdsegKnowledgeBase,
) -> TdsegStatus {
    guard(|| {
        check_out(out, "out")?;
        let doc = c_str(json, "json")?;
        let kb = knowledge::load_knowledge_base(doc)
            .map_err(|e| Failure::new(TdsegStatus::KnowledgeBaseError, e))?;
        *out = Box::into_raw(Box::new(TdsegKnowledgeBase(kb)));
        Ok(())
    })
}

/// # Safety
/// `kb` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdseg_kb_free(kb: *mut TdsegKnowledgeBase) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Annotates the base level against `kb` and returns the annotation as JSON.
///
/// # Safety
/// `res` and `kb` must be live handles and `json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdseg_annotate_json(
    res: *const TdsegResult,
    kb: *const TdsegKnowledgeBase,
    theta: f64,
    json: *mut *mut c_char,
) -> TdsegStatus {
    guard(|| {
        let res = deref(res, "res")?;
        let kb = deref(kb, "kb")?;
        check_out(json, "json")?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Failure::new(
                TdsegStatus::InvalidArgument,
                format!("theta {theta} outside [0, 1]"),
            ));
        }
        let ann = knowledge::annotate(&res.0.registry, &kb.0, theta);
        *json = into_c_string(ann.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
