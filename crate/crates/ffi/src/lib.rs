//! C ABI for augeval.
//!
//! Every fallible function returns an [`AugevalStatus`]; on failure the
//! message is available from [`augeval_last_error_message`] on the same
//! thread. Handles and strings returned by the library are owned by the
//! caller and released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, size_t};

use augeval::augment::Pipeline;
use augeval::ctcdecode::{best_path_decode, LogitMatrix};
use augeval::raster::{read_png_with, write_png, GrayImage, ReadOptions};
use augeval::stats::{bonferroni, wilcoxon_signed_rank, PairedSample, WilcoxonMode};
use augeval::textdata::{preprocess_line, Alphabet};
use augeval::{Error, RngStream};

/// Opaque 8-bit grayscale image.
pub struct AugevalImage(GrayImage);

/// Opaque symbol inventory for decoding.
pub struct AugevalAlphabet(Alphabet);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugevalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Image = 4,
    Data = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugevalTestMode {
    Exact = 0,
    NormalApprox = 1,
    Auto = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AugevalStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::NotFound(_) | Error::Io { .. } => AugevalStatus::Io,
            Error::UnsupportedFormat { .. } | Error::Codec(_) | Error::InvalidImage(_) => {
                AugevalStatus::Image
            }
            Error::UnknownPreset(_) | Error::InvalidParameter { .. } | Error::Config(_) => {
                AugevalStatus::InvalidArgument
            }
            _ => AugevalStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AugevalStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(AugevalStatus::InvalidArgument, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> AugevalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AugevalStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            AugevalStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn image_arg<'a>(p: *const AugevalImage) -> Result<&'a GrayImage, Failure> {
    p.as_ref().map(|i| &i.0).ok_or_else(|| null("image"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("string contains NUL"))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn boxed(img: GrayImage) -> *mut AugevalImage {
    Box::into_raw(Box::new(AugevalImage(img)))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn augeval_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a `width` x `height` image. `data` holds `width * height` bytes in
/// row-major order, or is NULL for an all-zero image.
///
/// # Safety
/// `data` must be NULL or point to `width * height` readable bytes; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_new(
    width: size_t,
    height: size_t,
    data: *const u8,
    out: *mut *mut AugevalImage,
) -> AugevalStatus {
    run(|| {
        if width == 0 || height == 0 {
            return Err(invalid("image dimensions must be at least 1x1"));
        }
        let len = width
            .checked_mul(height)
            .ok_or_else(|| invalid("image dimensions overflow"))?;
        let img = if data.is_null() {
            GrayImage::new(width, height)
        } else {
            GrayImage::from_raw(width, height, std::slice::from_raw_parts(data, len).to_vec())?
        };
        put(out, boxed(img))
    })
}

/// Reads an 8-bit PNG. Colour images need `luma`; `invert` flips intensities.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_read_png(
    path: *const c_char,
    invert: bool,
    luma: bool,
    out: *mut *mut AugevalImage,
) -> AugevalStatus {
    run(|| {
        let path = str_arg(path, "path")?;
        let img = read_png_with(path, ReadOptions { luma, invert })?;
        put(out, boxed(img))
    })
}

/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_write_png(
    img: *const AugevalImage,
    path: *const c_char,
) -> AugevalStatus {
    run(|| {
        let img = image_arg(img)?;
        write_png(img, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Width in pixels, or 0 for NULL.
///
/// # Safety
/// `img` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_width(img: *const AugevalImage) -> size_t {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// Height in pixels, or 0 for NULL.
///
/// # Safety
/// `img` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_height(img: *const AugevalImage) -> size_t {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Copies the row-major pixels into `buf`, which holds `len` bytes.
///
/// # Safety
/// `img` must be a live handle and `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_copy_data(
    img: *const AugevalImage,
    buf: *mut u8,
    len: size_t,
) -> AugevalStatus {
    run(|| {
        let img = image_arg(img)?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let data = img.as_raw();
        if len < data.len() {
            return Err(invalid(format!("buffer holds {len} bytes, need {}", data.len())));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// # Safety
/// `img` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augeval_image_free(img: *mut AugevalImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Applies a preset (or `combined-top3`, or a config file path) with rate
/// `prob`, seeded by `seed`. `params_json` receives a JSON array of the
/// applied draws; free it with [`augeval_string_free`]. It may be NULL.
///
/// # Safety
/// `img` must be a live handle, `preset` a NUL-terminated string, `out` a
/// valid pointer and `params_json` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_augment(
    img: *const AugevalImage,
    preset: *const c_char,
    seed: u64,
    prob: f64,
    out: *mut *mut AugevalImage,
    params_json: *mut *mut c_char,
) -> AugevalStatus {
    run(|| {
        let img = image_arg(img)?;
        let pipeline = Pipeline::resolve(str_arg(preset, "preset")?)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let (result, applied) = pipeline.apply(img, prob, &mut RngStream::new(seed))?;
        if !params_json.is_null() {
            let json = serde_json::to_string(&applied).map_err(Error::from)?;
            params_json.write(into_c_string(json)?);
        }
        out.write(boxed(result));
        Ok(())
    })
}

/// Height-normalises to 64 rows and pads to 1362 columns.
///
/// # Safety
/// `img` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_preprocess_line(
    img: *const AugevalImage,
    out: *mut *mut AugevalImage,
) -> AugevalStatus {
    run(|| {
        let img = image_arg(img)?;
        let line = preprocess_line(img)?;
        put(out, boxed(line))
    })
}

/// The built-in 51-symbol alphabet. Never NULL.
#[no_mangle]
pub extern "C" fn augeval_alphabet_default() -> *mut AugevalAlphabet {
    Box::into_raw(Box::new(AugevalAlphabet(Alphabet::lion_default())))
}

/// Loads an alphabet file, one symbol per line.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_alphabet_from_file(
    path: *const c_char,
    out: *mut *mut AugevalAlphabet,
) -> AugevalStatus {
    run(|| {
        let a = Alphabet::from_file(str_arg(path, "path")?)?;
        put(out, Box::into_raw(Box::new(AugevalAlphabet(a))))
    })
}

/// Number of symbols, excluding the blank; 0 for NULL.
///
/// # Safety
/// `alphabet` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn augeval_alphabet_len(alphabet: *const AugevalAlphabet) -> size_t {
    alphabet.as_ref().map_or(0, |a| a.0.len())
}

/// # Safety
/// `alphabet` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augeval_alphabet_free(alphabet: *mut AugevalAlphabet) {
    if !alphabet.is_null() {
        drop(Box::from_raw(alphabet));
    }
}

/// Best-path decodes a row-major `timesteps` x `classes` score matrix.
/// Class 0 is the blank. Free the result with [`augeval_string_free`].
///
/// # Safety
/// `alphabet` must be a live handle, `logits` must point to
/// `timesteps * classes` doubles and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_best_path_decode(
    alphabet: *const AugevalAlphabet,
    logits: *const f64,
    timesteps: size_t,
    classes: size_t,
    out: *mut *mut c_char,
) -> AugevalStatus {
    run(|| {
        let alphabet = alphabet.as_ref().ok_or_else(|| null("alphabet"))?;
        if logits.is_null() {
            return Err(null("logits"));
        }
        let len = timesteps
            .checked_mul(classes)
            .ok_or_else(|| invalid("matrix size overflows"))?;
        let values = std::slice::from_raw_parts(logits, len).to_vec();
        let m = LogitMatrix::new(timesteps, classes, values)?;
        let text = best_path_decode(&m, &alphabet.0)?;
        put(out, into_c_string(text)?)
    })
}

/// Character error rate of `hyp` against `reference`.
///
/// # Safety
/// `hyp` and `reference` must be NUL-terminated UTF-8; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_cer(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> AugevalStatus {
    run(|| {
        let rate = augeval::metrics::cer(str_arg(hyp, "hyp")?, str_arg(reference, "reference")?)?;
        put(out, rate)
    })
}

/// Word error rate of `hyp` against `reference`, splitting on whitespace.
///
/// # Safety
/// `hyp` and `reference` must be NUL-terminated UTF-8; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn augeval_wer(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> AugevalStatus {
    run(|| {
        let rate = augeval::metrics::wer(str_arg(hyp, "hyp")?, str_arg(reference, "reference")?)?;
        put(out, rate)
    })
}

/// Two-sided signed-rank test on the pairs `(a[i], b[i])`. Fails with
/// `Data` when every difference is zero.
///
/// # Safety
/// `a` and `b` must point to `n` doubles; the outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn augeval_wilcoxon(
    a: *const f64,
    b: *const f64,
    n: size_t,
    mode: AugevalTestMode,
    statistic: *mut f64,
    p_value: *mut f64,
) -> AugevalStatus {
    run(|| {
        if a.is_null() || b.is_null() {
            return Err(null("sample"));
        }
        if statistic.is_null() || p_value.is_null() {
            return Err(null("output pointer"));
        }
        let sample = PairedSample::from_values(
            std::slice::from_raw_parts(a, n).to_vec(),
            std::slice::from_raw_parts(b, n).to_vec(),
        )?;
        let mode = match mode {
            AugevalTestMode::Exact => WilcoxonMode::Exact,
            AugevalTestMode::NormalApprox => WilcoxonMode::NormalApprox,
            AugevalTestMode::Auto => WilcoxonMode::Auto,
        };
        let r = wilcoxon_signed_rank(&sample, mode)?;
        statistic.write(r.statistic);
        p_value.write(r.p_value);
        Ok(())
    })
}

/// `min(1, p * n)`.
#[no_mangle]
pub extern "C" fn augeval_bonferroni(p: f64, n: size_t) -> f64 {
    bonferroni(p, n)
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn augeval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
