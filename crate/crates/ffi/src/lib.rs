//! C ABI over the pcaharmony numerical kernels.
//!
//! Every fallible function returns a [`PhStatus`]; on failure a message for
//! the calling thread is available from [`ph_last_error_message`]. PCA models
//! are opaque handles created by [`ph_pca_fit`] or [`ph_pca_load`] and
//! released with [`ph_pca_free`]. Matrices are row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use pcaharmony::ingest::{DataMatrix, Mask};
use pcaharmony::metrics::{self, ConfusionCounts, LossConfig};
use pcaharmony::pca::{self, PcaModel};
use pcaharmony::stats::{self, TestResult};
use pcaharmony::Error;

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Degenerate = 5,
    Io = 6,
    Format = 7,
    BufferTooSmall = 8,
    Internal = 99,
}

/// Opaque fitted PCA model.
pub struct PhPcaModel {
    inner: PcaModel,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhConfusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhScores {
    pub recall: f64,
    pub precision: f64,
    pub dice: f64,
    /// Nonzero when the ground truth had no foreground.
    pub degenerate: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PhStatus {
    match e {
        Error::Io { .. } => PhStatus::Io,
        Error::Format { .. } => PhStatus::Format,
        Error::DimensionMismatch(_) => PhStatus::DimensionMismatch,
        Error::Numerical(_) => PhStatus::Numerical,
        Error::DegenerateTest(_) => PhStatus::Degenerate,
        _ => PhStatus::InvalidArgument,
    }
}

struct Fail(PhStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PhStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PhStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PhStatus::Internal
        }
    }
}

/// A slice from a C buffer; `len == 0` accepts a null pointer.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn model<'a>(m: *const PhPcaModel) -> Result<&'a PcaModel, Fail> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn fill(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Fail> {
    if len < values.len() {
        return Err(Fail(
            PhStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn ph_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fits PCA on a `rows x cols` row-major matrix.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` to writable storage
/// for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_fit(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut PhPcaModel,
) -> PhStatus {
    guard(|| {
        let out = output(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(PhStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let x = DataMatrix::from_rows(rows, cols, input(data, len, "data")?.to_vec())?;
        let m = pca::fit_pca(&x)?;
        *out = Box::into_raw(Box::new(PhPcaModel { inner: m }));
        Ok(())
    })
}

/// Loads a model saved in the UPM1 format.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_load(path: *const c_char, out: *mut *mut PhPcaModel) -> PhStatus {
    guard(|| {
        let out = output(out, "out")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(PhStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let m = PcaModel::read(Path::new(p))?;
        *out = Box::into_raw(Box::new(PhPcaModel { inner: m }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_save(model: *const PhPcaModel, path: *const c_char) -> PhStatus {
    guard(|| {
        let m = self::model(model)?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(PhStatus::InvalidArgument, "path is not UTF-8".into()))?;
        m.write(Path::new(p))?;
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_free(model: *mut PhPcaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of stored components, `min(rows - 1, cols)`. Zero for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_n_components(model: *const PhPcaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.k_max())
}

/// Feature dimension. Zero for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_dim(model: *const PhPcaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Number of training samples. Zero for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_n_samples(model: *const PhPcaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_samples())
}

/// Copies the eigenvalues (descending) into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_eigenvalues(model: *const PhPcaModel, out: *mut f64, len: usize) -> PhStatus {
    guard(|| fill(out, len, self::model(model)?.eigenvalues()))
}

/// Writes the rank-`k` reconstruction of the training samples, row-major
/// `n_samples x dim`, unclamped.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_pca_reconstruct(
    model: *const PhPcaModel,
    k: usize,
    out: *mut f64,
    len: usize,
) -> PhStatus {
    guard(|| {
        let r = self::model(model)?.reconstruct(k)?;
        fill(out, len, r.data())
    })
}

/// Kaiser-Guttman count: eigenvalues strictly above `threshold`, at least 1.
///
/// # Safety
/// `eigenvalues` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_kaiser_guttman(
    eigenvalues: *const f64,
    n: usize,
    threshold: f64,
    k_out: *mut usize,
) -> PhStatus {
    guard(|| {
        let out = output(k_out, "k_out")?;
        *out = pca::kaiser_guttman(input(eigenvalues, n, "eigenvalues")?, threshold)?;
        Ok(())
    })
}

/// Fraction of total variance carried by the first `k` eigenvalues.
///
/// # Safety
/// `eigenvalues` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_cumulative_variance(
    eigenvalues: *const f64,
    n: usize,
    k: usize,
    out: *mut f64,
) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        *o = pca::cumulative_explained_variance(input(eigenvalues, n, "eigenvalues")?, k)?;
        Ok(())
    })
}

/// Confusion counts of two binary masks of `len` pixels (values 0 or 1).
///
/// # Safety
/// `pred` and `gt` must each hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ph_confusion(
    pred: *const u8,
    gt: *const u8,
    len: usize,
    out: *mut PhConfusion,
) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        let p = Mask::new(len, 1, input(pred, len, "pred")?.to_vec())?;
        let g = Mask::new(len, 1, input(gt, len, "gt")?.to_vec())?;
        let c = metrics::confusion(&p, &g)?;
        *o = PhConfusion {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        };
        Ok(())
    })
}

/// Recall, precision and Dice from confusion counts.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ph_scores(counts: *const PhConfusion, out: *mut PhScores) -> PhStatus {
    guard(|| {
        let c = counts.as_ref().ok_or_else(|| null("counts"))?;
        let o = output(out, "out")?;
        let s = metrics::scores_from_counts(&ConfusionCounts {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        });
        *o = PhScores {
            recall: s.recall,
            precision: s.precision,
            dice: s.dice,
            degenerate: i32::from(s.degenerate),
        };
        Ok(())
    })
}

/// `beta * soft_dice_loss + (1 - beta) * mean_bce` over `len` pixels.
///
/// # Safety
/// `prob` must hold `len` doubles and `gt` `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ph_combined_loss(
    prob: *const f64,
    gt: *const u8,
    len: usize,
    beta: f64,
    smooth: f64,
    out: *mut f64,
) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        let cfg = LossConfig::new(beta, smooth)?;
        *o = metrics::combined_loss_slices(input(prob, len, "prob")?, input(gt, len, "gt")?, &cfg)?;
        Ok(())
    })
}

/// Two-tailed Student-t tail probability `P(|T| >= |t|)`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ph_t_sf(t: f64, df: f64, out: *mut f64) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        *o = stats::t_sf(t, df)?;
        Ok(())
    })
}

fn write_test(o: &mut PhTestResult, r: TestResult) {
    *o = PhTestResult {
        t: r.t,
        df: r.df,
        p: r.p,
    };
}

/// Paired test on `b - a`.
///
/// # Safety
/// `a` and `b` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_paired_t_test(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut PhTestResult,
) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        write_test(o, stats::paired_t_test(input(a, n, "a")?, input(b, n, "b")?)?);
        Ok(())
    })
}

/// Welch's unequal-variance test, statistic signed as `mean(b) - mean(a)`.
///
/// # Safety
/// `a` must hold `na` doubles and `b` `nb` doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_welch_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut PhTestResult,
) -> PhStatus {
    guard(|| {
        let o = output(out, "out")?;
        write_test(o, stats::welch_t_test(input(a, na, "a")?, input(b, nb, "b")?)?);
        Ok(())
    })
}
