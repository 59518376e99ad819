//! C interface to the pose2gait library.
//!
//! Every fallible function returns a [`P2gStatus`]. On failure a message is
//! kept per thread and can be read with [`p2g_last_error`]. Walk collections
//! and models are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pose2gait::eval::{mae, spearman_rho};
use pose2gait::model::TrainedModel;
use pose2gait::nn::{Graph, Tensor};
use pose2gait::walkio::{read_walks, write_walks};
use pose2gait::{encode_metadata, Error, WalkRecord, METADATA_LEN, NUM_FEATURES};

/// Number of features per prediction row.
pub const P2G_NUM_FEATURES: usize = 4;
/// Length of the metadata vector.
pub const P2G_METADATA_LEN: usize = 5;

const _: () = assert!(P2G_NUM_FEATURES == NUM_FEATURES && P2G_METADATA_LEN == METADATA_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2gStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Schema = 4,
    Data = 5,
    Checkpoint = 6,
    NonFinite = 7,
    /// The walk has no ground truth.
    NotFound = 8,
    Internal = 9,
}

/// A list of walk records.
pub struct P2gWalks {
    records: Vec<WalkRecord>,
}

/// A trained model.
pub struct P2gModel {
    model: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> P2gStatus {
    match e {
        Error::Io { .. } => P2gStatus::Io,
        Error::Schema { .. } => P2gStatus::Schema,
        Error::Checkpoint(_) => P2gStatus::Checkpoint,
        Error::NonFinite(_) => P2gStatus::NonFinite,
        Error::InvalidArgument(_) | Error::Shape(_) | Error::Config(_) => P2gStatus::InvalidArgument,
        _ => P2gStatus::Data,
    }
}

struct Fail(P2gStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(P2gStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(P2gStatus::InvalidArgument, msg.into())
}

/// Run `f`, record any failure and convert it (or a panic) to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> P2gStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            P2gStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            P2gStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn walks_ref<'a>(w: *const P2gWalks) -> Result<&'a P2gWalks, Fail> {
    w.as_ref().ok_or_else(|| null("walks"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn p2g_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn p2g_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Read a walks file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn p2g_walks_read(path: *const c_char, out: *mut *mut P2gWalks) -> P2gStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let records = read_walks(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(P2gWalks { records }));
        Ok(())
    })
}

/// # Safety
/// `walks` must come from [`p2g_walks_read`]; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn p2g_walks_write(walks: *const P2gWalks, path: *const c_char) -> P2gStatus {
    guard(|| {
        let w = walks_ref(walks)?;
        write_walks(&w.records, path_arg(path)?)?;
        Ok(())
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `walks` must be null or come from [`p2g_walks_read`].
#[no_mangle]
pub unsafe extern "C" fn p2g_walks_len(walks: *const P2gWalks) -> usize {
    walks.as_ref().map_or(0, |w| w.records.len())
}

/// # Safety
/// `walks` must be null or come from [`p2g_walks_read`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn p2g_walks_free(walks: *mut P2gWalks) {
    if !walks.is_null() {
        drop(Box::from_raw(walks));
    }
}

/// Copy the ground truth of record `index` into `out[4]`.
///
/// # Safety
/// `walks` must come from [`p2g_walks_read`]; `out` must hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn p2g_walk_truth(walks: *const P2gWalks, index: usize, out: *mut f64) -> P2gStatus {
    guard(|| {
        let w = walks_ref(walks)?;
        let r = w
            .records
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range ({} walks)", w.records.len())))?;
        let truth = r
            .truth
            .ok_or_else(|| Fail(P2gStatus::NotFound, format!("walk {}: no truth", r.meta.walk_id)))?;
        out_slice(out, NUM_FEATURES, "out")?.copy_from_slice(&truth.to_array());
        Ok(())
    })
}

/// Write the metadata vector of record `index` into `out[P2G_METADATA_LEN]`.
///
/// # Safety
/// `walks` must come from [`p2g_walks_read`]; `out` must hold
/// `P2G_METADATA_LEN` doubles.
#[no_mangle]
pub unsafe extern "C" fn p2g_walk_metadata(walks: *const P2gWalks, index: usize, out: *mut f64) -> P2gStatus {
    guard(|| {
        let w = walks_ref(walks)?;
        let r = w
            .records
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range ({} walks)", w.records.len())))?;
        out_slice(out, METADATA_LEN, "out")?.copy_from_slice(&encode_metadata(&r.meta));
        Ok(())
    })
}

/// Load a model checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn p2g_model_load(path: *const c_char, out: *mut *mut P2gModel) -> P2gStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = TrainedModel::load(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(P2gModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or come from [`p2g_model_load`], and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn p2g_model_free(model: *mut P2gModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Predict every record. `out` receives `len * 4` doubles in record order
/// (step time, step width, step length, velocity); rows of walks that
/// cannot be preprocessed are NaN and counted in `*skipped` when it is not
/// null.
///
/// # Safety
/// Handles must be valid; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn p2g_model_predict(
    model: *const P2gModel,
    walks: *const P2gWalks,
    out: *mut f64,
    out_len: usize,
    skipped: *mut usize,
) -> P2gStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.model;
        let w = walks_ref(walks)?;
        let need = w.records.len() * NUM_FEATURES;
        if out_len != need {
            return Err(invalid(format!("out_len is {out_len}, need {need}")));
        }
        let out = out_slice(out, need, "out")?;
        let rows = m.predict(&w.records, &m.preprocess)?;
        let mut n_skipped = 0;
        for (row, dst) in rows.iter().zip(out.chunks_exact_mut(NUM_FEATURES)) {
            match row.features() {
                Some(f) => dst.copy_from_slice(&f.to_array()),
                None => {
                    n_skipped += 1;
                    dst.fill(f64::NAN);
                }
            }
        }
        if !skipped.is_null() {
            *skipped = n_skipped;
        }
        Ok(())
    })
}

/// Spearman's rank correlation with a two-sided p-value.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `rho` and `p_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn p2g_spearman(
    x: *const f64,
    y: *const f64,
    n: usize,
    rho: *mut f64,
    p_value: *mut f64,
) -> P2gStatus {
    guard(|| {
        if rho.is_null() || p_value.is_null() {
            return Err(null("rho/p_value"));
        }
        let c = spearman_rho(slice(x, n, "x")?, slice(y, n, "y")?)?;
        *rho = c.rho;
        *p_value = c.p_value;
        Ok(())
    })
}

/// Mean absolute error.
///
/// # Safety
/// `pred` and `truth` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn p2g_mae(pred: *const f64, truth: *const f64, n: usize, out: *mut f64) -> P2gStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mae(slice(pred, n, "pred")?, slice(truth, n, "truth")?)?;
        Ok(())
    })
}

/// Weighted mean squared error over a `rows x cols` row-major batch:
/// sum of `weights[c] * (pred - target)^2` divided by `rows * cols`.
///
/// # Safety
/// `pred` and `target` must hold `rows * cols` doubles, `weights` `cols`
/// doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn p2g_weighted_mse(
    pred: *const f64,
    target: *const f64,
    rows: usize,
    cols: usize,
    weights: *const f64,
    out: *mut f64,
) -> P2gStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if rows == 0 || cols == 0 {
            return Err(invalid("empty batch"));
        }
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("batch too large"))?;
        let mut g = Graph::<f64>::new();
        let p = g.constant(Tensor::new(vec![rows, cols], slice(pred, n, "pred")?.to_vec())?);
        let t = g.constant(Tensor::new(vec![rows, cols], slice(target, n, "target")?.to_vec())?);
        let loss = g.weighted_mse(p, t, slice(weights, cols, "weights")?)?;
        *out = g.value(loss).item()?;
        Ok(())
    })
}
