//! C ABI over `wrelm`.
//!
//! Models and predictors are opaque heap handles. Every function returns a
//! [`WrelmStatus`]; on failure a message for the calling thread is available
//! from [`wrelm_last_error`]. Outputs are written through pointer arguments
//! only on success. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use wrelm::{Error, OfflineModel, OfflineWeights, OnlinePredictor, SeriesDataset, TrainConfig};

/// Result code of every exported call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WrelmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad argument, dimension mismatch, non-finite input or degenerate data.
    Invalid = 2,
    /// A numerical failure inside training or adaptation.
    Numeric = 3,
    /// File, format, version or checksum problem.
    Io = 4,
    /// A Rust panic was caught; the handle involved should be freed.
    Panic = 5,
}

/// Trained offline model, shareable by any number of predictors.
pub struct WrelmModel {
    inner: Arc<OfflineModel>,
}

/// One causal online stream over a model.
pub struct WrelmPredictor {
    inner: OnlinePredictor,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WrelmStatus {
    match e.exit_code() {
        3 => WrelmStatus::Numeric,
        4 => WrelmStatus::Io,
        _ => WrelmStatus::Invalid,
    }
}

fn guard(f: impl FnOnce() -> Result<(), WrelmStatus>) -> WrelmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WrelmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            WrelmStatus::Panic
        }
    }
}

fn fail(e: Error) -> WrelmStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> WrelmStatus {
    set_error(format!("{what} is null"));
    WrelmStatus::NullPointer
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, WrelmStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("path is not valid UTF-8".into());
        WrelmStatus::Invalid
    })?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], WrelmStatus> {
    if p.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn model_ref<'a>(m: *const WrelmModel) -> Result<&'a WrelmModel, WrelmStatus> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn predictor_mut<'a>(p: *mut WrelmPredictor) -> Result<&'a mut WrelmPredictor, WrelmStatus> {
    p.as_mut().ok_or_else(|| null("predictor"))
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wrelm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_load(path: *const c_char, out: *mut *mut WrelmModel) -> WrelmStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = wrelm::load_model(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(WrelmModel { inner: Arc::new(model) }));
        Ok(())
    })
}

/// Trains a model from a dataset CSV with default settings apart from the
/// given neuron count, scalar offline weight and seed.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_train_csv(
    path: *const c_char,
    n_neurons: usize,
    w0: f64,
    seed: u64,
    out: *mut *mut WrelmModel,
) -> WrelmStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = SeriesDataset::load(path).map_err(fail)?;
        let cfg = TrainConfig { n_neurons, w0: OfflineWeights::Scalar(w0), seed, ..Default::default() };
        let model = wrelm::train_offline(&ds, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(WrelmModel { inner: Arc::new(model) }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_save(model: *const WrelmModel, path: *const c_char) -> WrelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let path = path_arg(path)?;
        wrelm::save_model(&m.inner, path).map_err(fail)
    })
}

/// Frees a model. Predictors created from it stay valid. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_free(model: *mut WrelmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature count and hidden neuron count.
///
/// # Safety
/// `model` must come from this library; outputs must be writable or null.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_dims(model: *const WrelmModel, z: *mut usize, n_neurons: *mut usize) -> WrelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        if let Some(z) = z.as_mut() {
            *z = m.inner.z();
        }
        if let Some(n) = n_neurons.as_mut() {
            *n = m.inner.n_neurons();
        }
        Ok(())
    })
}

/// Offline (unadapted) prediction for one raw feature row.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wrelm_model_predict(
    model: *const WrelmModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> WrelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        let x = slice_arg(x, len, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.inner.predict_offline(x).map_err(fail)?;
        Ok(())
    })
}

/// Creates an adaptive predictor with a ring of `ring` pairs and unit weights.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_new(
    model: *const WrelmModel,
    ring: usize,
    out: *mut *mut WrelmPredictor,
) -> WrelmStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = OnlinePredictor::new(Arc::clone(&m.inner), ring).map_err(fail)?;
        *out = Box::into_raw(Box::new(WrelmPredictor { inner: p }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_free(p: *mut WrelmPredictor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Pushes the completed pair `(x, target)` and re-adapts.
///
/// # Safety
/// `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_observe(
    p: *mut WrelmPredictor,
    x: *const f64,
    len: usize,
    target: f64,
) -> WrelmStatus {
    guard(|| {
        let p = predictor_mut(p)?;
        let x = slice_arg(x, len, "x")?;
        p.inner.observe(x, target).map(|_| ()).map_err(fail)
    })
}

/// Predicts the target following `x` with the current adapted weights.
///
/// # Safety
/// `x` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_predict(
    p: *mut WrelmPredictor,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> WrelmStatus {
    guard(|| {
        let p = predictor_mut(p)?;
        let x = slice_arg(x, len, "x")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.inner.predict(x).map_err(fail)?;
        Ok(())
    })
}

/// Copies the current output weights into `out` (capacity `len`). Writes the
/// neuron count to `needed` when non-null; fails with `Invalid` if `len` is short.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_beta(
    p: *const WrelmPredictor,
    out: *mut f64,
    len: usize,
    needed: *mut usize,
) -> WrelmStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("predictor"))?;
        let beta = p.inner.state().beta1();
        if let Some(n) = needed.as_mut() {
            *n = beta.len();
        }
        if len < beta.len() {
            set_error(format!("buffer holds {len} values, need {}", beta.len()));
            return Err(WrelmStatus::Invalid);
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, beta.len()).copy_from_slice(beta.as_slice());
        Ok(())
    })
}

/// Number of pairs currently held in the ring.
///
/// # Safety
/// `p` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wrelm_predictor_ring_len(p: *const WrelmPredictor, out: *mut usize) -> WrelmStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("predictor"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.inner.ring().len();
        Ok(())
    })
}
