//! C ABI over `codes_core`.
//!
//! Every function returns a [`CodesStatus`]. On failure the message is kept per
//! thread and read with [`codes_last_error_message`]. Handles are opaque and
//! owned by the caller until passed to the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use ndarray::{ArrayView2, ArrayView3};

use codes_core::dataset::{fit_normalization, load_dataset, save_dataset, TrainingSubset, TrajectoryDataset};
use codes_core::metrics::{error_metrics, pearson, Correlation};
use codes_core::odegen::{generate_dataset, GenerationSizes, OdeSystem, SystemId};
use codes_core::surrogates::{train, Predictor, SurrogateKind, SurrogateModel, SurrogateSpec};
use codes_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Numerical = 6,
    Config = 7,
    UnknownDataset = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodesSurrogate {
    Fcnn = 0,
    Mon = 1,
    Lnode = 2,
    Lp = 3,
}

impl From<CodesSurrogate> for SurrogateKind {
    fn from(s: CodesSurrogate) -> Self {
        match s {
            CodesSurrogate::Fcnn => SurrogateKind::FullyConnected,
            CodesSurrogate::Mon => SurrogateKind::MultiOnet,
            CodesSurrogate::Lnode => SurrogateKind::LatentNeuralOde,
            CodesSurrogate::Lp => SurrogateKind::LatentPoly,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodesSplit {
    Train = 0,
    Val = 1,
    Test = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CodesCounts {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_timesteps: usize,
    pub n_quantities: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CodesErrorMetrics {
    pub mse: f64,
    pub mae: f64,
    pub mre: f64,
}

/// Opaque dataset handle.
pub struct CodesDataset {
    inner: TrajectoryDataset,
}

/// Opaque surrogate model handle.
pub struct CodesModel {
    inner: SurrogateModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> CodesStatus {
    match err {
        Error::Io { .. } | Error::RunExists(_) => CodesStatus::Io,
        Error::BadMagic { .. } | Error::Format(_) | Error::Json(_) | Error::Csv(_) => CodesStatus::Format,
        Error::Shape(_) => CodesStatus::Shape,
        Error::Integrator { .. } | Error::Divergence { .. } | Error::NonFinite(_) => CodesStatus::Numerical,
        Error::Config { .. } => CodesStatus::Config,
        Error::UnknownDataset(_) => CodesStatus::UnknownDataset,
        Error::Invariant(_) | Error::Sample { .. } | Error::InvalidArgument(_) => CodesStatus::InvalidArgument,
    }
}

struct Failure(CodesStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CodesStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CodesStatus::InvalidArgument, msg.into())
}

/// Runs `f`, catching panics and recording failures in the thread-local slot.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CodesStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CodesStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            CodesStatus::Panic
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

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and the caller promises it points to writable storage for a T.
    unsafe { ptr::write(out, value) };
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn codes_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates a synthetic dataset. `system` is `lotka_volterra`, `simple_ode` or `simple_reaction`.
///
/// # Safety
/// `system` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_generate(
    system: *const c_char,
    seed: u64,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    n_timesteps: usize,
    out: *mut *mut CodesDataset,
) -> CodesStatus {
    guard(|| {
        let id: SystemId = str_arg(system, "system")?.parse()?;
        let sizes = GenerationSizes {
            n_train,
            n_val,
            n_test,
            n_timesteps,
        };
        let inner = generate_dataset(&OdeSystem::new(id), sizes, seed)?;
        write_out(out, Box::into_raw(Box::new(CodesDataset { inner })), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_load(path: *const c_char, out: *mut *mut CodesDataset) -> CodesStatus {
    guard(|| {
        let inner = load_dataset(PathBuf::from(str_arg(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(CodesDataset { inner })), "out")
    })
}

/// # Safety
/// `ds` must be a live dataset handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_save(ds: *const CodesDataset, path: *const c_char) -> CodesStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        save_dataset(&ds.inner, PathBuf::from(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_counts(ds: *const CodesDataset, out: *mut CodesCounts) -> CodesStatus {
    guard(|| {
        let c = handle(ds, "dataset")?.inner.counts;
        let counts = CodesCounts {
            n_train: c.n_train,
            n_val: c.n_val,
            n_test: c.n_test,
            n_timesteps: c.n_timesteps,
            n_quantities: c.n_quantities,
        };
        write_out(out, counts, "out")
    })
}

/// Copies one split, row-major `[samples, timesteps, quantities]`, into `out` of exactly `len` values.
///
/// # Safety
/// `ds` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_copy_split(
    ds: *const CodesDataset,
    split: CodesSplit,
    out: *mut f64,
    len: usize,
) -> CodesStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.inner;
        let arr = match split {
            CodesSplit::Train => &ds.train,
            CodesSplit::Val => &ds.val,
            CodesSplit::Test => &ds.test,
        };
        if len != arr.len() {
            return Err(Failure(
                CodesStatus::Shape,
                format!("split holds {} values, buffer has {len}", arr.len()),
            ));
        }
        let dst = out_slice(out, len, "out")?;
        for (d, s) in dst.iter_mut().zip(arr.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Copies the time grid (length `n_timesteps`) into `out`.
///
/// # Safety
/// `ds` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_time_grid(ds: *const CodesDataset, out: *mut f64, len: usize) -> CodesStatus {
    guard(|| {
        let grid = handle(ds, "dataset")?.inner.time_grid();
        if len != grid.len() {
            return Err(Failure(
                CodesStatus::Shape,
                format!("grid has {} points, buffer has {len}", grid.len()),
            ));
        }
        out_slice(out, len, "out")?.copy_from_slice(&grid);
        Ok(())
    })
}

/// # Safety
/// `ds` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn codes_dataset_free(ds: *mut CodesDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Builds an untrained model with the default architecture for `kind`.
///
/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn codes_model_build_default(
    kind: CodesSurrogate,
    n_quantities: usize,
    seed: u64,
    out: *mut *mut CodesModel,
) -> CodesStatus {
    guard(|| {
        if n_quantities == 0 {
            return Err(invalid("n_quantities must be >= 1"));
        }
        let inner = SurrogateModel::build(SurrogateSpec::default_for(kind.into(), n_quantities), seed)?;
        write_out(out, Box::into_raw(Box::new(CodesModel { inner })), "out")
    })
}

/// Builds an untrained model from a JSON surrogate spec, as returned by [`codes_model_spec_json`].
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn codes_model_build_json(
    spec_json: *const c_char,
    seed: u64,
    out: *mut *mut CodesModel,
) -> CodesStatus {
    guard(|| {
        let spec: SurrogateSpec = serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(Error::from)?;
        let inner = SurrogateModel::build(spec, seed)?;
        write_out(out, Box::into_raw(Box::new(CodesModel { inner })), "out")
    })
}

/// Writes a newly allocated JSON string with the model's spec. Free it with [`codes_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codes_model_spec_json(model: *const CodesModel, out: *mut *mut c_char) -> CodesStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(model, "model")?.inner.spec).map_err(Error::from)?;
        let c = CString::new(json).map_err(|_| invalid("spec contains NUL"))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn codes_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Fits the normalization on the train split, then trains on all train samples and timesteps.
/// `final_val_loss` may be NULL.
///
/// # Safety
/// `model` and `ds` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn codes_model_train(
    model: *mut CodesModel,
    ds: *const CodesDataset,
    log10: bool,
    seed: u64,
    final_val_loss: *mut f64,
) -> CodesStatus {
    guard(|| {
        let model = model.as_mut().ok_or_else(|| null("model"))?;
        let ds = &handle(ds, "dataset")?.inner;
        let transform = fit_normalization(ds, log10)?;
        let mut m = model.inner.clone().with_transform(transform)?;
        let history = train(&mut m, ds, &TrainingSubset::full(ds), seed)?;
        model.inner = m;
        if !final_val_loss.is_null() {
            let v = history.last().map_or(f64::NAN, |r| r.val_loss);
            write_out(final_val_loss, v, "final_val_loss")?;
        }
        Ok(())
    })
}

/// Predicts `[n_samples, n_times, n_quantities]` trajectories into `out` from row-major `y0`.
///
/// # Safety
/// `y0` must hold `n_samples * n_quantities` doubles, `t` `n_times` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn codes_model_predict(
    model: *const CodesModel,
    y0: *const f64,
    n_samples: usize,
    n_quantities: usize,
    t: *const f64,
    n_times: usize,
    out: *mut f64,
    out_len: usize,
) -> CodesStatus {
    guard(|| {
        let model = &handle(model, "model")?.inner;
        let y0 = slice_arg(y0, n_samples * n_quantities, "y0")?;
        let t = slice_arg(t, n_times, "t")?;
        let y0 = ArrayView2::from_shape((n_samples, n_quantities), y0).map_err(|e| invalid(e.to_string()))?;
        let pred = model.predict(y0, t)?;
        if pred.len() != out_len {
            return Err(Failure(
                CodesStatus::Shape,
                format!("prediction holds {} values, buffer has {out_len}", pred.len()),
            ));
        }
        for (d, s) in out_slice(out, out_len, "out")?.iter_mut().zip(pred.iter()) {
            *d = *s;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn codes_model_param_count(model: *const CodesModel, out: *mut usize) -> CodesStatus {
    guard(|| write_out(out, handle(model, "model")?.inner.param_count(), "out"))
}

/// Writes the model's checkpoint directory.
///
/// # Safety
/// `model` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn codes_model_save(model: *const CodesModel, dir: *const c_char) -> CodesStatus {
    guard(|| {
        handle(model, "model")?.inner.save(str_arg(dir, "dir")?)?;
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn codes_model_load(dir: *const c_char, out: *mut *mut CodesModel) -> CodesStatus {
    guard(|| {
        let inner = SurrogateModel::load(str_arg(dir, "dir")?)?;
        write_out(out, Box::into_raw(Box::new(CodesModel { inner })), "out")
    })
}

/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn codes_model_free(model: *mut CodesModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Pearson correlation of two length-`n` vectors. `*defined` is false when either
/// variance vanishes, in which case `*out` is NaN.
///
/// # Safety
/// `x` and `y` must hold `n` doubles; `out` and `defined` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codes_pearson(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    defined: *mut bool,
) -> CodesStatus {
    guard(|| {
        let r = pearson(slice_arg(x, n, "x")?, slice_arg(y, n, "y")?)?;
        let (v, d) = match r {
            Correlation::Value(v) => (v, true),
            Correlation::Undefined => (f64::NAN, false),
        };
        write_out(out, v, "out")?;
        write_out(defined, d, "defined")
    })
}

/// MSE, MAE and MRE over two row-major `[n_samples, n_times, n_quantities]` tensors.
///
/// # Safety
/// `pred` and `truth` must each hold the product of the three sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn codes_error_metrics(
    pred: *const f64,
    truth: *const f64,
    n_samples: usize,
    n_times: usize,
    n_quantities: usize,
    out: *mut CodesErrorMetrics,
) -> CodesStatus {
    guard(|| {
        let shape = (n_samples, n_times, n_quantities);
        let len = n_samples * n_times * n_quantities;
        let p = ArrayView3::from_shape(shape, slice_arg(pred, len, "pred")?).map_err(|e| invalid(e.to_string()))?;
        let t = ArrayView3::from_shape(shape, slice_arg(truth, len, "truth")?).map_err(|e| invalid(e.to_string()))?;
        let m = error_metrics(p, t)?;
        write_out(
            out,
            CodesErrorMetrics {
                mse: m.mse,
                mae: m.mae,
                mre: m.mre,
            },
            "out",
        )
    })
}
