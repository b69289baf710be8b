//! C ABI for the twinbeam library.
//!
//! Objects are exposed as opaque handles that must be released with the
//! matching `tb_*_free` function. Every fallible call returns a [`TbStatus`];
//! on failure the message is available from [`tb_last_error`] until the next
//! call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use twinbeam::io::read_config;
use twinbeam::pipeline::histogram_in_process;
use twinbeam::spatial::{fit_gaussian, Coordinate, CrossSectionProfile};
use twinbeam::stats::{
    classicality_bound, correlation_coefficient, JointHistogram, JointPmf, PhotodetectionModel,
};
use twinbeam::{Error, ErrorKind};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    /// Invalid arguments, parameters or configuration.
    InvalidArgument = 1,
    Io = 2,
    /// Fit failure, missing peak, undefined statistic.
    Numerical = 3,
    NullPointer = 4,
    /// A panic was caught at the boundary.
    Internal = 5,
}

/// Opaque joint photocount histogram.
pub struct TbHistogram(JointHistogram);

/// Opaque joint probability table.
pub struct TbPmf(JointPmf);

/// Gaussian-plus-constant fit result.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TbFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub offset: f64,
    pub fwhm: f64,
    pub fwhm_err: f64,
    pub center_err: f64,
    /// Nonzero when the peak is narrower than one bin.
    pub resolution_limited: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> TbStatus {
    let status = match e.kind() {
        ErrorKind::Validation => TbStatus::InvalidArgument,
        ErrorKind::Io => TbStatus::Io,
        ErrorKind::Numerical => TbStatus::Numerical,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> TbStatus {
    set_error(format!("null pointer: {what}"));
    TbStatus::NullPointer
}

fn guard(f: impl FnOnce() -> TbStatus + std::panic::UnwindSafe) -> TbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    std::panic::catch_unwind(f).unwrap_or_else(|_| {
        set_error("internal panic".into());
        TbStatus::Internal
    })
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn tb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Classicality bound for the bin `(n_s, n_i)`.
#[no_mangle]
pub extern "C" fn tb_classicality_bound(n_s: u64, n_i: u64) -> f64 {
    classicality_bound(n_s, n_i)
}

/// Create an empty histogram with the given cutoff.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_new(cutoff: usize, out: *mut *mut TbHistogram) -> TbStatus {
    if out.is_null() {
        return null("out");
    }
    let h = Box::new(TbHistogram(JointHistogram::new(cutoff)));
    *out = Box::into_raw(h);
    TbStatus::Ok
}

/// Simulate the run described by a TOML config into a histogram.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_simulate(
    config_path: *const c_char,
    parallelism: usize,
    out: *mut *mut TbHistogram,
) -> TbStatus {
    if config_path.is_null() {
        return null("config_path");
    }
    if out.is_null() {
        return null("out");
    }
    let path = match CStr::from_ptr(config_path).to_str() {
        Ok(s) => s.to_owned(),
        Err(_) => {
            set_error("config_path is not UTF-8".into());
            return TbStatus::InvalidArgument;
        }
    };
    let out = out as usize;
    guard(move || {
        match read_config(Path::new(&path)).and_then(|c| histogram_in_process(&c, parallelism)) {
            Ok(h) => {
                *(out as *mut *mut TbHistogram) = Box::into_raw(Box::new(TbHistogram(h)));
                TbStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Add one frame with the given counts.
///
/// # Safety
/// `hist` must come from a `tb_histogram_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_accumulate(
    hist: *mut TbHistogram,
    c_s: usize,
    c_i: usize,
) -> TbStatus {
    match hist.as_mut() {
        Some(h) => {
            h.0.accumulate(c_s, c_i);
            TbStatus::Ok
        }
        None => null("hist"),
    }
}

/// Number of frames in the histogram (0 for null).
///
/// # Safety
/// `hist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_frames(hist: *const TbHistogram) -> u64 {
    hist.as_ref().map_or(0, |h| h.0.n_frames())
}

/// Count in bin `(c_s, c_i)`; zero outside the table or for null.
///
/// # Safety
/// `hist` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_get(hist: *const TbHistogram, c_s: usize, c_i: usize) -> u64 {
    match hist.as_ref() {
        Some(h) if c_s < h.0.side() && c_i < h.0.side() => h.0.get(c_s, c_i),
        _ => 0,
    }
}

/// Correlation coefficient with a bootstrap standard error.
///
/// # Safety
/// `hist` must be a live handle; `c_p` and `std_err` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_correlation(
    hist: *const TbHistogram,
    resamples: usize,
    seed: u64,
    c_p: *mut f64,
    std_err: *mut f64,
) -> TbStatus {
    let Some(h) = hist.as_ref() else {
        return null("hist");
    };
    if c_p.is_null() || std_err.is_null() {
        return null("output");
    }
    match correlation_coefficient(&h.0, resamples, seed) {
        Ok(r) => {
            *c_p = r.c_p;
            *std_err = r.std_err;
            TbStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a histogram. Null is ignored.
///
/// # Safety
/// `hist` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_histogram_free(hist: *mut TbHistogram) {
    if !hist.is_null() {
        drop(Box::from_raw(hist));
    }
}

/// Exact joint distribution of the photodetection model.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_pmf_analytic(
    mu: f64,
    eta_s: f64,
    eta_i: f64,
    dark_s: f64,
    dark_i: f64,
    cutoff: usize,
    out: *mut *mut TbPmf,
) -> TbStatus {
    if out.is_null() {
        return null("out");
    }
    let model = PhotodetectionModel {
        mu,
        eta_s,
        eta_i,
        dark_s,
        dark_i,
    };
    match model.joint(cutoff) {
        Ok(p) => {
            *out = Box::into_raw(Box::new(TbPmf(p)));
            TbStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Probability of bin `(c_s, c_i)`; zero outside the table or for null.
///
/// # Safety
/// `pmf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_pmf_get(pmf: *const TbPmf, c_s: usize, c_i: usize) -> f64 {
    match pmf.as_ref() {
        Some(p) if c_s < p.0.side() && c_i < p.0.side() => p.0.get(c_s, c_i),
        _ => 0.0,
    }
}

/// Correlation coefficient of the distribution.
///
/// # Safety
/// `pmf` must be a live handle and `c_p` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tb_pmf_correlation(pmf: *const TbPmf, c_p: *mut f64) -> TbStatus {
    let Some(p) = pmf.as_ref() else {
        return null("pmf");
    };
    if c_p.is_null() {
        return null("c_p");
    }
    match p.0.correlation() {
        Ok(v) => {
            *c_p = v;
            TbStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Release a distribution. Null is ignored.
///
/// # Safety
/// `pmf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_pmf_free(pmf: *mut TbPmf) {
    if !pmf.is_null() {
        drop(Box::from_raw(pmf));
    }
}

/// Fit a Gaussian plus constant to `len` samples of a profile with uniform
/// bins of `bin_width` centred at `s`.
///
/// # Safety
/// `s` and `weight` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tb_fit_gaussian(
    s: *const f64,
    weight: *const f64,
    len: usize,
    bin_width: f64,
    out: *mut TbFit,
) -> TbStatus {
    if s.is_null() || weight.is_null() {
        return null("samples");
    }
    if out.is_null() {
        return null("out");
    }
    let profile = CrossSectionProfile {
        coordinate: Coordinate::Theta,
        bin_width,
        s: std::slice::from_raw_parts(s, len).to_vec(),
        weight: std::slice::from_raw_parts(weight, len).to_vec(),
    };
    let out = out as usize;
    guard(move || match fit_gaussian(&profile) {
        Ok(f) => {
            *(out as *mut TbFit) = TbFit {
                amplitude: f.amplitude,
                center: f.center,
                sigma: f.sigma,
                offset: f.offset,
                fwhm: f.fwhm,
                fwhm_err: f.fwhm_err,
                center_err: f.center_err,
                resolution_limited: i32::from(f.resolution_limited),
            };
            TbStatus::Ok
        }
        Err(e) => fail(e),
    })
}
