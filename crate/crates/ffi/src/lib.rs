//! C ABI for the switching-time library.
//!
//! Conventions: objects are opaque handles created and destroyed by paired
//! `_new`/`_free` calls; every fallible function returns a [`SlowfastStatus`]
//! and writes results through out-pointers; the last error message of the
//! current thread is available via [`slowfast_last_error`]. All functions
//! catch panics at the boundary and report them as `InternalError`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_traits::ToPrimitive;

use slowfast::manifold::{
    solve_center_manifold, CenterManifold, Equilibrium, Poly1, SlowFastModel as CoreModel,
    Stability,
};
use slowfast::series::Rat;
use slowfast::{analysis, path, sde, Error};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlowfastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoConnection = 3,
    QuadratureNotConverged = 4,
    NewtonDiverged = 5,
    StiffnessBlowup = 6,
    DegenerateFit = 7,
    AllTrialsFailed = 8,
    InternalError = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SlowfastStatus {
    match err {
        Error::InvalidModel(_)
        | Error::InvalidParameter(_)
        | Error::NonAdjacentEquilibria { .. } => SlowfastStatus::InvalidArgument,
        Error::NoConnection { .. } => SlowfastStatus::NoConnection,
        Error::QuadratureNotConverged { .. } => SlowfastStatus::QuadratureNotConverged,
        Error::NewtonDiverged { .. } => SlowfastStatus::NewtonDiverged,
        Error::StiffnessBlowup { .. } => SlowfastStatus::StiffnessBlowup,
        Error::DegenerateFit(_) => SlowfastStatus::DegenerateFit,
        Error::AllTrialsFailed { .. } => SlowfastStatus::AllTrialsFailed,
        Error::SolveFailed(_) => SlowfastStatus::InternalError,
    }
}

fn run_guarded(body: impl FnOnce() -> SlowfastStatus) -> SlowfastStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SlowfastStatus::InternalError
        }
    }
}

fn fail(err: Error) -> SlowfastStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Opaque model handle.
pub struct SlowfastModel {
    inner: CoreModel,
}

/// Opaque invariant-graph handle.
pub struct SlowfastManifold {
    inner: CenterManifold,
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap` bytes). Returns the full message length in bytes,
/// excluding the terminator.
///
/// # Safety
/// `buf` must be writable for `cap` bytes (or null to query the length).
#[no_mangle]
pub unsafe extern "C" fn slowfast_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Build the double-well model (fast drift `x - x^3`).
#[no_mangle]
pub extern "C" fn slowfast_model_duffing(epsilon: f64, noise_d: f64) -> *mut SlowfastModel {
    Box::into_raw(Box::new(SlowfastModel {
        inner: CoreModel::duffing(epsilon, noise_d),
    }))
}

/// Build the broken-symmetry model (fast drift `2x + x^2 - x^3`).
#[no_mangle]
pub extern "C" fn slowfast_model_asymmetric(epsilon: f64, noise_d: f64) -> *mut SlowfastModel {
    Box::into_raw(Box::new(SlowfastModel {
        inner: CoreModel::asymmetric(epsilon, noise_d),
    }))
}

/// Build a custom model. The fast drift is given by `n_coeffs` exact
/// rational coefficients (ascending powers, numerator/denominator pairs);
/// the equilibria by `n_equilibria` rational positions with stability flags
/// (nonzero = sink, zero = saddle). Writes the handle to `out`.
///
/// # Safety
/// The array pointers must address the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn slowfast_model_custom(
    coeff_num: *const i64,
    coeff_den: *const i64,
    n_coeffs: usize,
    eq_num: *const i64,
    eq_den: *const i64,
    eq_is_sink: *const u8,
    n_equilibria: usize,
    epsilon: f64,
    noise_d: f64,
    out: *mut *mut SlowfastModel,
) -> SlowfastStatus {
    if coeff_num.is_null()
        || coeff_den.is_null()
        || eq_num.is_null()
        || eq_den.is_null()
        || eq_is_sink.is_null()
        || out.is_null()
    {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let nums = std::slice::from_raw_parts(coeff_num, n_coeffs);
    let dens = std::slice::from_raw_parts(coeff_den, n_coeffs);
    let eq_n = std::slice::from_raw_parts(eq_num, n_equilibria);
    let eq_d = std::slice::from_raw_parts(eq_den, n_equilibria);
    let eq_s = std::slice::from_raw_parts(eq_is_sink, n_equilibria);
    run_guarded(|| {
        for &d in dens.iter().chain(eq_d.iter()) {
            if d == 0 {
                set_error("zero denominator");
                return SlowfastStatus::InvalidArgument;
            }
        }
        let f = Poly1::new(
            nums.iter()
                .zip(dens)
                .map(|(&n, &d)| Rat::new(n.into(), d.into()))
                .collect(),
        );
        let equilibria = eq_n
            .iter()
            .zip(eq_d)
            .zip(eq_s)
            .map(|((&n, &d), &s)| Equilibrium {
                x: Rat::new(n.into(), d.into()),
                stability: if s != 0 {
                    Stability::Sink
                } else {
                    Stability::Saddle
                },
            })
            .collect();
        match CoreModel::new("custom", f, equilibria, epsilon, noise_d) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SlowfastModel { inner: model }));
                SlowfastStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Destroy a model handle.
///
/// # Safety
/// `model` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slowfast_model_free(model: *mut SlowfastModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Solve the invariant-graph series to the given grade cap.
///
/// # Safety
/// `model` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowfast_manifold_solve(
    model: *const SlowfastModel,
    grade_cap: u32,
    out: *mut *mut SlowfastManifold,
) -> SlowfastStatus {
    if model.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    run_guarded(|| match solve_center_manifold(model, grade_cap) {
        Ok(cm) => {
            *out = Box::into_raw(Box::new(SlowfastManifold { inner: cm }));
            SlowfastStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Destroy a manifold handle.
///
/// # Safety
/// `manifold` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slowfast_manifold_free(manifold: *mut SlowfastManifold) {
    if !manifold.is_null() {
        drop(Box::from_raw(manifold));
    }
}

unsafe fn series_string(manifold: *const SlowfastManifold, pick_k: bool) -> *mut c_char {
    if manifold.is_null() {
        return std::ptr::null_mut();
    }
    let cm = &(*manifold).inner;
    let text = if pick_k {
        cm.k.to_string()
    } else {
        cm.h.to_string()
    };
    match CString::new(text) {
        Ok(s) => s.into_raw(),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Render the `y = h(x, l1, e)` series; free with [`slowfast_string_free`].
///
/// # Safety
/// `manifold` must be a live manifold handle.
#[no_mangle]
pub unsafe extern "C" fn slowfast_manifold_h_string(
    manifold: *const SlowfastManifold,
) -> *mut c_char {
    series_string(manifold, false)
}

/// Render the `l2 = k(x, l1, e)` series; free with [`slowfast_string_free`].
///
/// # Safety
/// `manifold` must be a live manifold handle.
#[no_mangle]
pub unsafe extern "C" fn slowfast_manifold_k_string(
    manifold: *const SlowfastManifold,
) -> *mut c_char {
    series_string(manifold, true)
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must come from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slowfast_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn find_rat(model: &CoreModel, x: f64) -> Option<Rat> {
    model.equilibrium_near(x, 1e-9).map(|eq| eq.x.clone())
}

/// Exact singular action between the adjacent equilibria nearest to
/// `from_x` (a sink) and `to_x` (a saddle).
///
/// # Safety
/// `model` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slowfast_singular_action(
    model: *const SlowfastModel,
    from_x: f64,
    to_x: f64,
    out: *mut f64,
) -> SlowfastStatus {
    if model.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    run_guarded(|| {
        let (Some(from), Some(to)) = (find_rat(model, from_x), find_rat(model, to_x)) else {
            set_error("endpoint is not an equilibrium of the model");
            return SlowfastStatus::InvalidArgument;
        };
        match path::singular_action(model, &from, &to) {
            Ok(r) => {
                *out = r.to_f64().unwrap_or(f64::NAN);
                SlowfastStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Escape action along the reduced heteroclinic connection at timescale
/// ratio `epsilon` (launch offset `delta`), between the default pair.
/// Writes the action, the closest-approach miss and the max |H| diagnostic.
///
/// # Safety
/// Handles must be live; out-pointers writable (may be null to skip).
#[no_mangle]
pub unsafe extern "C" fn slowfast_reduced_action(
    model: *const SlowfastModel,
    manifold: *const SlowfastManifold,
    epsilon: f64,
    delta: f64,
    out_action: *mut f64,
    out_miss: *mut f64,
    out_h_drift: *mut f64,
) -> SlowfastStatus {
    if model.is_null() || manifold.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    let cm = &(*manifold).inner;
    run_guarded(
        || match path::reduced_heteroclinic(model, cm, epsilon, delta) {
            Ok(p) => {
                if !out_action.is_null() {
                    *out_action = p.action;
                }
                if !out_miss.is_null() {
                    *out_miss = p.miss_distance;
                }
                if !out_h_drift.is_null() {
                    *out_h_drift = p.hamiltonian_drift;
                }
                SlowfastStatus::Ok
            }
            Err(e) => fail(e),
        },
    )
}

/// Escape action along the full 4-D connection (series-free; valid at any
/// `epsilon` in (0, 0.5]).
///
/// # Safety
/// `model` must be a live handle; out-pointers writable (may be null).
#[no_mangle]
pub unsafe extern "C" fn slowfast_full_action(
    model: *const SlowfastModel,
    epsilon: f64,
    out_action: *mut f64,
    out_miss: *mut f64,
    out_h_drift: *mut f64,
) -> SlowfastStatus {
    if model.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    run_guarded(|| match path::full_heteroclinic(model, epsilon) {
        Ok(c) => {
            if !out_action.is_null() {
                *out_action = c.action;
            }
            if !out_miss.is_null() {
                *out_miss = c.endpoint_miss;
            }
            if !out_h_drift.is_null() {
                *out_h_drift = c.hamiltonian_drift;
            }
            SlowfastStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Fit the `e^2` coefficient of the action series over a grid of timescale
/// ratios (each in (0, 0.2], at least 4 points).
///
/// # Safety
/// Handles must be live; `eps_grid` must address `n_eps` doubles.
#[no_mangle]
pub unsafe extern "C" fn slowfast_eps2_coefficient(
    model: *const SlowfastModel,
    manifold: *const SlowfastManifold,
    eps_grid: *const f64,
    n_eps: usize,
    delta: f64,
    out: *mut f64,
) -> SlowfastStatus {
    if model.is_null() || manifold.is_null() || eps_grid.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    let cm = &(*manifold).inner;
    let grid = std::slice::from_raw_parts(eps_grid, n_eps);
    run_guarded(|| match path::eps2_coefficient(model, cm, grid, delta) {
        Ok(c2) => {
            *out = c2;
            SlowfastStatus::Ok
        }
        Err(e) => fail(e),
    })
}

/// Base-10 slope of `log T_S` versus `1/D` implied by an action.
#[no_mangle]
pub extern "C" fn slowfast_predict_cs(action: f64) -> f64 {
    analysis::predict_cs(action)
}

/// Run an escape-time ensemble with the drift-implicit scheme between the
/// default sink-saddle pair, using the model's `epsilon` and `D`. Trials
/// derive independent RNG streams from `(master_seed, trial)`, so results
/// are reproducible for any parallelism.
///
/// # Safety
/// `model` must be a live handle; out-pointers writable (may be null).
#[no_mangle]
pub unsafe extern "C" fn slowfast_mfpt(
    model: *const SlowfastModel,
    n_trials: u64,
    master_seed: u64,
    nu: f64,
    t_max: f64,
    out_mean: *mut f64,
    out_std: *mut f64,
    out_timeouts: *mut u64,
) -> SlowfastStatus {
    if model.is_null() {
        set_error("null pointer argument");
        return SlowfastStatus::NullPointer;
    }
    let model = &(*model).inner;
    run_guarded(|| {
        let config = sde::IntegratorConfig {
            nu,
            ..Default::default()
        };
        if let Err(e) = config.validate() {
            return fail(e);
        }
        match sde::run_ensemble(model, &config, n_trials, master_seed, t_max) {
            Ok(ens) => {
                if !out_mean.is_null() {
                    *out_mean = ens.mean_t;
                }
                if !out_std.is_null() {
                    *out_std = ens.std_t;
                }
                if !out_timeouts.is_null() {
                    *out_timeouts = ens.timeout_count;
                }
                SlowfastStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_models_round_trip() {
        let m = slowfast_model_duffing(0.1, 0.05);
        assert!(!m.is_null());
        let mut r = f64::NAN;
        let status = unsafe { slowfast_singular_action(m, -1.0, 0.0, &mut r) };
        assert_eq!(status, SlowfastStatus::Ok);
        assert_eq!(r, 0.5);
        unsafe { slowfast_model_free(m) };

        let a = slowfast_model_asymmetric(0.1, 0.05);
        let status = unsafe { slowfast_singular_action(a, -1.0, 0.0, &mut r) };
        assert_eq!(status, SlowfastStatus::Ok);
        assert!((r - 5.0 / 6.0).abs() < 1e-15);
        unsafe { slowfast_model_free(a) };
    }

    #[test]
    fn manifold_strings_render() {
        let m = slowfast_model_duffing(0.1, 0.05);
        let mut cm: *mut SlowfastManifold = std::ptr::null_mut();
        let status = unsafe { slowfast_manifold_solve(m, 4, &mut cm) };
        assert_eq!(status, SlowfastStatus::Ok);
        let h = unsafe { slowfast_manifold_h_string(cm) };
        let text = unsafe { std::ffi::CStr::from_ptr(h) }
            .to_str()
            .unwrap()
            .to_string();
        assert_eq!(
            text,
            "x - x^3 - (x + l1 - 4x^3 - 3x^2*l1)*e + (2x + l1)*e^2 - (5x + 2l1)*e^3"
        );
        unsafe {
            slowfast_string_free(h);
            slowfast_manifold_free(cm);
            slowfast_model_free(m);
        }
    }

    #[test]
    fn error_paths_set_messages() {
        let mut out: *mut SlowfastManifold = std::ptr::null_mut();
        let status = unsafe { slowfast_manifold_solve(std::ptr::null(), 5, &mut out) };
        assert_eq!(status, SlowfastStatus::NullPointer);

        let m = slowfast_model_duffing(0.1, 0.05);
        let status = unsafe { slowfast_manifold_solve(m, 0, &mut out) };
        assert_eq!(status, SlowfastStatus::InvalidArgument);
        let mut buf = vec![0i8; 256];
        let len = unsafe { slowfast_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(len > 0);
        let msg = unsafe { std::ffi::CStr::from_ptr(buf.as_ptr()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("grade cap"), "{msg}");

        let mut r = 0.0;
        let status = unsafe { slowfast_singular_action(m, -0.37, 0.0, &mut r) };
        assert_eq!(status, SlowfastStatus::InvalidArgument);
        unsafe { slowfast_model_free(m) };
    }

    #[test]
    fn custom_model_validates() {
        // f = 2x + x^2 - x^3 with its equilibria, passed as rational pairs.
        let nums = [0i64, 2, 1, -1];
        let dens = [1i64, 1, 1, 1];
        let eq_n = [-1i64, 0, 2];
        let eq_d = [1i64, 1, 1];
        let sink = [1u8, 0, 1];
        let mut m: *mut SlowfastModel = std::ptr::null_mut();
        let status = unsafe {
            slowfast_model_custom(
                nums.as_ptr(),
                dens.as_ptr(),
                4,
                eq_n.as_ptr(),
                eq_d.as_ptr(),
                sink.as_ptr(),
                3,
                0.1,
                0.05,
                &mut m,
            )
        };
        assert_eq!(status, SlowfastStatus::Ok);
        let mut r = 0.0;
        unsafe { slowfast_singular_action(m, -1.0, 0.0, &mut r) };
        assert!((r - 5.0 / 6.0).abs() < 1e-15);
        unsafe { slowfast_model_free(m) };

        // Mislabeled stability is rejected.
        let bad_sink = [0u8, 1, 1];
        let status = unsafe {
            slowfast_model_custom(
                nums.as_ptr(),
                dens.as_ptr(),
                4,
                eq_n.as_ptr(),
                eq_d.as_ptr(),
                bad_sink.as_ptr(),
                3,
                0.1,
                0.05,
                &mut m,
            )
        };
        assert_eq!(status, SlowfastStatus::InvalidArgument);
    }

    #[test]
    fn actions_and_prediction_through_the_abi() {
        let m = slowfast_model_duffing(0.05, 0.05);
        let mut cm: *mut SlowfastManifold = std::ptr::null_mut();
        assert_eq!(
            unsafe { slowfast_manifold_solve(m, 12, &mut cm) },
            SlowfastStatus::Ok
        );
        let (mut r_red, mut miss, mut drift) = (0.0, 0.0, 0.0);
        let status = unsafe {
            slowfast_reduced_action(m, cm, 0.05, 1e-4, &mut r_red, &mut miss, &mut drift)
        };
        assert_eq!(status, SlowfastStatus::Ok);
        let mut r_full = 0.0;
        let status = unsafe {
            slowfast_full_action(
                m,
                0.05,
                &mut r_full,
                std::ptr::null_mut(),
                std::ptr::null_mut(),
            )
        };
        assert_eq!(status, SlowfastStatus::Ok);
        assert!((r_red - r_full).abs() < 1e-4, "{r_red} vs {r_full}");
        assert!(miss < 1e-6);

        let cs = slowfast_predict_cs(0.25);
        assert!((cs - 0.054287).abs() < 1e-6);
        unsafe {
            slowfast_manifold_free(cm);
            slowfast_model_free(m);
        }
    }

    #[test]
    fn mfpt_is_reproducible() {
        let m = slowfast_model_duffing(0.1, 0.05);
        let run = || {
            let (mut mean, mut std, mut timeouts) = (0.0, 0.0, 0u64);
            let status =
                unsafe { slowfast_mfpt(m, 12, 31, 0.01, 1e6, &mut mean, &mut std, &mut timeouts) };
            assert_eq!(status, SlowfastStatus::Ok);
            (mean, std, timeouts)
        };
        assert_eq!(run(), run());
        unsafe { slowfast_model_free(m) };
    }
}
