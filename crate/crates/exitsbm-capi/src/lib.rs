//! C ABI over the exitsbm library.
//!
//! Conventions:
//! * Every function returns an [`ExitsbmStatus`] code; results come back
//!   through out-pointers.
//! * Heap objects are opaque handles created by `*_new`-style constructors
//!   and released by the matching `*_free`; passing a handle to any other
//!   `*_free` is undefined behavior.
//! * All functions are panic-safe: a caught panic reports
//!   `EXITSBM_STATUS_INTERNAL` instead of unwinding across the boundary.
//!
//! The matching header lives at `include/exitsbm.h` (kept in sync by hand;
//! `cbindgen.toml` is provided for regeneration where cbindgen is available).

use exitsbm::channels::{self, LlrModel, SideInfoChannel};
use exitsbm::devo;
use exitsbm::exit;
use exitsbm::graphgen;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status codes returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitsbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalError = 3,
    Internal = 4,
}

/// Opaque side-information channel handle.
pub struct ExitsbmChannel {
    inner: SideInfoChannel,
}

/// Opaque density-evolution trace handle (either model).
pub struct ExitsbmDeTrace {
    states: Vec<f64>,
    predicted_error: Vec<f64>,
    fixed_point: f64,
    converged: bool,
}

fn status_of(err: &exitsbm::Error) -> ExitsbmStatus {
    match err {
        exitsbm::Error::InvalidParameter(_) | exitsbm::Error::Parse(_) => {
            ExitsbmStatus::InvalidArgument
        }
        exitsbm::Error::Numerical(_) | exitsbm::Error::Infeasible(_) => {
            ExitsbmStatus::NumericalError
        }
        _ => ExitsbmStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> ExitsbmStatus) -> ExitsbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => ExitsbmStatus::Internal,
    }
}

/// # Safety
/// `out` must be a valid pointer to writable memory for one pointer.
unsafe fn write_out<T>(out: *mut T, value: T) -> ExitsbmStatus {
    if out.is_null() {
        return ExitsbmStatus::NullPointer;
    }
    unsafe { out.write(value) };
    ExitsbmStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn exitsbm_version() -> *const std::os::raw::c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const std::os::raw::c_char
}

/// Builds the 3-symbol erasure/flip channel of the symmetric model.
///
/// # Safety
/// `out` must point to writable memory for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_channel_erasure_flip(
    epsilon: f64,
    alpha: f64,
    out: *mut *mut ExitsbmChannel,
) -> ExitsbmStatus {
    guarded(|| match channels::erasure_flip_channel(epsilon, alpha) {
        Ok(inner) => unsafe {
            write_out(out, Box::into_raw(Box::new(ExitsbmChannel { inner })))
        },
        Err(e) => status_of(&e),
    })
}

/// Builds the binary flip channel of the single-community model.
///
/// # Safety
/// `out` must point to writable memory for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_channel_binary_flip(
    alpha: f64,
    out: *mut *mut ExitsbmChannel,
) -> ExitsbmStatus {
    guarded(|| match channels::binary_flip_channel(alpha) {
        Ok(inner) => unsafe {
            write_out(out, Box::into_raw(Box::new(ExitsbmChannel { inner })))
        },
        Err(e) => status_of(&e),
    })
}

/// Releases a channel handle; NULL is a no-op.
///
/// # Safety
/// `ch` must be NULL or a live pointer from a channel constructor; it must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_channel_free(ch: *mut ExitsbmChannel) {
    if !ch.is_null() {
        drop(unsafe { Box::from_raw(ch) });
    }
}

/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_channel_alphabet_size(
    ch: *const ExitsbmChannel,
    out: *mut usize,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        unsafe { write_out(out, ch.inner.alphabet_size()) }
    })
}

/// LLR of a symbol; `half_log != 0` selects the symmetric-model convention,
/// otherwise the full-log single-model one.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_channel_llr(
    ch: *const ExitsbmChannel,
    symbol: usize,
    half_log: i32,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        let model = if half_log != 0 {
            LlrModel::SymmetricHalfLog
        } else {
            LlrModel::SingleFullLog
        };
        match ch.inner.llr_of(symbol, model) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => status_of(&e),
        }
    })
}

fn make_trace_handle(
    states: Vec<f64>,
    predicted_error: Vec<f64>,
    fixed_point: f64,
    converged: bool,
    out: *mut *mut ExitsbmDeTrace,
) -> ExitsbmStatus {
    unsafe {
        write_out(
            out,
            Box::into_raw(Box::new(ExitsbmDeTrace {
                states,
                predicted_error,
                fixed_point,
                converged,
            })),
        )
    }
}

/// Runs the symmetric-model density evolution `nu_{t+1} = mu^2/4 h(nu_t)`.
/// `tol = 0` forces exactly `t_max` iterations.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_symmetric(
    mu: f64,
    ch: *const ExitsbmChannel,
    t_max: usize,
    tol: f64,
    out: *mut *mut ExitsbmDeTrace,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        match devo::de_iterate_symmetric(mu, &ch.inner, t_max, tol) {
            Ok(tr) => make_trace_handle(tr.nu_seq, tr.predicted_error, tr.nu_bar, tr.converged, out),
            Err(e) => status_of(&e),
        }
    })
}

/// Runs the single-community density evolution with MAP threshold
/// `threshold_nu = ln((n-K)/K)`.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_single(
    lambda: f64,
    threshold_nu: f64,
    ch: *const ExitsbmChannel,
    t_max: usize,
    tol: f64,
    out: *mut *mut ExitsbmDeTrace,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        match devo::de_iterate_single(lambda, threshold_nu, &ch.inner, t_max, tol) {
            Ok(tr) => make_trace_handle(tr.v_seq, tr.predicted_error, tr.v_bar, tr.converged, out),
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `tr` must be NULL or a live trace handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_trace_free(tr: *mut ExitsbmDeTrace) {
    if !tr.is_null() {
        drop(unsafe { Box::from_raw(tr) });
    }
}

/// Number of states in the trace (t_max + 1 entries including state 0).
///
/// # Safety
/// `tr` must be a live trace handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_trace_len(
    tr: *const ExitsbmDeTrace,
    out: *mut usize,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(tr) = (unsafe { tr.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        unsafe { write_out(out, tr.states.len()) }
    })
}

/// Copies up to `cap` states (and, when non-NULL, matching per-state error
/// predictions) into caller buffers; writes the copied count to `written`.
///
/// # Safety
/// `tr` must be a live trace handle. `states` (and `errors` when non-NULL)
/// must point to at least `cap` writable doubles; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_trace_copy(
    tr: *const ExitsbmDeTrace,
    states: *mut f64,
    errors: *mut f64,
    cap: usize,
    written: *mut usize,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(tr) = (unsafe { tr.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        if states.is_null() || written.is_null() {
            return ExitsbmStatus::NullPointer;
        }
        let n = tr.states.len().min(cap);
        unsafe {
            std::ptr::copy_nonoverlapping(tr.states.as_ptr(), states, n);
            if !errors.is_null() {
                std::ptr::copy_nonoverlapping(tr.predicted_error.as_ptr(), errors, n);
            }
            write_out(written, n)
        }
    })
}

/// # Safety
/// `tr` must be a live trace handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_trace_fixed_point(
    tr: *const ExitsbmDeTrace,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(tr) = (unsafe { tr.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        unsafe { write_out(out, tr.fixed_point) }
    })
}

/// Writes 1 when the recursion met its tolerance before the iteration cap.
///
/// # Safety
/// `tr` must be a live trace handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_de_trace_converged(
    tr: *const ExitsbmDeTrace,
    out: *mut i32,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(tr) = (unsafe { tr.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        unsafe { write_out(out, i32::from(tr.converged)) }
    })
}

/// Asymptotic misclassification fraction of the symmetric model at state `nu`.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_residual_error_symmetric(
    nu: f64,
    ch: *const ExitsbmChannel,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        if !(nu >= 0.0) {
            return ExitsbmStatus::InvalidArgument;
        }
        unsafe { write_out(out, devo::residual_error_symmetric(nu, &ch.inner)) }
    })
}

/// Predicted `E|C-hat symdiff C*|/K` of the single model at state `v`.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_residual_error_single(
    v: f64,
    threshold_nu: f64,
    ch: *const ExitsbmChannel,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        if !(v >= 0.0) {
            return ExitsbmStatus::InvalidArgument;
        }
        unsafe {
            write_out(out, devo::residual_error_single(v, threshold_nu, &ch.inner))
        }
    })
}

/// Mutual information J(nu) in bits for the symmetric model.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_j_symmetric(
    nu: f64,
    ch: *const ExitsbmChannel,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        if !(nu >= 0.0) {
            return ExitsbmStatus::InvalidArgument;
        }
        unsafe { write_out(out, exit::j_symmetric(nu, &ch.inner)) }
    })
}

/// Mutual information J(v) in bits for the single model with community
/// fraction `k_frac`.
///
/// # Safety
/// `ch` must be a live channel handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_j_single(
    v: f64,
    k_frac: f64,
    ch: *const ExitsbmChannel,
    out: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let Some(ch) = (unsafe { ch.as_ref() }) else {
            return ExitsbmStatus::NullPointer;
        };
        if !(v >= 0.0) || !(k_frac > 0.0 && k_frac < 1.0) {
            return ExitsbmStatus::InvalidArgument;
        }
        unsafe { write_out(out, exit::j_single(v, k_frac, &ch.inner)) }
    })
}

/// One-shot simulation: samples a symmetric SBM with side information, runs
/// BP for `t` rounds, and writes the raw misclassification fraction.
///
/// # Safety
/// `out_error` must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn exitsbm_bp_simulate_symmetric(
    n: usize,
    a: f64,
    b: f64,
    epsilon: f64,
    alpha: f64,
    t: usize,
    seed: u64,
    out_error: *mut f64,
) -> ExitsbmStatus {
    guarded(|| {
        let run = || -> exitsbm::Result<f64> {
            let params = graphgen::SymmetricSbmParams::new(n, a, b)?;
            let channel = channels::erasure_flip_channel(epsilon, alpha)?;
            let (graph, labels) = graphgen::sample_symmetric_sbm(&params, seed);
            let symbols = channel.sample_side_info(&labels, seed ^ 0x51de);
            let spec = channel.llr_spec(LlrModel::SymmetricHalfLog);
            let h: Vec<f64> = symbols.iter().map(|&s| spec.values[s as usize]).collect();
            let state = exitsbm::bp::run_bp_symmetric(&graph, &h, params.beta(), t)?;
            let est = exitsbm::bp::estimate_symmetric(&state.beliefs);
            Ok(exitsbm::bp::misclassification_rate(&est, &labels).raw)
        };
        match run() {
            Ok(v) => unsafe { write_out(out_error, v) },
            Err(e) => status_of(&e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_lifecycle_and_llr() {
        unsafe {
            let mut ch: *mut ExitsbmChannel = std::ptr::null_mut();
            let st = exitsbm_channel_erasure_flip(1.0, 0.1, &mut ch);
            assert_eq!(st, ExitsbmStatus::Ok);
            let mut m = 0usize;
            assert_eq!(exitsbm_channel_alphabet_size(ch, &mut m), ExitsbmStatus::Ok);
            assert_eq!(m, 3);
            let mut llr = 0.0;
            assert_eq!(exitsbm_channel_llr(ch, 0, 1, &mut llr), ExitsbmStatus::Ok);
            assert!((llr - 0.5 * (9.0f64).ln()).abs() < 1e-14);
            assert_eq!(
                exitsbm_channel_llr(ch, 9, 1, &mut llr),
                ExitsbmStatus::InvalidArgument
            );
            exitsbm_channel_free(ch);
        }
    }

    #[test]
    fn invalid_parameters_report_status() {
        unsafe {
            let mut ch: *mut ExitsbmChannel = std::ptr::null_mut();
            assert_eq!(
                exitsbm_channel_erasure_flip(1.5, 0.1, &mut ch),
                ExitsbmStatus::InvalidArgument
            );
            assert_eq!(
                exitsbm_channel_binary_flip(0.0, &mut ch),
                ExitsbmStatus::InvalidArgument
            );
            assert_eq!(
                exitsbm_channel_erasure_flip(0.5, 0.1, std::ptr::null_mut()),
                ExitsbmStatus::NullPointer
            );
        }
    }

    #[test]
    fn de_trace_matches_library() {
        unsafe {
            let mut ch: *mut ExitsbmChannel = std::ptr::null_mut();
            assert_eq!(
                exitsbm_channel_erasure_flip(1.0, 0.1, &mut ch),
                ExitsbmStatus::Ok
            );
            let mut tr: *mut ExitsbmDeTrace = std::ptr::null_mut();
            assert_eq!(
                exitsbm_de_symmetric(2.0, ch, 20, 0.0, &mut tr),
                ExitsbmStatus::Ok
            );
            let mut len = 0usize;
            assert_eq!(exitsbm_de_trace_len(tr, &mut len), ExitsbmStatus::Ok);
            assert_eq!(len, 21);
            let mut states = vec![0.0f64; len];
            let mut errors = vec![0.0f64; len];
            let mut written = 0usize;
            assert_eq!(
                exitsbm_de_trace_copy(tr, states.as_mut_ptr(), errors.as_mut_ptr(), len, &mut written),
                ExitsbmStatus::Ok
            );
            assert_eq!(written, len);
            assert_eq!(states[0], 0.0);
            assert!((states[1] - 0.64).abs() < 1e-12);

            let reference = devo::de_iterate_symmetric(
                2.0,
                &channels::erasure_flip_channel(1.0, 0.1).unwrap(),
                20,
                0.0,
            )
            .unwrap();
            for (a, b) in states.iter().zip(&reference.nu_seq) {
                assert_eq!(a, b);
            }
            let mut fp = 0.0;
            assert_eq!(exitsbm_de_trace_fixed_point(tr, &mut fp), ExitsbmStatus::Ok);
            assert_eq!(fp, reference.nu_bar);
            exitsbm_de_trace_free(tr);
            exitsbm_channel_free(ch);
        }
    }

    #[test]
    fn j_and_residual_values() {
        unsafe {
            let mut ch: *mut ExitsbmChannel = std::ptr::null_mut();
            assert_eq!(
                exitsbm_channel_erasure_flip(1.0, 0.1, &mut ch),
                ExitsbmStatus::Ok
            );
            let mut j = 0.0;
            assert_eq!(exitsbm_j_symmetric(0.0, ch, &mut j), ExitsbmStatus::Ok);
            assert!((j - 0.531_004_406_410_718_8).abs() < 1e-12);
            let mut e = 0.0;
            assert_eq!(
                exitsbm_residual_error_symmetric(0.0, ch, &mut e),
                ExitsbmStatus::Ok
            );
            assert!((e - 0.1).abs() < 1e-12); // eps alpha + (1-eps)/2 at eps=1
            assert_eq!(
                exitsbm_residual_error_symmetric(-1.0, ch, &mut e),
                ExitsbmStatus::InvalidArgument
            );
            exitsbm_channel_free(ch);
        }
    }

    #[test]
    fn single_model_surface() {
        unsafe {
            let mut ch: *mut ExitsbmChannel = std::ptr::null_mut();
            assert_eq!(exitsbm_channel_binary_flip(0.4, &mut ch), ExitsbmStatus::Ok);
            let nu = (9.0f64).ln();
            let mut tr: *mut ExitsbmDeTrace = std::ptr::null_mut();
            let lambda = 2.0 / (3.0 * std::f64::consts::E);
            assert_eq!(
                exitsbm_de_single(lambda, nu, ch, 500, 1e-12, &mut tr),
                ExitsbmStatus::Ok
            );
            let mut conv = 0i32;
            assert_eq!(exitsbm_de_trace_converged(tr, &mut conv), ExitsbmStatus::Ok);
            assert_eq!(conv, 1);
            let mut fp = 0.0;
            exitsbm_de_trace_fixed_point(tr, &mut fp);
            assert!((fp - 0.313_07).abs() < 1e-3);
            let mut j = 0.0;
            assert_eq!(exitsbm_j_single(fp, 0.1, ch, &mut j), ExitsbmStatus::Ok);
            assert!(j > 0.0 && j < 0.469);
            exitsbm_de_trace_free(tr);
            exitsbm_channel_free(ch);
        }
    }

    #[test]
    fn bp_simulation_roundtrip() {
        unsafe {
            let mut err = f64::NAN;
            let st = exitsbm_bp_simulate_symmetric(5000, 12.0, 4.0, 0.0, 0.3, 2, 7, &mut err);
            assert_eq!(st, ExitsbmStatus::Ok);
            assert!((err - 0.5).abs() < 0.05, "coin-flip regime, got {err}");
            // invalid rates surface as InvalidArgument
            let st = exitsbm_bp_simulate_symmetric(100, 4.0, 12.0, 0.5, 0.3, 2, 7, &mut err);
            assert_eq!(st, ExitsbmStatus::InvalidArgument);
        }
    }

    #[test]
    fn version_is_nul_terminated() {
        let p = exitsbm_version();
        let s = unsafe { std::ffi::CStr::from_ptr(p) };
        assert!(!s.to_str().unwrap().is_empty());
    }
}
