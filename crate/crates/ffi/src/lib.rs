// Copyright 2026 The fdp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! C ABI over the fdp-lab library.
//!
//! Objects cross the boundary as opaque handles created by `fdp_*_new`
//! style constructors and released with the matching `*_free`. Every
//! fallible call returns an [`FdpStatus`]; on failure the message is kept
//! per thread and can be copied out with [`fdp_last_error`].
//!
//! Handles are not synchronized. Distinct handles may be used from
//! different threads; sharing one handle across threads needs outside
//! locking only if it is freed concurrently.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fdp_lab::estimators::{EstimatorSpec, WeightRule};
use fdp_lab::models::{AltModel, ScenarioConfig};
use fdp_lab::moments::c_coefficient;
use fdp_lab::procedures::{run_procedure, ProcedureSpec};
use fdp_lab::sample::PValueSample;
use fdp_lab::simulation::{check_identity, Identity, McOptions};
use fdp_lab::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSample = 3,
    InvalidProcedure = 4,
    InvalidScenario = 5,
    UnknownIdentity = 6,
    BufferTooSmall = 7,
    /// A Rust panic was caught at the boundary; report it as a bug.
    Internal = 99,
}

/// Family of the alternative p-value distribution of a scenario.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdpAltKind {
    /// Point mass at `param`; `param = 0` is the Dirac-uniform configuration.
    Dirac = 0,
    /// Uniform on `[0, param]`.
    Uniform = 1,
    /// `min(U, param)` for uniform `U`.
    MinUniform = 2,
}

/// Opaque step-up procedure.
pub struct FdpProcedure(ProcedureSpec);

/// Opaque labelled p-value vector.
pub struct FdpSample(PValueSample);

/// Opaque simulation scenario.
pub struct FdpScenario(ScenarioConfig);

/// Result of one step-up run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FdpOutcome {
    pub rejections: usize,
    pub false_rejections: usize,
    /// Largest critical value used, 0 when nothing is rejected.
    pub threshold: f64,
    /// Floored estimate of m0; NaN for non-adaptive procedures.
    pub m0_hat: f64,
    /// `false_rejections / rejections`, 0 when nothing is rejected.
    pub fdp: f64,
}

/// Monte-Carlo check of one identity.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FdpIdentityReport {
    pub lhs_mean: f64,
    pub rhs_mean: f64,
    pub mean_diff: f64,
    pub se: f64,
    pub z: f64,
    /// Nonzero when `|z|` is within the pass band.
    pub pass: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> FdpStatus {
    match err {
        Error::InvalidSample(_) | Error::LengthMismatch { .. } => FdpStatus::InvalidSample,
        Error::InvalidCriticalValues(_)
        | Error::LambdaOutOfRange { .. }
        | Error::InvalidEstimator(_)
        | Error::InvalidProcedure(_)
        | Error::MissingComponent(_) => FdpStatus::InvalidProcedure,
        Error::InvalidScenario(_) => FdpStatus::InvalidScenario,
        Error::UnknownIdentity(_) => FdpStatus::UnknownIdentity,
        Error::InvalidArgument(_) | Error::Calibration(_) => FdpStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (FdpStatus, String)>) -> FdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FdpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            FdpStatus::Internal
        }
    }
}

fn lib(err: Error) -> (FdpStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (FdpStatus, String) {
    (FdpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (FdpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, (FdpStatus, String)> {
    ptr.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, (FdpStatus, String)> {
    ptr.as_ref().ok_or_else(|| null(what))
}

fn new_procedure(spec: ProcedureSpec, out: *mut *mut FdpProcedure) -> Result<(), (FdpStatus, String)> {
    let out = unsafe { out_ref(out, "out")? };
    spec.validate().map_err(lib)?;
    *out = Box::into_raw(Box::new(FdpProcedure(spec)));
    Ok(())
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
#[no_mangle]
pub unsafe extern "C" fn fdp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fdp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Benjamini-Hochberg at level `alpha`.
#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_bh(alpha: f64, out: *mut *mut FdpProcedure) -> FdpStatus {
    guard(|| new_procedure(ProcedureSpec::Bh { alpha }, out))
}

/// Adaptive step-up with the Storey estimator at `lambda`.
#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_storey(alpha: f64, lambda: f64, out: *mut *mut FdpProcedure) -> FdpStatus {
    guard(|| new_procedure(ProcedureSpec::storey(alpha, lambda), out))
}

/// Adaptive step-up with a fixed-weight combination of Storey estimators.
///
/// `grid` holds `k + 1` increasing points starting at `lambda` and ending
/// at 1; `weights` holds `k` nonnegative weights summing to one.
#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_combination(
    alpha: f64,
    lambda: f64,
    grid: *const f64,
    grid_len: usize,
    weights: *const f64,
    weights_len: usize,
    out: *mut *mut FdpProcedure,
) -> FdpStatus {
    guard(|| {
        let grid = slice(grid, grid_len, "grid")?.to_vec();
        let weights = slice(weights, weights_len, "weights")?.to_vec();
        let estimator = EstimatorSpec::combination(grid, weights);
        new_procedure(ProcedureSpec::AdaptiveCapped { alpha, lambda, estimator }, out)
    })
}

/// As [`fdp_procedure_combination`] with the built-in data-driven weights.
#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_tail_adaptive(
    alpha: f64,
    lambda: f64,
    grid: *const f64,
    grid_len: usize,
    out: *mut *mut FdpProcedure,
) -> FdpStatus {
    guard(|| {
        let grid = slice(grid, grid_len, "grid")?.to_vec();
        let estimator = EstimatorSpec::IntervalCombination {
            grid,
            weights: WeightRule::TailAdaptive,
        };
        new_procedure(ProcedureSpec::AdaptiveCapped { alpha, lambda, estimator }, out)
    })
}

/// Step-up with critical values `i alpha / (m + b - a i)`.
#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_quotient(alpha: f64, a: f64, b: f64, out: *mut *mut FdpProcedure) -> FdpStatus {
    guard(|| new_procedure(ProcedureSpec::Quotient { alpha, a, b }, out))
}

#[no_mangle]
pub unsafe extern "C" fn fdp_procedure_free(procedure: *mut FdpProcedure) {
    if !procedure.is_null() {
        drop(Box::from_raw(procedure));
    }
}

/// Copies `m` p-values and their labels (nonzero = true null).
#[no_mangle]
pub unsafe extern "C" fn fdp_sample_new(
    values: *const f64,
    is_null: *const u8,
    m: usize,
    out: *mut *mut FdpSample,
) -> FdpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let values = slice(values, m, "values")?.to_vec();
        let labels = slice(is_null, m, "is_null")?.iter().map(|&b| b != 0).collect();
        let sample = PValueSample::new(values, labels).map_err(lib)?;
        *out = Box::into_raw(Box::new(FdpSample(sample)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdp_sample_free(sample: *mut FdpSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Runs `procedure` on `sample`.
///
/// When `rejected` is non-null the rejected indices (ascending, 0-based)
/// are written to it; `FDP_STATUS_BUFFER_TOO_SMALL` is returned if
/// `rejected_cap` is below the rejection count, with `out` still filled.
#[no_mangle]
pub unsafe extern "C" fn fdp_run(
    procedure: *const FdpProcedure,
    sample: *const FdpSample,
    out: *mut FdpOutcome,
    rejected: *mut usize,
    rejected_cap: usize,
) -> FdpStatus {
    guard(|| {
        let spec = &handle(procedure, "procedure")?.0;
        let sample = &handle(sample, "sample")?.0;
        let out = out_ref(out, "out")?;
        let res = run_procedure(spec, sample).map_err(lib)?;
        *out = FdpOutcome {
            rejections: res.r,
            false_rejections: res.v,
            threshold: res.threshold,
            m0_hat: res.m0_hat.unwrap_or(f64::NAN),
            fdp: res.fdp(),
        };
        if !rejected.is_null() {
            if rejected_cap < res.r {
                return Err((
                    FdpStatus::BufferTooSmall,
                    format!("{} rejections do not fit in {rejected_cap}", res.r),
                ));
            }
            std::ptr::copy_nonoverlapping(res.rejected.as_ptr(), rejected, res.r);
        }
        Ok(())
    })
}

/// Exact coefficient `C_{j,k}` of the moment expansion, `1 <= j <= k <= 20`.
#[no_mangle]
pub unsafe extern "C" fn fdp_c_coefficient(j: usize, k: usize, out: *mut u64) -> FdpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = c_coefficient(j, k).map_err(lib)?;
        Ok(())
    })
}

/// Scenario with `m` hypotheses, `m1` alternatives drawn from `alt`.
#[no_mangle]
pub unsafe extern "C" fn fdp_scenario_new(
    m: usize,
    m1: usize,
    alt: FdpAltKind,
    param: f64,
    seed: u64,
    out: *mut *mut FdpScenario,
) -> FdpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let alt = match alt {
            FdpAltKind::Dirac => AltModel::Dirac { c: param },
            FdpAltKind::Uniform => AltModel::Uniform { b: param },
            FdpAltKind::MinUniform => AltModel::MinUniform { x0: param },
        };
        let sc = ScenarioConfig::new(m, m1, alt, seed).map_err(lib)?;
        *out = Box::into_raw(Box::new(FdpScenario(sc)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fdp_scenario_free(scenario: *mut FdpScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Monte-Carlo check of the identity named `identity` ("fdr", "ev",
/// "moment_k2", "deterministic_k1", ...). `workers = 0` uses all cores;
/// the result does not depend on it.
#[no_mangle]
pub unsafe extern "C" fn fdp_check_identity(
    scenario: *const FdpScenario,
    procedure: *const FdpProcedure,
    identity: *const c_char,
    replicates: u64,
    workers: usize,
    out: *mut FdpIdentityReport,
) -> FdpStatus {
    guard(|| {
        let sc = &handle(scenario, "scenario")?.0;
        let spec = &handle(procedure, "procedure")?.0;
        let out = out_ref(out, "out")?;
        if identity.is_null() {
            return Err(null("identity"));
        }
        let name = CStr::from_ptr(identity)
            .to_str()
            .map_err(|_| (FdpStatus::InvalidArgument, "identity is not UTF-8".to_string()))?;
        let id: Identity = name.parse().map_err(lib)?;
        let mut options = McOptions::default();
        if workers > 0 {
            options = McOptions::with_workers(workers);
        }
        let rep = check_identity(id, sc, spec, replicates, &options).map_err(lib)?;
        *out = FdpIdentityReport {
            lhs_mean: rep.lhs.mean,
            rhs_mean: rep.rhs.mean,
            mean_diff: rep.mean_diff,
            se: rep.se,
            z: rep.z,
            pass: rep.pass as u8,
        };
        Ok(())
    })
}
