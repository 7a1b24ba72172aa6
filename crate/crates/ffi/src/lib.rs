//! C ABI over `ciss_nv`.
//!
//! All quantities cross the boundary in SI units: seconds, metres, tesla,
//! rad/s, molecules per m². Every fallible entry point returns a
//! [`CissStatus`]; on failure [`ciss_last_error`] describes the cause on
//! the calling thread. Handles are opaque and must be released with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ciss_nv::engine::{decoupling_sweep, Decoupling, PairSystem, SweepResult};
use ciss_nv::hamiltonians::{GFactorPair, RadicalPairGeometry};
use ciss_nv::odmr::{simulate_odmr, OdmrSetup};
use ciss_nv::states::{make_initial_state, occupations, polarization, InitialStateParams, SpinState};
use ciss_nv::surface::{monolayer_shift_analytic, sample_anchor_density, SurfaceModel, Termination};
use ciss_nv::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CissStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Numerical = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CissSequence {
    Fslg = 0,
    Lg = 1,
    Off = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CissTermination {
    T001 = 0,
    T111 = 1,
}

/// Opaque radical-pair density matrix.
pub struct CissState(SpinState);

/// Opaque result of a decoupling sweep.
pub struct CissSweep(SweepResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> CissStatus {
    match err {
        Error::InvalidParameter { .. }
        | Error::UnsupportedSpin(_)
        | Error::StepTooLarge { .. }
        | Error::Empty(_)
        | Error::DimensionMismatch { .. } => CissStatus::InvalidParameter,
        _ => CissStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CissStatus>) -> CissStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CissStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            CissStatus::Panic
        }
    }
}

fn lib<T>(r: ciss_nv::Result<T>) -> Result<T, CissStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), CissStatus> {
    if p.is_null() {
        set_error(format!("`{name}` is null"));
        Err(CissStatus::NullPointer)
    } else {
        Ok(())
    }
}

/// Message for the most recent failure on this thread, or null.
///
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn ciss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds the radical-pair initial state from the mixing angle, phase and
/// coherence damping.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ciss_state_new(alpha: f64, beta: f64, lambda: f64, out: *mut *mut CissState) -> CissStatus {
    guard(|| {
        non_null(out, "out")?;
        let params = lib(InitialStateParams::new(alpha, beta, lambda))?;
        let state = lib(make_initial_state(params))?;
        *out = Box::into_raw(Box::new(CissState(state)));
        Ok(())
    })
}

/// Releases a state. Null is ignored.
///
/// # Safety
/// `state` must come from `ciss_state_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ciss_state_free(state: *mut CissState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes the occupations {T+, P_R, P_S, T-} into `out[0..4]`.
///
/// # Safety
/// `state` must be a live handle and `out` valid for four doubles.
#[no_mangle]
pub unsafe extern "C" fn ciss_state_occupations(state: *const CissState, out: *mut f64) -> CissStatus {
    guard(|| {
        non_null(state, "state")?;
        non_null(out, "out")?;
        let occ = lib(occupations(&(*state).0))?;
        slice::from_raw_parts_mut(out, 4).copy_from_slice(&occ.as_array());
        Ok(())
    })
}

/// Writes the polarization c_PR - c_PS.
///
/// # Safety
/// `state` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn ciss_state_polarization(state: *const CissState, out: *mut f64) -> CissStatus {
    guard(|| {
        non_null(state, "state")?;
        non_null(out, "out")?;
        *out = lib(polarization(&(*state).0))?;
        Ok(())
    })
}

/// Time-averaged observables of the pair for each amplitude in
/// `omega1[0..n]`, with the pair axis along the field.
///
/// # Safety
/// `state` must be a live handle, `omega1` valid for `n` doubles and `out`
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ciss_decoupling_sweep(
    state: *const CissState,
    separation: f64,
    bz: f64,
    delta_g_ppm: f64,
    sequence: CissSequence,
    omega1: *const f64,
    n: usize,
    total: f64,
    dt: f64,
    out: *mut *mut CissSweep,
) -> CissStatus {
    guard(|| {
        non_null(state, "state")?;
        non_null(omega1, "omega1")?;
        non_null(out, "out")?;
        let mut sys = PairSystem::new(lib(RadicalPairGeometry::along_field(separation))?);
        sys.bz = bz;
        sys.g = GFactorPair::from_delta_ppm(delta_g_ppm);
        let mode = match sequence {
            CissSequence::Fslg => Decoupling::Fslg,
            CissSequence::Lg => Decoupling::Lg,
            CissSequence::Off => Decoupling::Off,
        };
        let list = slice::from_raw_parts(omega1, n);
        let sweep = lib(decoupling_sweep(&(*state).0, &sys, mode, list, total, dt))?;
        *out = Box::into_raw(Box::new(CissSweep(sweep)));
        Ok(())
    })
}

/// Number of rows in a sweep, 0 for null.
///
/// # Safety
/// `sweep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ciss_sweep_len(sweep: *const CissSweep) -> usize {
    if sweep.is_null() {
        0
    } else {
        (*sweep).0.len()
    }
}

/// Time-averaged polarization of row `index`.
///
/// # Safety
/// `sweep` must be a live handle and `out` valid for one double.
#[no_mangle]
pub unsafe extern "C" fn ciss_sweep_pbar(sweep: *const CissSweep, index: usize, out: *mut f64) -> CissStatus {
    guard(|| {
        non_null(sweep, "sweep")?;
        non_null(out, "out")?;
        *out = *row(&(*sweep).0.pbar, index)?;
        Ok(())
    })
}

/// Time-averaged occupations of row `index` into `out[0..4]`.
///
/// # Safety
/// `sweep` must be a live handle and `out` valid for four doubles.
#[no_mangle]
pub unsafe extern "C" fn ciss_sweep_occupations(sweep: *const CissSweep, index: usize, out: *mut f64) -> CissStatus {
    guard(|| {
        non_null(sweep, "sweep")?;
        non_null(out, "out")?;
        let occ = row(&(*sweep).0.cbar, index)?;
        slice::from_raw_parts_mut(out, 4).copy_from_slice(&occ.as_array());
        Ok(())
    })
}

fn row<T>(v: &[T], index: usize) -> Result<&T, CissStatus> {
    v.get(index).ok_or_else(|| {
        set_error(format!("row {index} out of range (len {})", v.len()));
        CissStatus::OutOfRange
    })
}

/// Releases a sweep. Null is ignored.
///
/// # Safety
/// `sweep` must come from `ciss_decoupling_sweep` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ciss_sweep_free(sweep: *mut CissSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// ODMR contrast for a pair collinear with the NV axis, one value per
/// detuning in `detunings[0..n]` written to `contrast[0..n]`.
/// `omega1 = 0` switches decoupling off.
///
/// # Safety
/// `detunings` and `contrast` must be valid for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ciss_odmr_simulate(
    alpha: f64,
    beta: f64,
    lambda: f64,
    depth: f64,
    separation: f64,
    bz: f64,
    omega1: f64,
    pulse_duration: f64,
    detunings: *const f64,
    n: usize,
    contrast: *mut f64,
) -> CissStatus {
    guard(|| {
        non_null(detunings, "detunings")?;
        non_null(contrast, "contrast")?;
        let params = lib(InitialStateParams::new(alpha, beta, lambda))?;
        let mut setup = lib(OdmrSetup::collinear(depth, separation))?;
        setup.bz = bz;
        setup.omega1 = omega1;
        setup.pulse_duration = pulse_duration;
        let spec = lib(simulate_odmr(params, &setup, slice::from_raw_parts(detunings, n)))?;
        slice::from_raw_parts_mut(contrast, n).copy_from_slice(&spec.contrast);
        Ok(())
    })
}

/// Closed-form ensemble shift of a masked monolayer and its LG-scaled
/// value, rad/s.
///
/// # Safety
/// `shift` and `shift_lg` must be valid for one double each.
#[no_mangle]
pub unsafe extern "C" fn ciss_monolayer_shift(
    termination: CissTermination,
    depth: f64,
    mask_diameter: f64,
    linker: f64,
    separation: f64,
    rho_mol: f64,
    shift: *mut f64,
    shift_lg: *mut f64,
) -> CissStatus {
    guard(|| {
        non_null(shift, "shift")?;
        non_null(shift_lg, "shift_lg")?;
        let term = match termination {
            CissTermination::T001 => Termination::T001,
            CissTermination::T111 => Termination::T111,
        };
        let model = lib(SurfaceModel::new(
            term,
            depth,
            mask_diameter,
            linker,
            separation,
            rho_mol,
        ))?;
        let s = lib(monolayer_shift_analytic(&model))?;
        *shift = s.shift;
        *shift_lg = s.shift_lg;
        Ok(())
    })
}

/// Monte Carlo density of molecules kept after anchor exclusion.
///
/// # Safety
/// `mean` and `spread` must be valid for one double each.
#[no_mangle]
pub unsafe extern "C" fn ciss_anchor_density(
    rho_anchor: f64,
    d_min: f64,
    area: f64,
    trials: usize,
    seed: u64,
    mean: *mut f64,
    spread: *mut f64,
) -> CissStatus {
    guard(|| {
        non_null(mean, "mean")?;
        non_null(spread, "spread")?;
        let est = lib(sample_anchor_density(rho_anchor, d_min, area, trials, seed))?;
        *mean = est.mean;
        *spread = est.spread;
        Ok(())
    })
}
