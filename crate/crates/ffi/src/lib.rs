//! C ABI over `blockade_ghz`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Every fallible call returns a [`BgStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`bg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blockade_ghz::config::RunConfig;
use blockade_ghz::hamiltonian::oracle_check;
use blockade_ghz::propagator::{self, DecayParams};
use blockade_ghz::protocols::{self, ProtocolResult, RunOptions};
use blockade_ghz::pulses::make_w_schedule;
use blockade_ghz::symbasis::{collective_state, CollectiveLabel, StateVector, SymmetricBasis};
use blockade_ghz::Error;
use num_complex::Complex64;

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Regime = 4,
    Numerical = 5,
    Io = 6,
    OracleViolation = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Collective basis state selector for [`bg_state_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BgLabel {
    /// `|a^N>`.
    AllA = 0,
    /// `|b^N>`.
    AllB = 1,
    /// Ground manifold with `m` atoms in `b`.
    Ground = 2,
    /// One Rydberg excitation with `m` atoms in `b`.
    Rydberg = 3,
}

/// Parsed run configuration.
pub struct BgConfig(RunConfig);

/// State vector in the symmetric basis.
pub struct BgState(StateVector);

/// Outcome of a GHZ run.
pub struct BgGhzResult(ProtocolResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> BgStatus {
    match err {
        Error::InvalidArgument(_) | Error::OutOfRange { .. } | Error::OracleTooLarge { .. } => {
            BgStatus::InvalidArgument
        }
        Error::Config(_) => BgStatus::Config,
        Error::Regime(_) => BgStatus::Regime,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => BgStatus::Io,
        _ => BgStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), BgStatus>) -> BgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BgStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside blockade_ghz");
            BgStatus::Panic
        }
    }
}

fn check<T>(r: blockade_ghz::Result<T>) -> Result<T, BgStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, BgStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(BgStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        BgStatus::InvalidArgument
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, BgStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        BgStatus::NullPointer
    })
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), BgStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(BgStatus::NullPointer);
    }
    Ok(())
}

fn options(cfg: &RunConfig, keep: bool) -> Result<RunOptions, BgStatus> {
    Ok(RunOptions {
        integrator: cfg.integrator,
        decay: check(DecayParams::new(cfg.gamma_t))?,
        keep_trajectories: keep,
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_config_from_toml(toml: *const c_char, out: *mut *mut BgConfig) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let cfg = check(RunConfig::from_toml(text(toml)?))?;
        *out = Box::into_raw(Box::new(BgConfig(cfg)));
        Ok(())
    })
}

/// Loads one of the bundled presets (`fig2`, `fig3_top`, `fig3_bottom`, `fig4`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_config_preset(name: *const c_char, out: *mut *mut BgConfig) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let cfg = check(RunConfig::preset(text(name)?))?;
        *out = Box::into_raw(Box::new(BgConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bg_config_free(config: *mut BgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Number of atoms of a configuration, 0 for a null handle.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bg_config_n_atoms(config: *const BgConfig) -> usize {
    config.as_ref().map_or(0, |c| c.0.n_atoms)
}

/// Collective basis state of `n_atoms` atoms. `m` is ignored for
/// `AllA` and `AllB`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bg_state_new(n_atoms: usize, label: BgLabel, m: usize, out: *mut *mut BgState) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let basis = check(SymmetricBasis::new(n_atoms))?;
        let label = match label {
            BgLabel::AllA => CollectiveLabel::AllA,
            BgLabel::AllB => CollectiveLabel::AllB,
            BgLabel::Ground => CollectiveLabel::G(m),
            BgLabel::Rydberg => CollectiveLabel::R(m),
        };
        let s = check(collective_state(basis, label))?;
        *out = Box::into_raw(Box::new(BgState(s)));
        Ok(())
    })
}

/// State from interleaved `(re, im)` pairs in storage order
/// `g_0 .. g_N, r_0 .. r_{N-1}`; `len` counts doubles and must be `2 (2N + 1)`.
///
/// # Safety
/// `amplitudes` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bg_state_from_amplitudes(
    n_atoms: usize,
    amplitudes: *const f64,
    len: usize,
    out: *mut *mut BgState,
) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        if amplitudes.is_null() {
            set_error("null amplitude buffer");
            return Err(BgStatus::NullPointer);
        }
        let basis = check(SymmetricBasis::new(n_atoms))?;
        if len != 2 * basis.dim() {
            set_error(format!("expected {} doubles, got {len}", 2 * basis.dim()));
            return Err(BgStatus::InvalidArgument);
        }
        let raw = std::slice::from_raw_parts(amplitudes, len);
        let amps = raw.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let s = check(StateVector::from_amplitudes(basis, amps))?;
        *out = Box::into_raw(Box::new(BgState(s)));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bg_state_free(state: *mut BgState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Basis dimension `2N + 1`, 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bg_state_dim(state: *const BgState) -> usize {
    state.as_ref().map_or(0, |s| s.0.basis().dim())
}

/// Copies populations in storage order into `buf`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bg_state_populations(state: *const BgState, buf: *mut f64, len: usize) -> BgStatus {
    guard(|| {
        let s = deref(state)?;
        let pops = s.0.populations();
        if buf.is_null() {
            set_error("null output buffer");
            return Err(BgStatus::NullPointer);
        }
        if len < pops.len() {
            set_error(format!("buffer holds {len} values, need {}", pops.len()));
            return Err(BgStatus::BufferTooSmall);
        }
        std::slice::from_raw_parts_mut(buf, pops.len()).copy_from_slice(&pops);
        Ok(())
    })
}

/// Copies amplitudes as interleaved `(re, im)` pairs into `buf`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn bg_state_amplitudes(state: *const BgState, buf: *mut f64, len: usize) -> BgStatus {
    guard(|| {
        let s = deref(state)?;
        let amps = s.0.amplitudes();
        if buf.is_null() {
            set_error("null output buffer");
            return Err(BgStatus::NullPointer);
        }
        if len < 2 * amps.len() {
            set_error(format!("buffer holds {len} values, need {}", 2 * amps.len()));
            return Err(BgStatus::BufferTooSmall);
        }
        let dst = std::slice::from_raw_parts_mut(buf, 2 * amps.len());
        for (d, a) in dst.chunks_mut(2).zip(amps) {
            d[0] = a.re;
            d[1] = a.im;
        }
        Ok(())
    })
}

/// Propagates `state` through the Gaussian pulse pair described by the
/// top-level parameters of `config` and returns the final state, which
/// carries the no-decay amplitude when `gamma_T > 0`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bg_propagate_pulse_pair(
    config: *const BgConfig,
    state: *const BgState,
    out: *mut *mut BgState,
) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let cfg = &deref(config)?.0;
        let s = &deref(state)?.0;
        let pulses = check(make_w_schedule(
            cfg.omega_m_t,
            1.0,
            cfg.tau_over_t,
            cfg.delta_t,
            cfg.order,
        ))?;
        let opts = options(cfg, false)?;
        let end = check(propagator::propagate_final(
            s,
            &pulses,
            pulses.window(),
            &opts.integrator,
            opts.decay,
        ))?;
        *out = Box::into_raw(Box::new(BgState(end)));
        Ok(())
    })
}

/// Runs the three-step GHZ sequence for `config`.
///
/// # Safety
/// `config` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bg_ghz_run(config: *const BgConfig, out: *mut *mut BgGhzResult) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let cfg = &deref(config)?.0;
        let opts = options(cfg, false)?;
        let r = check(protocols::ghz_protocol(cfg.n_atoms, &cfg.ghz_params(), &opts))?;
        *out = Box::into_raw(Box::new(BgGhzResult(r)));
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bg_ghz_free(result: *mut BgGhzResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// GHZ fidelity and branch phase of a finished run.
///
/// # Safety
/// `result` must be live; `fidelity` and `phase` may each be null.
#[no_mangle]
pub unsafe extern "C" fn bg_ghz_fidelity(result: *const BgGhzResult, fidelity: *mut f64, phase: *mut f64) -> BgStatus {
    guard(|| {
        let r = &deref(result)?.0;
        if let Some(f) = fidelity.as_mut() {
            *f = r.summary.ghz_fidelity;
        }
        if let Some(p) = phase.as_mut() {
            *p = r.summary.ghz_phase;
        }
        Ok(())
    })
}

/// Final state of a finished run as a new handle.
///
/// # Safety
/// `result` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bg_ghz_final_state(result: *const BgGhzResult, out: *mut *mut BgState) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let r = &deref(result)?.0;
        *out = Box::into_raw(Box::new(BgState(r.final_state.clone())));
        Ok(())
    })
}

/// JSON summary of a finished run; free with [`bg_string_free`].
///
/// # Safety
/// `result` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn bg_ghz_summary_json(result: *const BgGhzResult, out: *mut *mut c_char) -> BgStatus {
    guard(|| {
        out_ptr(out)?;
        let r = &deref(result)?.0;
        let json = check(r.to_json())?;
        *out = CString::new(json).map_err(|_| BgStatus::Io)?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn bg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Compares the chain Hamiltonian with the blockade-projected full-space
/// Hamiltonian for `draws` random field values per atom number. Returns
/// `OracleViolation` when an entry differs by more than 1e-12.
///
/// # Safety
/// `atoms` must point to `n` values; `max_deviation` may be null.
#[no_mangle]
pub unsafe extern "C" fn bg_oracle_check(
    atoms: *const usize,
    n: usize,
    draws: usize,
    seed: u64,
    max_deviation: *mut f64,
) -> BgStatus {
    guard(|| {
        if atoms.is_null() {
            set_error("null atom list");
            return Err(BgStatus::NullPointer);
        }
        let list = std::slice::from_raw_parts(atoms, n);
        let report = check(oracle_check(list, draws, seed, None))?;
        if let Some(d) = max_deviation.as_mut() {
            *d = report.max_deviation;
        }
        if !report.passed() {
            set_error(format!(
                "oracle deviation {:e} at {:?}",
                report.max_deviation, report.worst_entry
            ));
            return Err(BgStatus::OracleViolation);
        }
        Ok(())
    })
}
