//! C ABI over `chemlab`.
//!
//! Handles are opaque pointers created by `chemlab_config_parse`/`_load`,
//! `chemlab_simulate` and `chemlab_kinetics_prototype` and released by the matching `_free`. Every fallible call
//! returns a [`ChemlabStatus`]; the message of the last failure on the
//! calling thread is available from [`chemlab_last_error`]. Panics never
//! cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chemlab::config::{self, RunConfig};
use chemlab::simulator::{Outcome, RunResult};
use chemlab::{runner, Error, Kinetics};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemlabStatus {
    Ok = 0,
    NullPointer = 1,
    /// A parameter, configuration key or argument range was rejected.
    Invalid = 2,
    Runtime = 3,
    /// The run produced a non-finite state; no run handle is returned.
    Diverged = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemlabOutcome {
    Completed = 0,
    BlowupSuspected = 1,
    DtFloor = 2,
    Growing = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemlabField {
    U = 0,
    V = 1,
    W = 2,
    /// Cell centres.
    R = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemlabFunction {
    D = 0,
    S = 1,
    F = 2,
    G = 3,
    H = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ChemlabSummary {
    pub outcome: i32,
    pub t_final: f64,
    pub steps: u64,
    pub rejected: u64,
    pub min_dt: f64,
    pub sup_u_initial: f64,
    pub sup_u_final: f64,
    pub max_mass_drift: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_budget_residual: f64,
}

/// Parsed and validated run configuration.
pub struct ChemlabConfig(RunConfig);

/// Result of a completed integration.
pub struct ChemlabRun {
    result: RunResult,
    centers: Vec<f64>,
}

pub struct ChemlabKinetics(Kinetics);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ChemlabStatus {
    match e {
        Error::Diverged { .. } => ChemlabStatus::Diverged,
        Error::OutOfDomain { .. } => ChemlabStatus::Invalid,
        e if e.is_validation() => ChemlabStatus::Invalid,
        _ => ChemlabStatus::Runtime,
    }
}

enum Fail {
    Null(&'static str),
    Small(usize),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ChemlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChemlabStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            ChemlabStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("buffer too small, need {need} values"));
            ChemlabStatus::BufferTooSmall
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ChemlabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Lib(Error::Runtime(format!("{what} is not valid UTF-8"))))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn in_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn chemlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn chemlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a TOML configuration. Relative table paths resolve against the
/// working directory.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemlab_config_parse(text: *const c_char, out: *mut *mut ChemlabConfig) -> ChemlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config::parse_config(str_arg(text, "text")?, None)?;
        *out = Box::into_raw(Box::new(ChemlabConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemlab_config_load(path: *const c_char, out: *mut *mut ChemlabConfig) -> ChemlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = config::load_config(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(ChemlabConfig(cfg)));
        Ok(())
    })
}

/// Writes the 16-hex-digit run id plus NUL into `buf` (at least 17 bytes).
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn chemlab_config_run_id(cfg: *const ChemlabConfig, buf: *mut c_char, len: usize) -> ChemlabStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let id = cfg.0.run_id();
        if len < id.len() + 1 {
            return Err(Fail::Small(id.len() + 1));
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), buf, id.len());
        *buf.add(id.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chemlab_config_free(cfg: *mut ChemlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Initial energy of the configured data.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chemlab_initial_energy(cfg: *const ChemlabConfig, out: *mut f64) -> ChemlabStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        *out = runner::initial_energy(&cfg.0)?.1.energy;
        Ok(())
    })
}

/// Integrates the configuration. On `Diverged` no handle is produced.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chemlab_simulate(cfg: *const ChemlabConfig, out: *mut *mut ChemlabRun) -> ChemlabStatus {
    guard(|| {
        let cfg = in_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let result = runner::run(&cfg.0)?;
        let centers = cfg.0.grid()?.centers().to_vec();
        *out = Box::into_raw(Box::new(ChemlabRun { result, centers }));
        Ok(())
    })
}

/// Writes the run artifacts (timeseries, summary, profiles, plots) to `dir`.
///
/// # Safety
/// Pointers must be valid; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn chemlab_run_write(
    run: *const ChemlabRun,
    cfg: *const ChemlabConfig,
    dir: *const c_char,
) -> ChemlabStatus {
    guard(|| {
        let run = in_arg(run, "run")?;
        let cfg = in_arg(cfg, "cfg")?;
        runner::write_run(Path::new(str_arg(dir, "dir")?), &cfg.0, &run.result)?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chemlab_run_summary(run: *const ChemlabRun, out: *mut ChemlabSummary) -> ChemlabStatus {
    guard(|| {
        let s = &in_arg(run, "run")?.result.summary;
        let out = out_arg(out, "out")?;
        let outcome = match s.outcome {
            Outcome::Completed => ChemlabOutcome::Completed,
            Outcome::BlowupSuspected => ChemlabOutcome::BlowupSuspected,
            Outcome::DtFloor => ChemlabOutcome::DtFloor,
            Outcome::Growing => ChemlabOutcome::Growing,
        };
        *out = ChemlabSummary {
            outcome: outcome as i32,
            t_final: s.t_final,
            steps: s.steps,
            rejected: s.rejected,
            min_dt: s.min_dt,
            sup_u_initial: s.sup_u_initial,
            sup_u_final: s.sup_u_final,
            max_mass_drift: s.max_mass_drift,
            energy_initial: s.energy_initial,
            energy_final: s.energy_final,
            max_budget_residual: s.max_budget_residual,
        };
        Ok(())
    })
}

/// Number of cells; 0 for NULL.
///
/// # Safety
/// `run` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn chemlab_run_cells(run: *const ChemlabRun) -> usize {
    run.as_ref().map_or(0, |r| r.centers.len())
}

/// Copies one final profile into `buf`, which must hold `chemlab_run_cells`
/// values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chemlab_run_profile(
    run: *const ChemlabRun,
    field: ChemlabField,
    buf: *mut f64,
    len: usize,
) -> ChemlabStatus {
    guard(|| {
        let run = in_arg(run, "run")?;
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let st = &run.result.final_state;
        let src: &[f64] = match field {
            ChemlabField::U => &st.u,
            ChemlabField::V => &st.v,
            ChemlabField::W => &st.w,
            ChemlabField::R => &run.centers,
        };
        if len < src.len() {
            return Err(Fail::Small(src.len()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chemlab_run_free(run: *mut ChemlabRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Prototype law `D = K_D (s+1)^-alpha`, `S = k_S (s+1)^(beta-1) s`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemlab_kinetics_prototype(
    alpha: f64,
    beta: f64,
    k_diff: f64,
    k_sens: f64,
    out: *mut *mut ChemlabKinetics,
) -> ChemlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let k = Kinetics::prototype(alpha, beta, k_diff, k_sens)?;
        *out = Box::into_raw(Box::new(ChemlabKinetics(k)));
        Ok(())
    })
}

/// Evaluates `D`, `S`, `f`, `G` or `H` at `s >= 0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn chemlab_kinetics_eval(
    kin: *const ChemlabKinetics,
    which: ChemlabFunction,
    s: f64,
    out: *mut f64,
) -> ChemlabStatus {
    guard(|| {
        let k = &in_arg(kin, "kin")?.0;
        let out = out_arg(out, "out")?;
        *out = match which {
            ChemlabFunction::D => k.eval_d(s)?,
            ChemlabFunction::S => k.eval_s(s)?,
            ChemlabFunction::F => k.eval_f(s)?,
            ChemlabFunction::G => k.eval_g(s)?,
            ChemlabFunction::H => k.eval_h(s)?,
        };
        Ok(())
    })
}

/// # Safety
/// `kin` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chemlab_kinetics_free(kin: *mut ChemlabKinetics) {
    if !kin.is_null() {
        drop(Box::from_raw(kin));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = "[model]\nn = 2\nR = 1.0\nalpha = 0.0\nbeta = 0.5\n[grid]\ncells = 64\n[time]\nt_end = 0.05\n[init]\nm = 1.0\n\0";

    fn last_error() -> String {
        let p = chemlab_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn simulate_roundtrip() {
        unsafe {
            let mut cfg = ptr::null_mut();
            assert_eq!(chemlab_config_parse(CFG.as_ptr().cast(), &mut cfg), ChemlabStatus::Ok);
            let mut run = ptr::null_mut();
            assert_eq!(chemlab_simulate(cfg, &mut run), ChemlabStatus::Ok);
            let mut s = ChemlabSummary::default();
            assert_eq!(chemlab_run_summary(run, &mut s), ChemlabStatus::Ok);
            assert_eq!(s.outcome, ChemlabOutcome::Completed as i32);
            assert!((s.t_final - 0.05).abs() < 1e-12);
            let n = chemlab_run_cells(run);
            assert_eq!(n, 64);
            let mut u = vec![0.0; n];
            assert_eq!(chemlab_run_profile(run, ChemlabField::U, u.as_mut_ptr(), n), ChemlabStatus::Ok);
            assert!(u.iter().all(|x| *x > 0.0));
            assert_eq!(
                chemlab_run_profile(run, ChemlabField::U, u.as_mut_ptr(), n - 1),
                ChemlabStatus::BufferTooSmall
            );
            let mut id = [0 as c_char; 17];
            assert_eq!(chemlab_config_run_id(cfg, id.as_mut_ptr(), 17), ChemlabStatus::Ok);
            assert_eq!(CStr::from_ptr(id.as_ptr()).to_bytes().len(), 16);
            chemlab_run_free(run);
            chemlab_config_free(cfg);
        }
    }

    #[test]
    fn validation_error_names_key() {
        let bad = "[model]\nn = 4\nR = 1\nalpha = 1.2\nbeta = 0.3\n[init]\nm = 1\nfamily = \"critical4\"\nkappa = 0.9\n\0";
        unsafe {
            let mut cfg = ptr::null_mut();
            assert_eq!(chemlab_config_parse(bad.as_ptr().cast(), &mut cfg), ChemlabStatus::Invalid);
            assert!(cfg.is_null());
        }
        assert!(last_error().contains("init.kappa"), "{}", last_error());
    }

    #[test]
    fn null_arguments() {
        unsafe {
            let mut out = 0.0;
            assert_eq!(chemlab_initial_energy(ptr::null(), &mut out), ChemlabStatus::NullPointer);
            assert_eq!(chemlab_config_parse(ptr::null(), ptr::null_mut()), ChemlabStatus::NullPointer);
            chemlab_config_free(ptr::null_mut());
            chemlab_run_free(ptr::null_mut());
            assert_eq!(chemlab_run_cells(ptr::null()), 0);
        }
    }

    #[test]
    fn kinetics_closed_form() {
        unsafe {
            let mut k = ptr::null_mut();
            assert_eq!(chemlab_kinetics_prototype(0.5, 0.5, 1.0, 1.0, &mut k), ChemlabStatus::Ok);
            let mut f = 0.0;
            assert_eq!(chemlab_kinetics_eval(k, ChemlabFunction::F, 2.0 * std::f64::consts::E, &mut f), ChemlabStatus::Ok);
            // D/S = 1/s and s0 = 2
            assert!((f - 1.0).abs() < 1e-12);
            assert_eq!(chemlab_kinetics_eval(k, ChemlabFunction::D, -1.0, &mut f), ChemlabStatus::Invalid);
            chemlab_kinetics_free(k);
        }
    }
}
