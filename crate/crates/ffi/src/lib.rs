//! C ABI over the `edfa` solver.
//!
//! A session owns a configured problem, its assembled system and the block
//! preconditioner. Every call returns an [`EdfaStatus`]; on failure the
//! message is available from [`edfa_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use edfa::assembly::{BlockSystem, TimeStep};
use edfa::driver::{solve, Problem, SimConfig, Solution};
use edfa::edfa::{build_stage1, build_stage2, EdfaPreconditioner, Stage1};
use edfa::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdfaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Geometry = 5,
    SingularSystem = 6,
    Factorization = 7,
    NotConverged = 8,
    State = 9,
    BufferTooSmall = 10,
    Internal = 99,
}

/// Metrics of the last solve. Times are in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdfaSolveSummary {
    pub n_it: u64,
    pub converged: bool,
    pub relres: f64,
    pub true_relres: f64,
    pub t_p0: f64,
    pub t_p: f64,
    pub t_s: f64,
    pub t_t: f64,
    pub mu: f64,
}

/// Opaque session handle.
pub struct EdfaSession {
    cfg: SimConfig,
    problem: Problem,
    system: BlockSystem,
    p_prev: Vec<f64>,
    stage1: Option<Arc<Stage1>>,
    pc: Option<EdfaPreconditioner>,
    last: Option<Solution>,
    t_p0_pending: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> EdfaStatus {
    match e {
        Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::IndexOutOfRange { .. } => {
            EdfaStatus::InvalidArgument
        }
        Error::Config(_) | Error::Parse { .. } => EdfaStatus::Config,
        Error::Io(_) => EdfaStatus::Io,
        Error::Geometry { .. } | Error::Assembly(_) => EdfaStatus::Geometry,
        Error::SingularSystem(_) => EdfaStatus::SingularSystem,
        Error::Factorization(_) => EdfaStatus::Factorization,
        Error::NonConvergence { .. } => EdfaStatus::NotConverged,
        Error::State(_) => EdfaStatus::State,
    }
}

/// Runs `f`, recording errors and turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (EdfaStatus, String)>) -> EdfaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            EdfaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            EdfaStatus::Internal
        }
    }
}

fn lib(e: Error) -> (EdfaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EdfaStatus, String) {
    (EdfaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EdfaStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (EdfaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn session_mut<'a>(s: *mut EdfaSession) -> Result<&'a mut EdfaSession, (EdfaStatus, String)> {
    s.as_mut().ok_or_else(|| null("session"))
}

unsafe fn session_ref<'a>(s: *const EdfaSession) -> Result<&'a EdfaSession, (EdfaStatus, String)> {
    s.as_ref().ok_or_else(|| null("session"))
}

fn new_session(cfg: SimConfig) -> edfa::Result<EdfaSession> {
    let problem = Problem::from_config(&cfg)?;
    let system = problem.assemble(TimeStep::Dt(cfg.timestep.dt0), &problem.p_init)?;
    Ok(EdfaSession {
        p_prev: problem.p_init.clone(),
        cfg,
        problem,
        system,
        stage1: None,
        pc: None,
        last: None,
        t_p0_pending: false,
    })
}

unsafe fn write_session(out: *mut *mut EdfaSession, cfg: SimConfig) -> Result<(), (EdfaStatus, String)> {
    let s = new_session(cfg).map_err(lib)?;
    *out = Box::into_raw(Box::new(s));
    Ok(())
}

/// Creates a session from TOML text. The system starts at the configured `dt0`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_from_toml(toml: *const c_char, out: *mut *mut EdfaSession) -> EdfaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let cfg = SimConfig::from_toml_str(c_str(toml, "toml")?).map_err(lib)?;
        write_session(out, cfg)
    })
}

/// Creates a session from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_from_file(path: *const c_char, out: *mut *mut EdfaSession) -> EdfaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let cfg = SimConfig::load(c_str(path, "path")?).map_err(lib)?;
        write_session(out, cfg)
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must come from a constructor of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_free(session: *mut EdfaSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Element, face and unknown counts.
///
/// # Safety
/// All pointers must be valid; output pointers may be null to skip them.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_dims(
    session: *const EdfaSession,
    n_elems: *mut usize,
    n_faces: *mut usize,
    n_unknowns: *mut usize,
) -> EdfaStatus {
    guard(|| {
        let s = session_ref(session)?;
        if let Some(p) = n_elems.as_mut() {
            *p = s.system.n_elems();
        }
        if let Some(p) = n_faces.as_mut() {
            *p = s.problem.grid.n_faces();
        }
        if let Some(p) = n_unknowns.as_mut() {
            *p = s.system.dim();
        }
        Ok(())
    })
}

/// Moves to a new timestep. The pressures of the last solve, if any, become
/// the previous state. `dt` that is infinite or `<= 0` selects the steady system.
///
/// # Safety
/// `session` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_set_timestep(session: *mut EdfaSession, dt: f64) -> EdfaStatus {
    guard(|| {
        let s = session_mut(session)?;
        let step = if dt.is_nan() {
            return Err((EdfaStatus::InvalidArgument, "dt is NaN".into()));
        } else if dt <= 0.0 || dt.is_infinite() {
            TimeStep::Steady
        } else {
            TimeStep::Dt(dt)
        };
        if let Some(last) = s.last.take() {
            s.p_prev = last.p;
        }
        s.system = s.system.update_app_for_timestep(step, &s.p_prev).map_err(lib)?;
        s.pc = None;
        Ok(())
    })
}

fn ensure_preconditioner(s: &mut EdfaSession) -> edfa::Result<()> {
    if s.pc.is_some() {
        return Ok(());
    }
    let stage1 = match &s.stage1 {
        Some(st) => Arc::clone(st),
        None => {
            let st = Arc::new(build_stage1(&s.system, &s.cfg.preconditioner)?);
            s.stage1 = Some(Arc::clone(&st));
            s.t_p0_pending = true;
            st
        }
    };
    s.pc = Some(build_stage2(stage1, &s.system)?);
    Ok(())
}

/// Builds the preconditioner for the current timestep. Stage 1 is built on
/// the first call only. `edfa_session_solve` calls this when needed.
///
/// # Safety
/// `session` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_build_preconditioner(session: *mut EdfaSession) -> EdfaStatus {
    guard(|| ensure_preconditioner(session_mut(session)?).map_err(lib))
}

/// Solves the current system. Non-convergence returns `NotConverged`.
///
/// # Safety
/// `session` must be a valid handle; `summary` may be null.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_solve(session: *mut EdfaSession, summary: *mut EdfaSolveSummary) -> EdfaStatus {
    guard(|| {
        let s = session_mut(session)?;
        ensure_preconditioner(s).map_err(lib)?;
        let pc = s.pc.as_ref().expect("built above");
        let mut sol = solve(&s.system, pc, &s.cfg.solver, 0).map_err(lib)?;
        if std::mem::take(&mut s.t_p0_pending) {
            sol.report.t_p0 = pc.t_p0();
        }
        if let Some(out) = summary.as_mut() {
            let r = &sol.report;
            *out = EdfaSolveSummary {
                n_it: r.n_it as u64,
                converged: r.converged,
                relres: r.final_relres(),
                true_relres: r.true_relres,
                t_p0: r.t_p0,
                t_p: r.t_p,
                t_s: r.t_s,
                t_t: r.t_t(),
                mu: r.mu,
            };
        }
        s.last = Some(sol);
        Ok(())
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (EdfaStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((EdfaStatus::BufferTooSmall, format!("buffer holds {len}, need {}", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

fn last(s: &EdfaSession) -> Result<&Solution, (EdfaStatus, String)> {
    s.last.as_ref().ok_or((EdfaStatus::State, "no solution yet".into()))
}

/// Copies the element pressures of the last solve into `buf`.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_pressures(session: *const EdfaSession, buf: *mut f64, len: usize) -> EdfaStatus {
    guard(|| copy_out(&last(session_ref(session)?)?.p, buf, len))
}

/// Copies the face pressures of the last solve, one per grid face.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_face_pressures(
    session: *const EdfaSession,
    buf: *mut f64,
    len: usize,
) -> EdfaStatus {
    guard(|| copy_out(&last(session_ref(session)?)?.pi_full, buf, len))
}

/// Writes the current system in Matrix Market format into `dir`, plus the
/// preconditioner factors when one has been built.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn edfa_session_export(session: *const EdfaSession, dir: *const c_char) -> EdfaStatus {
    guard(|| {
        let s = session_ref(session)?;
        let dir = Path::new(c_str(dir, "dir")?);
        s.system.export_matrix_market(dir).map_err(lib)?;
        if let Some(pc) = &s.pc {
            pc.export(dir.join("preconditioner")).map_err(lib)?;
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn edfa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn edfa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
