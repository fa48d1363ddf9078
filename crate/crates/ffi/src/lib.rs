//! C ABI for the `lfrg` flow solver.
//!
//! Every entry point returns an [`LfrgStatus`]; results go through out
//! pointers. On failure a message is kept per thread and can be read with
//! [`lfrg_last_error_message`]. Beta systems and trajectories are opaque
//! handles owned by the caller and released with their `_free` function.
//! Panics never cross the boundary; they surface as `LFRG_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lfrg::beta::{BetaMode, BetaSystem, DeSitterScale, SignMode};
use lfrg::fixed_points::{find_fixed_point, stability_analysis_with, FixedPointReport, NewtonOptions};
use lfrg::kernels::{self, DeSitter, MuMode, Thermal};
use lfrg::ode::{self, FlowProblem, FlowTrajectory, Termination};
use lfrg::specfun::{self, PolyOrder};
use lfrg::Error;

/// Result codes shared by all entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfrgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The arguments lie outside the domain of the kernel or system.
    Domain = 3,
    /// A polygamma pole was hit.
    Pole = 4,
    /// Newton iteration did not converge.
    NoConvergence = 5,
    /// Adaptive quadrature did not converge.
    Convergence = 6,
    IndexOutOfRange = 7,
    Panic = 8,
}

/// Sign convention of the de Sitter beta system.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfrgSignMode {
    KernelConsistent = 0,
    PaperTranscribed = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfrgTerminationKind {
    ReachedEnd = 0,
    DomainStop = 1,
    PoleStop = 2,
    StepBudget = 3,
}

/// How a flow ended. `index` and `value` are only meaningful for
/// `POLE_STOP`; `t` is the last accepted time otherwise.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfrgTermination {
    pub kind: LfrgTerminationKind,
    pub t: f64,
    pub index: u32,
    pub value: f64,
}

/// A fixed point with its linearization; eigenvalues are sorted by
/// decreasing real part and exponents are their negatives.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfrgFixedPoint {
    pub location: [f64; 3],
    pub residual: f64,
    pub iterations: u32,
    pub stability_matrix: [f64; 9],
    pub eigenvalues_re: [f64; 3],
    pub eigenvalues_im: [f64; 3],
    pub exponents_re: [f64; 3],
    pub exponents_im: [f64; 3],
}

impl LfrgFixedPoint {
    fn empty() -> Self {
        Self {
            location: [0.0; 3],
            residual: 0.0,
            iterations: 0,
            stability_matrix: [0.0; 9],
            eigenvalues_re: [0.0; 3],
            eigenvalues_im: [0.0; 3],
            exponents_re: [0.0; 3],
            exponents_im: [0.0; 3],
        }
    }
}

/// Opaque beta-system handle.
pub struct LfrgBetaSystem(BetaSystem);

/// Opaque trajectory handle.
pub struct LfrgTrajectory(FlowTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LfrgStatus {
    match e {
        Error::Domain { .. } => LfrgStatus::Domain,
        Error::Pole { .. } => LfrgStatus::Pole,
        Error::Convergence { .. } => LfrgStatus::Convergence,
        Error::NoConvergence { .. } => LfrgStatus::NoConvergence,
        Error::InvalidProblem(_) => LfrgStatus::InvalidArgument,
    }
}

struct Failure(LfrgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(LfrgStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(LfrgStatus::InvalidArgument, msg.into())
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LfrgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LfrgStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LfrgStatus::Panic
        }
    }
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn read3(p: *const f64, what: &str) -> Result<[f64; 3], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

unsafe fn system<'a>(sys: *const LfrgBetaSystem) -> Result<&'a BetaSystem, Failure> {
    sys.as_ref().map(|s| &s.0).ok_or_else(|| null("system"))
}

/// μ² > 0 holds μ fixed; anything else ties it to `tied`.
fn mu_from(mu2: f64, tied: MuMode) -> MuMode {
    if mu2 > 0.0 {
        MuMode::Fixed { mu2 }
    } else {
        tied
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lfrg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lfrg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// ψ⁽ⁿ⁾(x) for n = 0, 1, 2.
///
/// # Safety
/// `out` must be null or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn lfrg_polygamma(order: u32, x: f64, out: *mut f64) -> LfrgStatus {
    guard(|| {
        let order = PolyOrder::try_from(order)?;
        write(out, specfun::polygamma(order, x)?, "out")
    })
}

/// Bose part of the thermal Wick square, (1/2π²)∫p²/√(p²+M²)·n_B(p) dp.
///
/// # Safety
/// `out` must be null or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn lfrg_bose_tadpole(m2: f64, beta: f64, out: *mut f64) -> LfrgStatus {
    guard(|| write(out, specfun::bose_tadpole(m2, beta)?, "out"))
}

/// Minkowski-vacuum Wick square in even dimension `d`.
///
/// # Safety
/// `out` must be null or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn lfrg_minkowski_wick_square(m2: f64, mu2: f64, d: u32, out: *mut f64) -> LfrgStatus {
    guard(|| write(out, kernels::minkowski_vacuum_wick_square(m2, mu2, d)?.value, "out"))
}

/// Thermal Wick square at scale `k`; `mu2` ≤ 0 ties μ to k.
///
/// # Safety
/// `out` must be null or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn lfrg_thermal_wick_square(m2: f64, beta: f64, mu2: f64, k: f64, out: *mut f64) -> LfrgStatus {
    guard(|| {
        let bg = Thermal {
            beta,
            mu: mu_from(mu2, MuMode::TiedToK),
        };
        bg.validate()?;
        write(out, kernels::thermal_wick_square(m2, &bg, k)?.value, "out")
    })
}

/// Bunch–Davies Wick square; `mu2` ≤ 0 sets μ² = 12H².
///
/// # Safety
/// `out` must be null or valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn lfrg_desitter_wick_square(m2: f64, h2: f64, xi: f64, mu2: f64, out: *mut f64) -> LfrgStatus {
    guard(|| {
        let bg = DeSitter {
            h2,
            xi,
            mu: mu_from(mu2, MuMode::TiedToH),
        };
        bg.validate()?;
        write(out, kernels::desitter_wick_square(m2, &bg, 0.0)?.value, "out")
    })
}

fn boxed(sys: BetaSystem) -> Result<*mut LfrgBetaSystem, Failure> {
    sys.validate()?;
    Ok(Box::into_raw(Box::new(LfrgBetaSystem(sys))))
}

fn beta_mode(kernel_derived: bool) -> BetaMode {
    if kernel_derived {
        BetaMode::kernel()
    } else {
        BetaMode::Transcribed
    }
}

/// d = 4 Minkowski-vacuum system in dimensionless couplings; `mu2` ≤ 0
/// ties μ to k.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_minkowski(
    mu2: f64,
    cutoff: f64,
    kernel_derived: bool,
    out: *mut *mut LfrgBetaSystem,
) -> LfrgStatus {
    guard(|| {
        let sys = BetaSystem::MinkowskiVacuum {
            mu: mu_from(mu2, MuMode::TiedToK),
            cutoff,
            mode: beta_mode(kernel_derived),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, boxed(sys)?, "out")
    })
}

/// High-temperature system in dimensionless couplings.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_thermal_high_t(out: *mut *mut LfrgBetaSystem) -> LfrgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, boxed(BetaSystem::ThermalHighT)?, "out")
    })
}

/// Full thermal system in dimensionful couplings; `mu2` ≤ 0 ties μ to k.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_thermal(
    beta: f64,
    mu2: f64,
    cutoff: f64,
    kernel_derived: bool,
    out: *mut *mut LfrgBetaSystem,
) -> LfrgStatus {
    guard(|| {
        let sys = BetaSystem::Thermal {
            beta,
            mu: mu_from(mu2, MuMode::TiedToK),
            cutoff,
            mode: beta_mode(kernel_derived),
        };
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, boxed(sys)?, "out")
    })
}

/// De Sitter system with μ² = 12H². `sign` is an [`LfrgSignMode`] value.
/// A non-negative `k2_over_h2` freezes that ratio; a negative one lets
/// k = `cutoff`·eᵗ run.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_de_sitter(
    h2: f64,
    xi: f64,
    sign: u32,
    k2_over_h2: f64,
    cutoff: f64,
    out: *mut *mut LfrgBetaSystem,
) -> LfrgStatus {
    guard(|| {
        let scale = if k2_over_h2 >= 0.0 {
            DeSitterScale::Frozen { k2_over_h2 }
        } else {
            DeSitterScale::Running { cutoff }
        };
        let sys = BetaSystem::DeSitter {
            background: DeSitter {
                h2,
                xi,
                mu: MuMode::TiedToH,
            },
            scale,
            sign: match sign {
                s if s == LfrgSignMode::KernelConsistent as u32 => SignMode::KernelConsistent,
                s if s == LfrgSignMode::PaperTranscribed as u32 => SignMode::PaperTranscribed,
                other => return Err(invalid(format!("unknown sign mode {other}"))),
            },
            include_u0: false,
        };
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, boxed(sys)?, "out")
    })
}

/// Any beta system from its JSON description, e.g.
/// `{"system": "thermal-high-t"}`.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_from_json(json: *const c_char, out: *mut *mut LfrgBetaSystem) -> LfrgStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(format!("json is not UTF-8: {e}")))?;
        let sys: BetaSystem = serde_json::from_str(text).map_err(|e| invalid(format!("beta system: {e}")))?;
        write(out, boxed(sys)?, "out")
    })
}

/// Releases a beta system. Null is ignored.
///
/// # Safety
/// `sys` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_system_free(sys: *mut LfrgBetaSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Beta functions at time `t`: reads 3 couplings, writes 3 rates.
///
/// # Safety
/// `g` and `out` must be null or valid for 3 `double`s.
#[no_mangle]
pub unsafe extern "C" fn lfrg_beta_eval(sys: *const LfrgBetaSystem, t: f64, g: *const f64, out: *mut f64) -> LfrgStatus {
    guard(|| {
        let sys = system(sys)?;
        let g = read3(g, "g")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = sys.rate(t, g)?;
        ptr::copy_nonoverlapping(r.as_ptr(), out, 3);
        Ok(())
    })
}

fn fixed_point_struct(r: &FixedPointReport) -> Result<LfrgFixedPoint, Failure> {
    if r.location.len() != 3 {
        return Err(invalid("expected three couplings"));
    }
    let mut fp = LfrgFixedPoint {
        location: [r.location[0], r.location[1], r.location[2]],
        residual: r.residual,
        iterations: r.iterations as u32,
        ..LfrgFixedPoint::empty()
    };
    for i in 0..3 {
        for j in 0..3 {
            fp.stability_matrix[3 * i + j] = r.stability_matrix[i][j];
        }
        fp.eigenvalues_re[i] = r.eigenvalues[i].re;
        fp.eigenvalues_im[i] = r.eigenvalues[i].im;
        fp.exponents_re[i] = r.critical_exponents[i].re;
        fp.exponents_im[i] = r.critical_exponents[i].im;
    }
    Ok(fp)
}

/// Damped Newton search from `guess`. `tol` ≤ 0 and `max_iter` = 0 pick the
/// defaults (1e−12, 200). On `NO_CONVERGENCE`, `out->location` and
/// `out->residual` hold the last iterate.
///
/// # Safety
/// `guess` must be null or valid for 3 `double`s; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn lfrg_find_fixed_point(
    sys: *const LfrgBetaSystem,
    guess: *const f64,
    tol: f64,
    max_iter: u32,
    out: *mut LfrgFixedPoint,
) -> LfrgStatus {
    guard(|| {
        let sys = system(sys)?;
        let guess = read3(guess, "guess")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut opts = NewtonOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter as usize;
        }
        match find_fixed_point(sys, &guess, &opts) {
            Ok(r) => write(out, fixed_point_struct(&r)?, "out"),
            Err(Error::NoConvergence {
                iterate,
                residual,
                iterations,
            }) => {
                let mut fp = LfrgFixedPoint::empty();
                fp.location.copy_from_slice(&iterate[..3]);
                fp.residual = residual;
                fp.iterations = iterations as u32;
                write(out, fp, "out")?;
                Err(Failure(
                    LfrgStatus::NoConvergence,
                    format!("no convergence after {iterations} iterations (residual {residual:e})"),
                ))
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Stability matrix and exponents at `point`; the residual is reported,
/// not enforced.
///
/// # Safety
/// `point` must be null or valid for 3 `double`s; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn lfrg_stability_analysis(
    sys: *const LfrgBetaSystem,
    point: *const f64,
    out: *mut LfrgFixedPoint,
) -> LfrgStatus {
    guard(|| {
        let sys = system(sys)?;
        let point = read3(point, "point")?;
        let r = stability_analysis_with(sys, &point, &NewtonOptions::default())?;
        write(out, fixed_point_struct(&r)?, "out")
    })
}

/// Integrates the flow from `t0` to `t1`. Tolerances ≤ 0 and
/// `max_steps` = 0 pick the defaults. Early termination is not an error:
/// inspect it with [`lfrg_trajectory_termination`].
///
/// # Safety
/// `g0` must be null or valid for 3 `double`s; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn lfrg_integrate(
    sys: *const LfrgBetaSystem,
    g0: *const f64,
    t0: f64,
    t1: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_steps: u64,
    out: *mut *mut LfrgTrajectory,
) -> LfrgStatus {
    guard(|| {
        let sys = system(sys)?;
        let g0 = read3(g0, "g0")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let pick = |v: f64, d: f64| if v > 0.0 { v } else { d };
        let p = FlowProblem::new(sys, g0.to_vec(), t0, t1)
            .cutoff(sys.cutoff())
            .tolerances(pick(rel_tol, ode::DEFAULT_REL_TOL), pick(abs_tol, ode::DEFAULT_ABS_TOL))
            .max_steps(if max_steps > 0 { max_steps as usize } else { ode::DEFAULT_MAX_STEPS });
        let traj = ode::integrate(&p)?;
        write(out, Box::into_raw(Box::new(LfrgTrajectory(traj))), "out")
    })
}

/// Number of samples (initial state plus one per accepted step); 0 for null.
///
/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn lfrg_trajectory_len(traj: *const LfrgTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.samples.len())
}

/// Sample `i`: time, scale k and the three couplings.
///
/// # Safety
/// `traj` must be null or live; `t`, `k` writable; `state` valid for 3 `double`s.
#[no_mangle]
pub unsafe extern "C" fn lfrg_trajectory_sample(
    traj: *const LfrgTrajectory,
    i: usize,
    t: *mut f64,
    k: *mut f64,
    state: *mut f64,
) -> LfrgStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        let s = traj.0.samples.get(i).ok_or_else(|| {
            Failure(
                LfrgStatus::IndexOutOfRange,
                format!("sample {i} of {}", traj.0.samples.len()),
            )
        })?;
        if state.is_null() {
            return Err(null("state"));
        }
        write(t, s.t, "t")?;
        write(k, s.k, "k")?;
        ptr::copy_nonoverlapping(s.state.as_ptr(), state, 3);
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn lfrg_trajectory_termination(
    traj: *const LfrgTrajectory,
    out: *mut LfrgTermination,
) -> LfrgStatus {
    guard(|| {
        let traj = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        let last_t = traj.0.last().t;
        let term = match &traj.0.termination {
            Termination::ReachedEnd => LfrgTermination {
                kind: LfrgTerminationKind::ReachedEnd,
                t: last_t,
                index: 0,
                value: 0.0,
            },
            Termination::DomainStop { t, .. } => LfrgTermination {
                kind: LfrgTerminationKind::DomainStop,
                t: *t,
                index: 0,
                value: 0.0,
            },
            Termination::PoleStop { t, index, value } => LfrgTermination {
                kind: LfrgTerminationKind::PoleStop,
                t: *t,
                index: *index as u32,
                value: *value,
            },
            Termination::StepBudget { t } => LfrgTermination {
                kind: LfrgTerminationKind::StepBudget,
                t: *t,
                index: 0,
                value: 0.0,
            },
        };
        write(out, term, "out")
    })
}

/// Releases a trajectory. Null is ignored.
///
/// # Safety
/// `traj` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lfrg_trajectory_free(traj: *mut LfrgTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
