//! C ABI over the thermolim library.
//!
//! Every function returns a [`TlStatus`]; on failure the message is kept in a
//! thread-local slot readable with [`tl_last_error_message`]. Handles are
//! opaque and released with their `_free` function. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use thermolim::exact::{build_hamiltonian, evolve_exact, project_chi, JointState};
use thermolim::fock::{cat_state, coherent_state, displacement_element};
use thermolim::harness::{run_sweep, ScenarioConfig};
use thermolim::spin::chi_state;
use thermolim::wigner::{wigner_numeric, GridSpec, WignerGrid};
use thermolim::{Error, FieldState, ModelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Cutoff = 3,
    Capacity = 4,
    Integration = 5,
    Quadrature = 6,
    Config = 7,
    Format = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Model constants.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TlParams {
    pub omega: f64,
    pub delta: f64,
    pub g: f64,
    pub n_atoms: u32,
}

/// Truncated field state.
pub struct TlFieldState(FieldState);

/// Wigner function on a rectangular grid.
pub struct TlWignerGrid(WignerGrid);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> TlStatus {
    match e {
        Error::Domain(_) => TlStatus::Domain,
        Error::Cutoff { .. } => TlStatus::Cutoff,
        Error::Capacity { .. } => TlStatus::Capacity,
        Error::Integration(_) => TlStatus::Integration,
        Error::Quadrature { .. } => TlStatus::Quadrature,
        Error::Config { .. } => TlStatus::Config,
        Error::Format { .. } => TlStatus::Format,
        Error::Io(_) => TlStatus::Io,
    }
}

struct Fail(TlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TlStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            TlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TlStatus::Domain, format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

fn params_of(p: &TlParams) -> Result<ModelParams, Fail> {
    Ok(ModelParams::new(p.omega, p.delta, p.g, p.n_atoms as usize)?)
}

fn boxed_state(out: *mut *mut TlFieldState, s: FieldState) -> Result<(), Fail> {
    unsafe { write_out(out, Box::into_raw(Box::new(TlFieldState(s))), "out") }
}

/// Copies the last error message of this thread, NUL-terminated, into `buf`
/// and returns the buffer size it needs (message length + 1). Pass a null
/// `buf` to query the size.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// ⟨n|D[α]|k⟩ with α = re + i·im.
///
/// # Safety
/// `out_re` and `out_im` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_displacement_element(n: usize, k: usize, re: f64, im: f64, out_re: *mut f64, out_im: *mut f64) -> TlStatus {
    guard(|| {
        if !(re.is_finite() && im.is_finite()) {
            return Err(Fail(TlStatus::Domain, "α must be finite".into()));
        }
        let d = displacement_element(n, k, Complex64::new(re, im));
        write_out(out_re, d.re, "out_re")?;
        write_out(out_im, d.im, "out_im")
    })
}

/// Coherent state |re + i·im⟩ truncated at `ncut`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_coherent_state_new(re: f64, im: f64, ncut: usize, out: *mut *mut TlFieldState) -> TlStatus {
    guard(|| boxed_state(out, coherent_state(Complex64::new(re, im), ncut)?))
}

/// Normalized cat |αe^{iφ}⟩ + |αe^{−iφ}⟩ truncated at `ncut`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_cat_state_new(alpha: f64, phi: f64, ncut: usize, out: *mut *mut TlFieldState) -> TlStatus {
    guard(|| boxed_state(out, cat_state(alpha, phi, ncut)?.0))
}

/// Leading-order field state of the evolved cat at time `t`.
///
/// # Safety
/// `params` must point to a valid `TlParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_evolve_cat_leading(
    params: *const TlParams,
    alpha: f64,
    phi: f64,
    t: f64,
    ncut: usize,
    out: *mut *mut TlFieldState,
) -> TlStatus {
    guard(|| {
        let p = params_of(deref(params, "params")?)?;
        boxed_state(out, thermolim::propagator::evolve_cat_leading(&p, alpha, phi, t, ncut)?)
    })
}

/// Exactly evolves cat ⊗ χ to time `t` and returns the (unnormalized) field
/// component left in χ.
///
/// # Safety
/// `params` must point to a valid `TlParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_evolve_cat_exact(
    params: *const TlParams,
    alpha: f64,
    phi: f64,
    t: f64,
    ncut: usize,
    out: *mut *mut TlFieldState,
) -> TlStatus {
    guard(|| {
        let p = params_of(deref(params, "params")?)?;
        let h = build_hamiltonian(&p, ncut)?;
        let chi = chi_state(p.n_atoms)?;
        let start = JointState::product(&p, &cat_state(alpha, phi, ncut)?.0, &chi)?;
        let end = evolve_exact(&start, t, &h)?;
        boxed_state(out, project_chi(&end, &chi)?)
    })
}

/// Number of Fock amplitudes (ncut + 1), or 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_field_state_dim(state: *const TlFieldState) -> usize {
    state.as_ref().map_or(0, |s| s.0.dim())
}

/// Copies the amplitudes into `re` and `im`, each of length `len` ≥ dim.
///
/// # Safety
/// `state` must be a live handle; `re` and `im` must be valid for `len`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn tl_field_state_amplitudes(state: *const TlFieldState, re: *mut f64, im: *mut f64, len: usize) -> TlStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        if re.is_null() || im.is_null() {
            return Err(null("amplitude buffer"));
        }
        if len < s.dim() {
            return Err(Fail(TlStatus::BufferTooSmall, format!("need {} amplitudes, buffer holds {len}", s.dim())));
        }
        for (n, c) in s.amplitudes().iter().enumerate() {
            *re.add(n) = c.re;
            *im.add(n) = c.im;
        }
        Ok(())
    })
}

/// ‖ψ‖
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_field_state_norm(state: *const TlFieldState, out: *mut f64) -> TlStatus {
    guard(|| write_out(out, deref(state, "state")?.0.norm(), "out"))
}

/// |⟨a|b⟩|² / (‖a‖²‖b‖²)
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_fidelity(a: *const TlFieldState, b: *const TlFieldState, out: *mut f64) -> TlStatus {
    guard(|| {
        let f = thermolim::exact::fidelity(&deref(a, "a")?.0, &deref(b, "b")?.0)?;
        write_out(out, f, "out")
    })
}

/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_field_state_free(state: *mut TlFieldState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Wigner function of a normalized state on an `nx` × `np` grid.
///
/// # Safety
/// `state` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tl_wigner_grid_new(
    state: *const TlFieldState,
    x_min: f64,
    x_max: f64,
    p_min: f64,
    p_max: f64,
    nx: usize,
    np: usize,
    out: *mut *mut TlWignerGrid,
) -> TlStatus {
    guard(|| {
        let s = &deref(state, "state")?.0;
        let spec = GridSpec::new(x_min, x_max, p_min, p_max, nx, np)?;
        let grid = wigner_numeric(s, &spec)?;
        write_out(out, Box::into_raw(Box::new(TlWignerGrid(grid))), "out")
    })
}

/// Number of grid values (nx·np), or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tl_wigner_grid_len(grid: *const TlWignerGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.values.len())
}

/// Copies the values, row-major in x, into `buf` of length `len`.
///
/// # Safety
/// `grid` must be a live handle; `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tl_wigner_grid_values(grid: *const TlWignerGrid, buf: *mut f64, len: usize) -> TlStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < g.values.len() {
            return Err(Fail(TlStatus::BufferTooSmall, format!("need {} values, buffer holds {len}", g.values.len())));
        }
        ptr::copy_nonoverlapping(g.values.as_ptr(), buf, g.values.len());
        Ok(())
    })
}

/// Writes the grid in the binary grid format.
///
/// # Safety
/// `grid` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tl_wigner_grid_write_binary(grid: *const TlWignerGrid, path: *const c_char) -> TlStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let path = path_arg(path, "path")?;
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(Error::from)?);
        g.write_binary(&mut file).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tl_wigner_grid_free(grid: *mut TlWignerGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Runs the scenario or sweep described by the TOML file at `config_path`,
/// writing into `out_dir` (may be null to skip files). `converged` receives
/// 1 when no convergence flag was raised.
///
/// # Safety
/// Paths must be NUL-terminated strings; `converged` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn tl_run_config(config_path: *const c_char, out_dir: *const c_char, workers: usize, converged: *mut i32) -> TlStatus {
    guard(|| {
        let config = ScenarioConfig::from_file(path_arg(config_path, "config_path")?)?;
        let out = if out_dir.is_null() { None } else { Some(path_arg(out_dir, "out_dir")?) };
        let result = run_sweep(&config, out, workers)?;
        write_out(converged, i32::from(result.converged()), "converged")
    })
}
