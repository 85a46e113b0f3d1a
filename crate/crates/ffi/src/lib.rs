//! C ABI over the operator, weight and eigenbasis routines.
//!
//! Every fallible call returns an [`NlbStatus`]; on failure the message is
//! available from [`nlb_last_error`] on the same thread. Forms and bases are
//! opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlburgers::galerkin::{solve_eigenbasis, EigenBasis};
use nlburgers::kernel::{
    apply_operator, assemble_form, getoor_constant, rho_weight, standard_strong_image, Field,
    FractionalOrder, Mesh, NonlocalForm,
};
use nlburgers::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlbStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Parameter = 3,
    Dimension = 4,
    Assembly = 5,
    Eigen = 6,
    BlowUp = 7,
    Config = 8,
    Check = 9,
    Io = 10,
    Panic = 11,
}

/// Assembled stiffness and mass on a uniform mesh.
pub struct NlbForm(NonlocalForm);

/// Leading generalized eigenpairs of a form.
pub struct NlbBasis(EigenBasis);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> NlbStatus {
    match err {
        Error::Domain(_) => NlbStatus::Domain,
        Error::Parameter(_) => NlbStatus::Parameter,
        Error::Dimension { .. } => NlbStatus::Dimension,
        Error::Assembly { .. } => NlbStatus::Assembly,
        Error::Eigen { .. } => NlbStatus::Eigen,
        Error::BlowUp { .. } => NlbStatus::BlowUp,
        Error::Config { .. } => NlbStatus::Config,
        Error::Check(_) => NlbStatus::Check,
        Error::Io(_) => NlbStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NlbStatus, String)>) -> NlbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlbStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            NlbStatus::Panic
        }
    }
}

fn lift<T>(r: nlburgers::Result<T>) -> Result<T, (NlbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NlbStatus, String) {
    (NlbStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Exterior weight `(2/alpha)[(1+x)^-alpha + (1-x)^-alpha]`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlb_rho_weight(x: f64, alpha: f64, out: *mut f64) -> NlbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = lift(FractionalOrder::new(alpha))?;
        *out = lift(rho_weight(x, a))?;
        Ok(())
    })
}

/// Constant value of the standard fractional Laplacian of `(1-x^2)^(alpha/2)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlb_getoor_constant(alpha: f64, out: *mut f64) -> NlbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = getoor_constant(lift(FractionalOrder::new(alpha))?);
        Ok(())
    })
}

/// Assembles the form on `n_cells` uniform cells; `*form` receives a handle
/// owned by the caller.
///
/// # Safety
/// `form` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlb_form_assemble(n_cells: usize, alpha: f64, form: *mut *mut NlbForm) -> NlbStatus {
    guard(|| {
        if form.is_null() {
            return Err(null("form"));
        }
        *form = ptr::null_mut();
        let mesh = lift(Mesh::new(n_cells))?;
        let f = lift(assemble_form(mesh, lift(FractionalOrder::new(alpha))?))?;
        *form = Box::into_raw(Box::new(NlbForm(f)));
        Ok(())
    })
}

/// Releases a form; null is ignored.
///
/// # Safety
/// `form` must come from [`nlb_form_assemble`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlb_form_free(form: *mut NlbForm) {
    if !form.is_null() {
        drop(Box::from_raw(form));
    }
}

/// Number of interior degrees of freedom (`n_cells - 1`); 0 for null.
///
/// # Safety
/// `form` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlb_form_dofs(form: *const NlbForm) -> usize {
    form.as_ref().map_or(0, |f| f.0.mesh().dofs())
}

unsafe fn field_from(form: &NlbForm, u: *const f64, len: usize) -> Result<Field, (NlbStatus, String)> {
    if u.is_null() {
        return Err(null("u"));
    }
    let dofs = form.0.mesh().dofs();
    if len != dofs {
        return Err((NlbStatus::Dimension, format!("expected {dofs} values, got {len}")));
    }
    lift(Field::new(form.0.mesh(), std::slice::from_raw_parts(u, len).to_vec()))
}

unsafe fn write_out(out: *mut f64, len: usize, v: &[f64]) -> Result<(), (NlbStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != v.len() {
        return Err((NlbStatus::Dimension, format!("expected {} output slots, got {len}", v.len())));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(v);
    Ok(())
}

/// `out = A u` for interior nodal values `u` (both of length `dofs`).
///
/// # Safety
/// `u` and `out` must be valid for `len` reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn nlb_form_apply(form: *const NlbForm, u: *const f64, out: *mut f64, len: usize) -> NlbStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        let field = field_from(f, u, len)?;
        write_out(out, len, &lift(apply_operator(&f.0, &field))?)
    })
}

/// Discrete strong image of `u` under the standard-normalized operator.
///
/// # Safety
/// `u` and `out` must be valid for `len` reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn nlb_form_strong_image(
    form: *const NlbForm,
    u: *const f64,
    out: *mut f64,
    len: usize,
) -> NlbStatus {
    guard(|| {
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        let field = field_from(f, u, len)?;
        let img = lift(standard_strong_image(&f.0, &field))?;
        write_out(out, len, img.values())
    })
}

/// Computes the `n_modes` smallest eigenpairs of a form.
///
/// # Safety
/// `form` must be a live handle and `basis` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn nlb_basis_solve(form: *const NlbForm, n_modes: usize, basis: *mut *mut NlbBasis) -> NlbStatus {
    guard(|| {
        if basis.is_null() {
            return Err(null("basis"));
        }
        *basis = ptr::null_mut();
        let f = form.as_ref().ok_or_else(|| null("form"))?;
        let b = lift(solve_eigenbasis(&f.0, n_modes))?;
        *basis = Box::into_raw(Box::new(NlbBasis(b)));
        Ok(())
    })
}

/// Releases a basis; null is ignored.
///
/// # Safety
/// `basis` must come from [`nlb_basis_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlb_basis_free(basis: *mut NlbBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Number of modes in a basis; 0 for null.
///
/// # Safety
/// `basis` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nlb_basis_len(basis: *const NlbBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.n_modes())
}

/// Copies the eigenvalues, ascending, into `out` (length `len` = number of modes).
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nlb_basis_eigenvalues(basis: *const NlbBasis, out: *mut f64, len: usize) -> NlbStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        write_out(out, len, b.0.lambdas())
    })
}

/// Copies mode `k` (0-based) as interior nodal values into `out` (length `dofs`).
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn nlb_basis_mode(basis: *const NlbBasis, k: usize, out: *mut f64, len: usize) -> NlbStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        if k >= b.0.n_modes() {
            return Err((NlbStatus::Parameter, format!("mode {k} out of range (n_modes = {})", b.0.n_modes())));
        }
        write_out(out, len, b.0.mode(k).values())
    })
}
