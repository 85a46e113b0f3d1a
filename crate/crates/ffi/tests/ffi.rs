use std::ffi::CStr;
use std::ptr;

use nlburgers_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(nlb_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_entry_points() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(nlb_rho_weight(0.0, 1.0, &mut v), NlbStatus::Ok);
        assert!((v - 4.0).abs() < 1e-14);
        assert_eq!(nlb_getoor_constant(1.5, &mut v), NlbStatus::Ok);
        assert!((v - 1.329_340_388_179_137).abs() < 1e-12);
        assert_eq!(nlb_rho_weight(1.0, 1.0, &mut v), NlbStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(nlb_getoor_constant(2.5, &mut v), NlbStatus::Parameter);
        assert_eq!(nlb_rho_weight(0.0, 1.0, ptr::null_mut()), NlbStatus::NullPointer);
        assert!(last_error().contains("null"));
    }
    let ver = unsafe { CStr::from_ptr(nlb_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

#[test]
fn form_and_basis_round_trip() {
    unsafe {
        let mut form = ptr::null_mut();
        assert_eq!(nlb_form_assemble(32, 1.0, &mut form), NlbStatus::Ok);
        let n = nlb_form_dofs(form);
        assert_eq!(n, 31);

        let mut basis = ptr::null_mut();
        assert_eq!(nlb_basis_solve(form, 4, &mut basis), NlbStatus::Ok);
        assert_eq!(nlb_basis_len(basis), 4);
        let mut lam = [0.0; 4];
        assert_eq!(nlb_basis_eigenvalues(basis, lam.as_mut_ptr(), 4), NlbStatus::Ok);
        assert!(lam.windows(2).all(|w| w[0] < w[1]) && lam[0] > 0.0);

        // A φ_1 · φ_1 recovers λ_1 for an M-orthonormal mode
        let mut phi = vec![0.0; n];
        let mut aphi = vec![0.0; n];
        assert_eq!(nlb_basis_mode(basis, 0, phi.as_mut_ptr(), n), NlbStatus::Ok);
        assert_eq!(nlb_form_apply(form, phi.as_ptr(), aphi.as_mut_ptr(), n), NlbStatus::Ok);
        let q: f64 = phi.iter().zip(&aphi).map(|(a, b)| a * b).sum();
        assert!((q - lam[0]).abs() < 1e-9 * lam[0], "{q} vs {}", lam[0]);

        assert_eq!(nlb_basis_mode(basis, 4, phi.as_mut_ptr(), n), NlbStatus::Parameter);
        assert_eq!(nlb_form_apply(form, phi.as_ptr(), aphi.as_mut_ptr(), n - 1), NlbStatus::Dimension);
        assert_eq!(nlb_form_strong_image(form, phi.as_ptr(), aphi.as_mut_ptr(), n), NlbStatus::Ok);

        nlb_basis_free(basis);
        nlb_form_free(form);
        nlb_form_free(ptr::null_mut());
        assert_eq!(nlb_form_dofs(ptr::null()), 0);
    }
}

#[test]
fn failed_assembly_leaves_null_handle() {
    unsafe {
        let mut form = 1usize as *mut NlbForm;
        assert_ne!(nlb_form_assemble(0, 1.0, &mut form), NlbStatus::Ok);
        assert!(form.is_null());
        let mut basis = ptr::null_mut();
        assert_eq!(nlb_basis_solve(ptr::null(), 3, &mut basis), NlbStatus::NullPointer);
    }
}

#[test]
fn header_is_current_and_parses() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/nlburgers.h")).unwrap();
    for name in [
        "nlb_last_error", "nlb_rho_weight", "nlb_getoor_constant", "nlb_form_assemble", "nlb_form_free",
        "nlb_form_apply", "nlb_form_strong_image", "nlb_basis_solve", "nlb_basis_eigenvalues", "nlb_basis_mode",
        "nlb_basis_free", "NLB_STATUS_NULL_POINTER",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    // syntax check with a system C compiler when one is around
    if let Ok(out) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", &format!("{dir}/include"), &format!("{dir}/examples/demo.c")])
        .output()
    {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
