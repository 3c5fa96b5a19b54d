use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use junction_flow_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe {
        jf_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn reference() -> JfDiagrams {
    let mut d = JfDiagrams {
        v_max: [0.0; 3],
        rho_max: [0.0; 3],
    };
    assert_eq!(unsafe { jf_reference_diagrams(&mut d) }, JfStatus::Ok);
    d
}

fn unit() -> JfDiagrams {
    JfDiagrams {
        v_max: [1.0; 3],
        rho_max: [1.0; 3],
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(jf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn c1_fluxes_through_the_interface() {
    let d = unit();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(jf_model_classical(JfClassical::C1 as i32, &d, 0.5, ptr::null(), &mut m), JfStatus::Ok);
        let mut f = JfFluxes { f1: 0.0, f2: 0.0, f3: 0.0 };
        assert_eq!(jf_model_fluxes(m, 0.5, 0.5, 0.5, &mut f), JfStatus::Ok);
        assert!((f.f1 - 0.125).abs() < 1e-15 && (f.f2 - 0.125).abs() < 1e-15 && (f.f3 - 0.25).abs() < 1e-15);
        jf_model_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let d = unit();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(jf_model_classical(7, &d, 0.5, ptr::null(), &mut m), JfStatus::InvalidArgument);
        assert!(last_error().contains("unknown classical model 7"));
        assert_eq!(jf_model_classical(1, ptr::null(), 0.5, ptr::null(), &mut m), JfStatus::NullPointer);
        assert_eq!(jf_model_classical(1, &d, 1.5, ptr::null(), &mut m), JfStatus::Domain);
        assert!(m.is_null());
        // C3 needs a priority strictly inside (0, 1)
        assert_eq!(jf_model_classical(3, &d, 0.0, ptr::null(), &mut m), JfStatus::Domain);

        assert_eq!(jf_model_classical(1, &d, 0.5, ptr::null(), &mut m), JfStatus::Ok);
        let mut f = JfFluxes { f1: 0.0, f2: 0.0, f3: 0.0 };
        assert_eq!(jf_model_fluxes(m, 2.0, 0.0, 0.0, &mut f), JfStatus::Domain);
        assert_eq!(jf_model_fluxes(ptr::null(), 0.1, 0.1, 0.1, &mut f), JfStatus::NullPointer);
        jf_model_free(m);

        let missing = CString::new("/nonexistent/classical_c1.toml").unwrap();
        assert_ne!(jf_model_load_classical(missing.as_ptr(), &mut m), JfStatus::Ok);
        assert_eq!(jf_model_load_ml(ptr::null(), &mut m), JfStatus::NullPointer);
        // freeing null handles is a no-op
        jf_model_free(ptr::null_mut());
        jf_profiles_free(ptr::null_mut());
    }
}

#[test]
fn error_message_length_query() {
    let d = unit();
    let mut m = ptr::null_mut();
    unsafe {
        jf_model_classical(9, &d, 0.5, ptr::null(), &mut m);
        let n = jf_last_error_message(ptr::null_mut(), 0);
        assert_eq!(n, last_error().len());
        let mut small = [1 as c_char; 4];
        jf_last_error_message(small.as_mut_ptr(), small.len());
        assert_eq!(small[3], 0);
    }
}

#[test]
fn riemann_prediction_conserves_mass() {
    let d = reference();
    let mut cfg = JfSolverConfig {
        cells: 0,
        cfl: 0.0,
        lambda_min: 0.0,
        half_length: 0.0,
        lambda_min_mode: 0,
        density_scale: 0.0,
        flux_scale: 0.0,
    };
    let mut m = ptr::null_mut();
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(jf_solver_config_default(&mut cfg), JfStatus::Ok);
        assert_eq!(cfg.cells, 200);
        assert_eq!(jf_model_classical(1, &d, 0.05, ptr::null(), &mut m), JfStatus::Ok);
        assert_eq!(jf_riemann_prediction(m, &cfg, 10.0, &mut p), JfStatus::Ok);
        let n = jf_profiles_cells(p);
        assert_eq!(n, 200);
        let mut x = vec![0.0; n];
        let mut rho = vec![0.0; n];
        assert_eq!(jf_profiles_road(p, 1, x.as_mut_ptr(), rho.as_mut_ptr(), n), JfStatus::Ok);
        assert!(x[0] < x[n - 1] && x[n - 1] < 0.0);
        // congestion builds up in front of the junction on the on-ramp
        assert!(rho[n - 1] > 0.7 * d.rho_max[0]);
        assert_eq!(jf_profiles_road(p, 4, x.as_mut_ptr(), rho.as_mut_ptr(), n), JfStatus::InvalidArgument);
        assert_eq!(jf_profiles_road(p, 3, x.as_mut_ptr(), rho.as_mut_ptr(), n - 1), JfStatus::InvalidArgument);
        assert!(jf_profiles_balance_defect(p) < 1e-10);
        jf_profiles_free(p);

        cfg.cells = 1;
        assert_eq!(jf_riemann_prediction(m, &cfg, 10.0, &mut p), JfStatus::Config);
        jf_model_free(m);
    }
}

/// The generated header compiles as C and declares everything the smoke
/// program uses.
#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(format!("{dir}/include"))
        .arg(format!("{dir}/tests/smoke.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "{cc} rejected the header"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
