//! C interface to the coupling models and the junction Riemann prediction.
//!
//! Every function returns a [`JfStatus`]. On failure the message of the
//! last error on the calling thread is available through
//! [`jf_last_error_message`]. Handles are opaque and must be released with
//! the matching `*_free` function. Units are those of the diagrams: the
//! reference diagrams use km/h, vehicles/km and vehicles/h.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use junction_flow::classical::{ClassicalKind, ClassicalModel, ClassicalParams};
use junction_flow::coupling::CouplingModel;
use junction_flow::ml::read_model;
use junction_flow::pipeline::{load_toml, ClassicalFile};
use junction_flow::solver::{run_riemann_prediction, LambdaMode, RiemannPrediction, SolverConfig, Units};
use junction_flow::{Error, FundamentalDiagram, JunctionTraces, MarkerParams, RoadDiagrams};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument lies outside the domain of the operation.
    Domain = 2,
    Contract = 3,
    Config = 4,
    Numerical = 5,
    Invariant = 6,
    Parse = 7,
    Io = 8,
    /// An index or enumeration value is out of range.
    InvalidArgument = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

/// Classical coupling models.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JfClassical {
    C1 = 1,
    C2 = 2,
    C3 = 3,
    C4 = 4,
}

/// Greenshields parameters of roads 1, 2 and 3.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JfDiagrams {
    pub v_max: [f64; 3],
    pub rho_max: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JfFluxes {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Network solver settings. `density_scale` and `flux_scale` convert the
/// model units to vehicles/m and vehicles/s (1000 and 3600 for the
/// reference units).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JfSolverConfig {
    pub cells: usize,
    pub cfl: f64,
    pub lambda_min: f64,
    pub half_length: f64,
    /// Nonzero selects the smallest junction discrepancy for the
    /// relaxation speed instead of the largest.
    pub lambda_min_mode: i32,
    pub density_scale: f64,
    pub flux_scale: f64,
}

/// A coupling model.
pub struct JfModel {
    inner: Box<dyn CouplingModel>,
}

/// Density profiles of a Riemann prediction.
pub struct JfProfiles {
    inner: RiemannPrediction,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> JfStatus {
    match e {
        Error::Domain(_) => JfStatus::Domain,
        Error::Contract(_) => JfStatus::Contract,
        Error::Config(_) => JfStatus::Config,
        Error::Numerical(_) => JfStatus::Numerical,
        Error::Invariant(_) => JfStatus::Invariant,
        Error::Parse { .. } => JfStatus::Parse,
        Error::Io(_) | Error::Csv(_) => JfStatus::Io,
    }
}

/// Runs `f`, recording errors and panics.
fn guard<F: FnOnce() -> Result<(), (JfStatus, String)>>(f: F) -> JfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            JfStatus::Panic
        }
    }
}

fn lift(e: Error) -> (JfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (JfStatus, String) {
    (JfStatus::NullPointer, format!("{name} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, (JfStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| (JfStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

fn diagrams_from(d: &JfDiagrams) -> Result<RoadDiagrams, (JfStatus, String)> {
    let fd = |k: usize| FundamentalDiagram::new(d.v_max[k], d.rho_max[k]).map_err(lift);
    Ok(RoadDiagrams {
        road1: fd(0)?,
        road2: fd(1)?,
        road3: fd(2)?,
    })
}

unsafe fn emit_model(out: *mut *mut JfModel, inner: Box<dyn CouplingModel>) {
    *out = Box::into_raw(Box::new(JfModel { inner }));
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len - 1` bytes) and returns the full message
/// length in bytes. Pass a null `buf` to query the length.
#[no_mangle]
pub unsafe extern "C" fn jf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The fitted diagrams of the on-ramp recordings (km/h, vehicles/km).
#[no_mangle]
pub unsafe extern "C" fn jf_reference_diagrams(out: *mut JfDiagrams) -> JfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = RoadDiagrams::reference_onramp();
        let a = r.as_array();
        *out = JfDiagrams {
            v_max: [a[0].v_max(), a[1].v_max(), a[2].v_max()],
            rho_max: [a[0].rho_max(), a[1].rho_max(), a[2].rho_max()],
        };
        Ok(())
    })
}

/// Default solver settings in the reference units.
#[no_mangle]
pub unsafe extern "C" fn jf_solver_config_default(out: *mut JfSolverConfig) -> JfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = SolverConfig::default();
        *out = JfSolverConfig {
            cells: c.cells,
            cfl: c.cfl,
            lambda_min: c.lambda_min,
            half_length: c.half_length,
            lambda_min_mode: (c.lambda_mode == LambdaMode::Min) as i32,
            density_scale: c.units.density,
            flux_scale: c.units.flux,
        };
        Ok(())
    })
}

/// Creates a classical model. `markers` may be null, which selects the
/// maximal velocities; C1 requires that. `kind` takes a `JfClassical`
/// value.
#[no_mangle]
pub unsafe extern "C" fn jf_model_classical(
    kind: i32,
    diagrams: *const JfDiagrams,
    beta: f64,
    markers: *const f64,
    out: *mut *mut JfModel,
) -> JfStatus {
    guard(|| {
        if diagrams.is_null() {
            return Err(null("diagrams"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match kind {
            1 => ClassicalKind::C1,
            2 => ClassicalKind::C2,
            3 => ClassicalKind::C3,
            4 => ClassicalKind::C4,
            k => return Err((JfStatus::InvalidArgument, format!("unknown classical model {k}"))),
        };
        let fds = diagrams_from(&*diagrams)?;
        let markers = if markers.is_null() {
            fds.max_markers()
        } else {
            let w = std::slice::from_raw_parts(markers, 3);
            MarkerParams::new(w[0], w[1], w[2])
        };
        let model = ClassicalModel::new(kind, fds, ClassicalParams { beta, markers }).map_err(lift)?;
        emit_model(out, Box::new(model));
        Ok(())
    })
}

/// Loads a classical model file written by `fit-classical`.
#[no_mangle]
pub unsafe extern "C" fn jf_model_load_classical(path: *const c_char, out: *mut *mut JfModel) -> JfStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let file: ClassicalFile = load_toml(path).map_err(lift)?;
        emit_model(out, Box::new(file.model().map_err(lift)?));
        Ok(())
    })
}

/// Loads a network model file written by `train-ml`.
#[no_mangle]
pub unsafe extern "C" fn jf_model_load_ml(path: *const c_char, out: *mut *mut JfModel) -> JfStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        emit_model(out, Box::new(read_model(path).map_err(lift)?));
        Ok(())
    })
}

/// Coupling fluxes for the junction traces `(rho1, rho2, rho3)`.
#[no_mangle]
pub unsafe extern "C" fn jf_model_fluxes(
    model: *const JfModel,
    rho1: f64,
    rho2: f64,
    rho3: f64,
    out: *mut JfFluxes,
) -> JfStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let f = (*model).inner.fluxes(&JunctionTraces::new(rho1, rho2, rho3)).map_err(lift)?;
        *out = JfFluxes {
            f1: f.f1,
            f2: f.f2,
            f3: f.f3,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn jf_model_free(model: *mut JfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Riemann problem with road-wise constant data `(0.7, 0.5, 0.8) rho_max`
/// and Neumann ends, advanced to `horizon` seconds.
#[no_mangle]
pub unsafe extern "C" fn jf_riemann_prediction(
    model: *const JfModel,
    config: *const JfSolverConfig,
    horizon: f64,
    out: *mut *mut JfProfiles,
) -> JfStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if config.is_null() {
            return Err(null("config"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &*config;
        let cfg = SolverConfig {
            cells: c.cells,
            cfl: c.cfl,
            lambda_min: c.lambda_min,
            half_length: c.half_length,
            lambda_mode: if c.lambda_min_mode != 0 { LambdaMode::Min } else { LambdaMode::Max },
            units: Units {
                density: c.density_scale,
                flux: c.flux_scale,
            },
        };
        let p = run_riemann_prediction((*model).inner.as_ref(), &cfg, horizon).map_err(lift)?;
        *out = Box::into_raw(Box::new(JfProfiles { inner: p }));
        Ok(())
    })
}

/// Cells per road.
#[no_mangle]
pub unsafe extern "C" fn jf_profiles_cells(profiles: *const JfProfiles) -> usize {
    if profiles.is_null() {
        return 0;
    }
    (*profiles).inner.density[0].len()
}

/// Copies the cell centers (meters) and final densities (model units) of
/// `road` (1, 2 or 3) into buffers of `len` entries. Either buffer may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn jf_profiles_road(
    profiles: *const JfProfiles,
    road: i32,
    x: *mut f64,
    density: *mut f64,
    len: usize,
) -> JfStatus {
    guard(|| {
        if profiles.is_null() {
            return Err(null("profiles"));
        }
        if !(1..=3).contains(&road) {
            return Err((JfStatus::InvalidArgument, format!("road {road} is not 1, 2 or 3")));
        }
        let p = &(*profiles).inner;
        let k = road as usize - 1;
        let n = p.density[k].len();
        if len < n {
            return Err((JfStatus::InvalidArgument, format!("buffer holds {len} of {n} cells")));
        }
        if !x.is_null() {
            ptr::copy_nonoverlapping(p.x[k].as_ptr(), x, n);
        }
        if !density.is_null() {
            ptr::copy_nonoverlapping(p.density[k].as_ptr(), density, n);
        }
        Ok(())
    })
}

/// Vehicles gained minus vehicles exchanged through the boundaries,
/// relative to the initial mass.
#[no_mangle]
pub unsafe extern "C" fn jf_profiles_balance_defect(profiles: *const JfProfiles) -> f64 {
    if profiles.is_null() {
        return f64::NAN;
    }
    (*profiles).inner.balance_defect()
}

#[no_mangle]
pub unsafe extern "C" fn jf_profiles_free(profiles: *mut JfProfiles) {
    if !profiles.is_null() {
        drop(Box::from_raw(profiles));
    }
}
