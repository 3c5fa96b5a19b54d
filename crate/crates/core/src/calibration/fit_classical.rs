use super::{minimize, model_error, DeConfig, TrainingSample};
use crate::classical::{ClassicalKind, ClassicalModel, ClassicalParams};
use crate::error::{Error, Result};
use crate::junction::{MarkerParams, RoadDiagrams};

/// Distance of the priority from 0 and 1 for models that need it strictly
/// inside the unit interval.
pub const OPEN_BETA_MARGIN: f64 = 1e-3;

/// Markers are searched in `[MARKER_FLOOR * v_max, v_max]`.
pub const MARKER_FLOOR: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct ClassicalFit {
    pub model: ClassicalModel,
    pub error: f64,
    pub history: Vec<f64>,
}

/// Search box `[beta, w1, w2, w3]` (C1 fits `beta` only).
pub fn classical_bounds(kind: ClassicalKind, fds: &RoadDiagrams) -> Vec<(f64, f64)> {
    let beta = if kind.needs_open_beta() {
        (OPEN_BETA_MARGIN, 1.0 - OPEN_BETA_MARGIN)
    } else {
        (0.0, 1.0)
    };
    let mut bounds = vec![beta];
    if kind.uses_markers() {
        for fd in fds.as_array() {
            bounds.push((MARKER_FLOOR * fd.v_max(), fd.v_max()));
        }
    }
    bounds
}

fn params_from(kind: ClassicalKind, fds: &RoadDiagrams, x: &[f64]) -> ClassicalParams {
    let markers = if kind.uses_markers() {
        MarkerParams::new(x[1], x[2], x[3])
    } else {
        fds.max_markers()
    };
    ClassicalParams { beta: x[0], markers }
}

/// Minimizes the total model error over the parameters of `kind` by
/// differential evolution. `bounds` defaults to [`classical_bounds`].
pub fn fit_classical(
    kind: ClassicalKind,
    fds: &RoadDiagrams,
    samples: &[TrainingSample],
    bounds: Option<&[(f64, f64)]>,
    de: &DeConfig,
) -> Result<ClassicalFit> {
    if samples.is_empty() {
        return Err(Error::domain("no samples to fit"));
    }
    let default = classical_bounds(kind, fds);
    let bounds = bounds.unwrap_or(&default);
    if bounds.len() != default.len() {
        return Err(Error::domain(format!(
            "{kind} has {} parameters, got {} bounds",
            default.len(),
            bounds.len()
        )));
    }
    for (b, d) in bounds.iter().zip(&default) {
        if !(b.0 <= b.1 && b.0 >= d.0 && b.1 <= d.1) {
            return Err(Error::domain(format!(
                "bounds [{}, {}] leave the admissible range [{}, {}]",
                b.0, b.1, d.0, d.1
            )));
        }
    }
    let result = minimize(
        |x| {
            ClassicalModel::new(kind, *fds, params_from(kind, fds, x))
                .and_then(|m| model_error(&m, samples))
                .map_or(f64::INFINITY, |e| e.total)
        },
        bounds,
        de,
    )?;
    let model = ClassicalModel::new(kind, *fds, params_from(kind, fds, &result.best))?;
    Ok(ClassicalFit {
        model,
        error: result.value,
        history: result.history,
    })
}
