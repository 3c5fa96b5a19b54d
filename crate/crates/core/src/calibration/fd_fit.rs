//! Least-squares fit of Greenshields diagrams to density/velocity samples.
//!
//! Densities are in vehicles per km, velocities in km/h. The maximal density
//! is capped by the stagnation density of one vehicle per 7.5 m and lane.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{minimize, DeConfig};
use crate::error::{Error, Result};
use crate::junction::FundamentalDiagram;

/// Road length occupied by a stopped vehicle, in meters.
pub const VEHICLE_SPACING_M: f64 = 7.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    pub density: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdFit {
    pub diagram: FundamentalDiagram,
    /// Sum of squared velocity residuals.
    pub objective: f64,
    pub bound_active: bool,
    /// All samples share one density, so the maximal density is not
    /// identifiable and was set to the bound.
    pub degenerate: bool,
}

/// Upper bound of the maximal density for `lanes` lanes, per km.
pub fn stagnation_bound(lanes: u32) -> f64 {
    lanes as f64 * 1000.0 / VEHICLE_SPACING_M
}

/// Best `v_max` for a fixed `rho_max` and the resulting residual.
fn profile(samples: &[SpeedSample], rho_max: f64) -> (f64, f64) {
    let (mut uu, mut uv) = (0.0, 0.0);
    for s in samples {
        let u = 1.0 - s.density / rho_max;
        uu += u * u;
        uv += u * s.velocity;
    }
    let v_max = if uu > 0.0 { (uv / uu).max(f64::MIN_POSITIVE) } else { f64::MIN_POSITIVE };
    (v_max, objective(samples, v_max, rho_max))
}

fn objective(samples: &[SpeedSample], v_max: f64, rho_max: f64) -> f64 {
    samples
        .iter()
        .map(|s| {
            let r = v_max - v_max / rho_max * s.density - s.velocity;
            r * r
        })
        .sum()
}

/// Fits `v = v_max (1 - rho / rho_max)` with `rho_max` between the largest
/// observed density and the stagnation bound. Zero-density samples are
/// dropped before fitting.
pub fn fit_fundamental_diagram(samples: &[SpeedSample], lanes: u32, de: &DeConfig) -> Result<FdFit> {
    if lanes == 0 {
        return Err(Error::domain("a road needs at least one lane"));
    }
    let samples: Vec<SpeedSample> = samples.iter().copied().filter(|s| s.density != 0.0).collect();
    if samples.is_empty() {
        return Err(Error::domain("no samples with positive density"));
    }
    if samples
        .iter()
        .any(|s| !(s.density > 0.0 && s.density.is_finite() && s.velocity.is_finite()))
    {
        return Err(Error::domain("densities must be positive and samples finite"));
    }
    let upper = stagnation_bound(lanes);
    let lower = samples.iter().map(|s| s.density).fold(0.0, f64::max);
    if lower > upper {
        return Err(Error::domain(format!(
            "observed density {lower} exceeds the stagnation bound {upper}"
        )));
    }

    let first = samples[0].density;
    if samples.iter().all(|s| s.density == first) {
        let (v_max, value) = profile(&samples, upper);
        warn!("all samples at density {first}; maximal density set to the bound {upper}");
        return Ok(FdFit {
            diagram: FundamentalDiagram::new(v_max, upper)?,
            objective: value,
            bound_active: true,
            degenerate: true,
        });
    }

    let result = minimize(|x| profile(&samples, x[0]).1, &[(lower, upper)], de)?;
    let mut best_rho = result.best[0];
    let (mut best_v, mut best_value) = profile(&samples, best_rho);

    // Unconstrained linear regression v = a + b rho, kept when feasible.
    let n = samples.len() as f64;
    let mean_r = samples.iter().map(|s| s.density).sum::<f64>() / n;
    let mean_v = samples.iter().map(|s| s.velocity).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.density - mean_r).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.density - mean_r) * (s.velocity - mean_v)).sum();
    let b = sxy / sxx;
    let a = mean_v - b * mean_r;
    if a > 0.0 && b < 0.0 {
        let rho = -a / b;
        if (lower..=upper).contains(&rho) {
            let value = objective(&samples, a, rho);
            if value <= best_value {
                best_rho = rho;
                best_v = a;
                best_value = value;
            }
        }
    }

    Ok(FdFit {
        diagram: FundamentalDiagram::new(best_v, best_rho)?,
        objective: best_value,
        bound_active: best_rho == upper,
        degenerate: false,
    })
}
