//! End-to-end steps from trajectory datasets to fitted models and
//! boundary-flux simulations, shared by the command-line tool and tests.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    estimate_delays, fit_classical, fit_fundamental_diagram, ClassicalFit, DeConfig, DelayBounds, DelayEstimate,
    FdFit, SpeedSample, TrainingSample,
};
use crate::classical::{ClassicalKind, ClassicalModel, ClassicalParams};
use crate::coupling::CouplingModel;
use crate::data::{
    apply_delays, boundary_crossings, empirical_series, BoundaryFlow, Dataset, EmpiricalSeries, JunctionGeometry,
};
use crate::error::{Error, Result};
use crate::junction::{FundamentalDiagram, MarkerParams, RoadDiagrams};
use crate::solver::{run_boundary_experiment, BoundaryExperiment, SolverConfig};

/// A dataset's series after the estimated delays were applied.
#[derive(Debug, Clone)]
pub struct AlignedSeries {
    pub delays: DelayEstimate,
    pub series: EmpiricalSeries,
}

pub fn align_dataset(dataset: &Dataset, geometry: &JunctionGeometry, bounds: &DelayBounds) -> Result<AlignedSeries> {
    let raw = empirical_series(dataset, geometry)?;
    let [f1, f2, f3] = raw.fluxes();
    let delays = estimate_delays(f1, f2, f3, bounds)?;
    let series = apply_delays(&raw, delays.tau2, delays.tau3)?;
    Ok(AlignedSeries { delays, series })
}

/// Lanes of roads 1, 2 and 3: the on-ramp has one, the freeway the main
/// lane count on both sides of the junction.
pub fn road_lanes(geometry: &JunctionGeometry) -> [u32; 3] {
    [1, geometry.main_lane_count, geometry.main_lane_count]
}

/// Fits one diagram per road to the pooled density/velocity samples.
pub fn fit_road_diagrams(series: &[EmpiricalSeries], lanes: [u32; 3], de: &DeConfig) -> Result<[FdFit; 3]> {
    let fit = |road: usize| -> Result<FdFit> {
        let samples: Vec<SpeedSample> = series.iter().flat_map(|s| s.speed_samples(road)).collect();
        fit_fundamental_diagram(&samples, lanes[road], de)
            .map_err(|e| Error::domain(format!("road {}: {e}", road + 1)))
    };
    Ok([fit(0)?, fit(1)?, fit(2)?])
}

pub fn diagrams_of(fits: &[FdFit; 3]) -> RoadDiagrams {
    RoadDiagrams {
        road1: fits[0].diagram,
        road2: fits[1].diagram,
        road3: fits[2].diagram,
    }
}

pub fn training_samples(series: &[EmpiricalSeries], fds: &RoadDiagrams) -> Vec<TrainingSample> {
    series.iter().flat_map(|s| s.samples(fds)).collect()
}

pub fn fit_classical_models(
    kinds: &[ClassicalKind],
    fds: &RoadDiagrams,
    samples: &[TrainingSample],
    de: &DeConfig,
) -> Result<Vec<ClassicalFit>> {
    kinds.iter().map(|&k| fit_classical(k, fds, samples, None, de)).collect()
}

/// Smoothed boundary flows of roads 1, 2 and 3 in vehicles/s.
pub fn boundary_flows(dataset: &Dataset, geometry: &JunctionGeometry, bandwidth: f64) -> [BoundaryFlow; 3] {
    boundary_crossings(dataset, geometry).map(|t| BoundaryFlow::new(t, bandwidth))
}

/// Boundary-flux experiment over the recording interval of `dataset`.
pub fn simulate_dataset<M: CouplingModel + ?Sized>(
    model: &M,
    dataset: &Dataset,
    geometry: &JunctionGeometry,
    config: &SolverConfig,
    bandwidth: f64,
    output_step: f64,
) -> Result<BoundaryExperiment> {
    let flows = boundary_flows(dataset, geometry, bandwidth);
    run_boundary_experiment(model, config, &flows, dataset.duration, output_step)
}

/// A fitted diagram as stored in `fd.toml`, in km/h and vehicles/km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedRoad {
    pub v_max: f64,
    pub rho_max: f64,
    pub lanes: u32,
    pub objective: f64,
    pub bound_active: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramsFile {
    pub road1: FittedRoad,
    pub road2: FittedRoad,
    pub road3: FittedRoad,
}

impl DiagramsFile {
    pub fn new(fits: &[FdFit; 3], lanes: [u32; 3]) -> Self {
        let road = |k: usize| FittedRoad {
            v_max: fits[k].diagram.v_max(),
            rho_max: fits[k].diagram.rho_max(),
            lanes: lanes[k],
            objective: fits[k].objective,
            bound_active: fits[k].bound_active,
            degenerate: fits[k].degenerate,
        };
        Self {
            road1: road(0),
            road2: road(1),
            road3: road(2),
        }
    }

    pub fn diagrams(&self) -> Result<RoadDiagrams> {
        let fd = |r: &FittedRoad| FundamentalDiagram::new(r.v_max, r.rho_max);
        Ok(RoadDiagrams {
            road1: fd(&self.road1)?,
            road2: fd(&self.road2)?,
            road3: fd(&self.road3)?,
        })
    }
}

/// Parameters of a fitted classical model, with the diagrams it was fitted
/// on so the file is self-contained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFile {
    pub model: ClassicalKind,
    pub beta: f64,
    /// Markers in km/h.
    pub markers: MarkerParams,
    /// Total training error.
    pub error: f64,
    pub diagrams: RoadDiagrams,
}

impl ClassicalFile {
    pub fn new(fit: &ClassicalFit) -> Self {
        let p = fit.model.params();
        Self {
            model: fit.model.kind(),
            beta: p.beta,
            markers: p.markers,
            error: fit.error,
            diagrams: *fit.model.diagrams(),
        }
    }

    pub fn model(&self) -> Result<ClassicalModel> {
        ClassicalModel::new(
            self.model,
            self.diagrams,
            ClassicalParams {
                beta: self.beta,
                markers: self.markers,
            },
        )
    }
}

/// Writes `value` as TOML below a `header` comment line.
pub fn save_toml<T: Serialize>(path: impl AsRef<Path>, header: &str, value: &T) -> Result<()> {
    let body = toml::to_string(value).map_err(|e| Error::Invariant(format!("TOML serialization failed: {e}")))?;
    fs::write(path, format!("{header}\n{body}"))?;
    Ok(())
}

pub fn load_toml<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}
