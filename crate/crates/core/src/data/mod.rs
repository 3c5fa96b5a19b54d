//! Trajectory data: control-volume aggregation into macroscopic series,
//! boundary flows, dataset metadata and a synthetic generator.

mod boundary;
mod geometry;
pub mod io;
mod manifest;
mod series;
mod synth;
mod trajectory;

pub use boundary::{
    boundary_crossings, boundary_histogram, crossing_time, histogram, kde_boundary_flux, BoundaryFlow,
    EXTRAPOLATION_CAP_S, KDE_BANDWIDTH_S,
};
pub use geometry::{JunctionGeometry, Rect, VolumeId, HALF_LENGTH_M};
pub use manifest::{
    recorded_manifest, split_datasets, split_of, DatasetManifest, DatasetSplit, Split, APPLICATION_IDS, TEST_IDS,
    TRAIN_IDS,
};
pub use series::{
    apply_delays, empirical_density, empirical_series, empirical_series_with_step, empirical_velocity,
    EmpiricalSeries, RoadSeries, GRID_STEP,
};
pub use synth::{corpus_configs, synth_generate, SynthConfig};
pub use trajectory::{Cubic, CubicSegment, Trajectory};

/// Trajectories recorded on `[0, duration]` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: u32,
    pub duration: f64,
    pub trajectories: Vec<Trajectory>,
}
