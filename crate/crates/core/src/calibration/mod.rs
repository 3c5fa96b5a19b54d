//! Parameter estimation: model errors, differential evolution for the
//! classical models, AMSGrad training of the ML models, delay estimation,
//! fundamental-diagram fitting and the C1' capability benchmark.

mod amsgrad;
mod benchmark;
mod de;
mod delays;
mod fd_fit;
mod fit_classical;
mod metrics;
mod train;

pub use amsgrad::{AmsGrad, AmsGradConfig};
pub use benchmark::{
    generate_c1prime_dataset, run_capability_benchmark, BenchmarkConfig, BenchmarkReport,
    BenchmarkRow, BENCHMARK_EPOCHS,
};
pub use de::{minimize, DeConfig, DeResult};
pub use delays::{estimate_delays, DelayBounds, DelayEstimate};
pub use fd_fit::{fit_fundamental_diagram, stagnation_bound, FdFit, SpeedSample};
pub use fit_classical::{classical_bounds, fit_classical, ClassicalFit};
pub use metrics::{model_error, rms_norm, ModelError};
pub use train::{consistency_penalty, dataset_loss, train_ml, EvalSchedule, LossRecord, TrainingReport};

use serde::{Deserialize, Serialize};

use crate::junction::{CouplingFluxes, JunctionTraces};

/// Traces at the junction together with the fluxes observed for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub traces: JunctionTraces,
    pub target: CouplingFluxes,
    /// Time of the sample on the data grid, in seconds.
    pub time: f64,
}

impl TrainingSample {
    pub fn new(traces: JunctionTraces, target: CouplingFluxes) -> Self {
        Self {
            traces,
            target,
            time: 0.0,
        }
    }

    pub fn at(time: f64, traces: JunctionTraces, target: CouplingFluxes) -> Self {
        Self {
            traces,
            target,
            time,
        }
    }
}
