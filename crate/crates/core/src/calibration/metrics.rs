use super::TrainingSample;
use crate::coupling::CouplingModel;
use crate::error::{Error, Result};

/// Root-mean-square over the grid points of a series.
pub fn rms_norm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("rms of an empty series"));
    }
    let sum: f64 = values.iter().map(|v| v * v).sum();
    Ok((sum / values.len() as f64).sqrt())
}

/// Squared RMS flux error per road and their mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelError {
    pub roads: [f64; 3],
    pub total: f64,
}

pub fn model_error<M: CouplingModel + ?Sized>(
    model: &M,
    samples: &[TrainingSample],
) -> Result<ModelError> {
    if samples.is_empty() {
        return Err(Error::domain("model error over no samples"));
    }
    let mut sums = [0.0; 3];
    for s in samples {
        let pred = model.fluxes(&s.traces)?.as_array();
        let target = s.target.as_array();
        for k in 0..3 {
            let e = target[k] - pred[k];
            sums[k] += e * e;
        }
    }
    let roads = sums.map(|v| v / samples.len() as f64);
    Ok(ModelError {
        roads,
        total: roads.iter().sum::<f64>() / 3.0,
    })
}
