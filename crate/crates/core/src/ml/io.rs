//! JSON model files.
//!
//! Field order: `format`, `version`, `meta`, `variant`, `diagrams`,
//! `normalization` (`shift`, `scale`), `layers` (each `inputs`, `outputs`,
//! `weights` in row-major `outputs x inputs` order, `bias`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerShape, MlCouplingModel, Network, NormalizationParams, Variant};
use crate::error::{Error, Result};
use crate::junction::RoadDiagrams;

pub const MODEL_FORMAT: &str = "junction-flow-ml";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    format: String,
    version: u32,
    /// Free-form provenance such as seed and epoch count.
    pub meta: BTreeMap<String, String>,
    variant: Variant,
    diagrams: RoadDiagrams,
    normalization: NormalizationParams,
    layers: Vec<LayerRecord>,
}

impl ModelFile {
    pub fn from_model(model: &MlCouplingModel, meta: BTreeMap<String, String>) -> Self {
        let layers = model
            .network()
            .layers()
            .map(|l| LayerRecord {
                inputs: l.shape.inputs,
                outputs: l.shape.outputs,
                weights: l.weights.to_vec(),
                bias: l.bias.to_vec(),
            })
            .collect();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            meta,
            variant: model.variant(),
            diagrams: *crate::coupling::CouplingModel::diagrams(model),
            normalization: *model.normalization(),
            layers,
        }
    }

    pub fn into_model(self) -> Result<MlCouplingModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::parse("model file", format!("unknown format '{}'", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::parse("model file", format!("unsupported version {}", self.version)));
        }
        let layers: Vec<_> = self
            .layers
            .into_iter()
            .map(|l| {
                (
                    LayerShape {
                        inputs: l.inputs,
                        outputs: l.outputs,
                    },
                    l.weights,
                    l.bias,
                )
            })
            .collect();
        let network = Network::from_layers(&layers)
            .ok_or_else(|| Error::parse("model file", "layer sizes do not chain"))?;
        if network.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::parse("model file", "non-finite parameter"));
        }
        let norm = NormalizationParams::new(self.normalization.shift, self.normalization.scale)?;
        MlCouplingModel::new(self.variant, self.diagrams, norm, network)
    }
}

pub fn write_model(
    path: impl AsRef<Path>,
    model: &MlCouplingModel,
    meta: BTreeMap<String, String>,
) -> Result<()> {
    let file = ModelFile::from_model(model, meta);
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Invariant(format!("model serialization failed: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<MlCouplingModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    file.into_model()
}
