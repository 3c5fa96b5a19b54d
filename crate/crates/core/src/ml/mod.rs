//! Machine-learning coupling models ML1-ML3.
//!
//! Traces are extended by their fluxes, normalized, and fed through a dense
//! sigmoid network that returns two parameters in `(0, 1)`. In parallel the
//! demand and supply of the traces are computed. The output layer maps the
//! parameters onto the admissible set, so every prediction satisfies the
//! demand/supply conditions and Kirchhoff's law regardless of the weights.

mod io;
mod network;

pub use io::{read_model, write_model, ModelFile};
pub use network::{sigmoid, Activations, DenseLayer, LayerShape, Network, Scratch};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::TrainingSample;
use crate::coupling::CouplingModel;
use crate::error::{Error, Result};
use crate::junction::{AdmissibleSet, CouplingFluxes, JunctionTraces, RoadDiagrams};

/// Width of the network input: three traces and their fluxes.
pub const INPUT_WIDTH: usize = 6;
pub const OUTPUT_WIDTH: usize = 2;

/// Smallest standard deviation used by the input normalization.
pub const MIN_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Single dense layer.
    Ml1,
    /// Four dense layers.
    Ml2,
    /// Four dense layers trained with the consistency penalty.
    Ml3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Self::Ml1, Self::Ml2, Self::Ml3];

    /// Layer widths from input to output.
    pub fn widths(self) -> &'static [usize] {
        match self {
            Self::Ml1 => &[6, 2],
            Self::Ml2 | Self::Ml3 => &[6, 12, 75, 75, 2],
        }
    }

    pub fn consistency_training(self) -> bool {
        self == Self::Ml3
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::Ml1 => "ml1",
            Self::Ml2 => "ml2",
            Self::Ml3 => "ml3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ml1" => Ok(Self::Ml1),
            "ml2" => Ok(Self::Ml2),
            "ml3" => Ok(Self::Ml3),
            other => Err(Error::config(format!("unknown ML variant '{other}'"))),
        }
    }
}

/// Frozen component-wise affine map `x -> (x - shift) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub shift: [f64; INPUT_WIDTH],
    pub scale: [f64; INPUT_WIDTH],
}

impl NormalizationParams {
    pub fn identity() -> Self {
        Self {
            shift: [0.0; INPUT_WIDTH],
            scale: [1.0; INPUT_WIDTH],
        }
    }

    pub fn new(shift: [f64; INPUT_WIDTH], scale: [f64; INPUT_WIDTH]) -> Result<Self> {
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) || shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::domain("normalization scales must be positive and finite"));
        }
        Ok(Self { shift, scale })
    }

    /// Z-score of the flux-extended training traces, with the standard
    /// deviation floored at [`MIN_SCALE`].
    pub fn fit<'a, I>(fds: &RoadDiagrams, traces: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a JunctionTraces>,
    {
        let mut n = 0usize;
        let mut mean = [0.0; INPUT_WIDTH];
        let mut m2 = [0.0; INPUT_WIDTH];
        for t in traces {
            let x = flux_extension(t, fds)?;
            n += 1;
            for i in 0..INPUT_WIDTH {
                let delta = x[i] - mean[i];
                mean[i] += delta / n as f64;
                m2[i] += delta * (x[i] - mean[i]);
            }
        }
        if n == 0 {
            return Err(Error::domain("cannot fit a normalization without samples"));
        }
        let mut scale = [0.0; INPUT_WIDTH];
        for i in 0..INPUT_WIDTH {
            scale[i] = (m2[i] / n as f64).sqrt().max(MIN_SCALE);
        }
        Self::new(mean, scale)
    }

    #[inline]
    pub fn apply(&self, x: &[f64; INPUT_WIDTH]) -> [f64; INPUT_WIDTH] {
        let mut out = [0.0; INPUT_WIDTH];
        for i in 0..INPUT_WIDTH {
            out[i] = (x[i] - self.shift[i]) / self.scale[i];
        }
        out
    }
}

/// `(rho1, rho2, rho3) -> (rho1, rho2, rho3, f1(rho1), f2(rho2), f3(rho3))`.
pub fn flux_extension(traces: &JunctionTraces, fds: &RoadDiagrams) -> Result<[f64; INPUT_WIDTH]> {
    fds.check_traces(traces)?;
    Ok(flux_extension_unchecked(traces, fds))
}

#[inline]
fn flux_extension_unchecked(traces: &JunctionTraces, fds: &RoadDiagrams) -> [f64; INPUT_WIDTH] {
    [
        traces.rho1,
        traces.rho2,
        traces.rho3,
        fds.road1.flux_unchecked(traces.rho1),
        fds.road2.flux_unchecked(traces.rho2),
        fds.road3.flux_unchecked(traces.rho3),
    ]
}

/// Demands of roads 1 and 2 and supply of road 3 with the plain fluxes.
pub fn demand_supply_layer(traces: &JunctionTraces, fds: &RoadDiagrams) -> Result<AdmissibleSet> {
    AdmissibleSet::from_traces(fds, traces)
}

/// Intermediate values of one forward pass, reused by the backward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fluxes: CouplingFluxes,
    pub theta: [f64; 2],
    pub admissible: AdmissibleSet,
    activations: Activations,
    scratch: Scratch,
}

impl Default for Evaluation {
    fn default() -> Self {
        Self {
            fluxes: CouplingFluxes::zero(),
            theta: [0.0; 2],
            admissible: AdmissibleSet {
                d1: 0.0,
                d2: 0.0,
                s3: 0.0,
            },
            activations: Activations::default(),
            scratch: Scratch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlCouplingModel {
    variant: Variant,
    fds: RoadDiagrams,
    norm: NormalizationParams,
    network: Network,
}

impl MlCouplingModel {
    pub fn new(
        variant: Variant,
        fds: RoadDiagrams,
        norm: NormalizationParams,
        network: Network,
    ) -> Result<Self> {
        let widths = network.widths();
        if widths.as_slice() != variant.widths() {
            return Err(Error::contract(format!(
                "{variant} needs layer widths {:?}, got {widths:?}",
                variant.widths()
            )));
        }
        Ok(Self {
            variant,
            fds,
            norm,
            network,
        })
    }

    /// Model with seeded Glorot-uniform weights and zero biases.
    pub fn initialized(
        variant: Variant,
        fds: RoadDiagrams,
        norm: NormalizationParams,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let network = Network::glorot_uniform(variant.widths(), &mut rng);
        Self {
            variant,
            fds,
            norm,
            network,
        }
    }

    /// Model with all weights and biases zero.
    pub fn zeroed(variant: Variant, fds: RoadDiagrams, norm: NormalizationParams) -> Self {
        Self {
            variant,
            fds,
            norm,
            network: Network::zeros(variant.widths()),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn normalization(&self) -> &NormalizationParams {
        &self.norm
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn parameter_count(&self) -> usize {
        self.network.parameter_count()
    }

    /// Runs the dense network on an already normalized input.
    pub fn ann_forward(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != INPUT_WIDTH {
            return Err(Error::contract(format!(
                "network input must have {INPUT_WIDTH} components, got {}",
                x.len()
            )));
        }
        let out = self.network.forward(x);
        Ok((out[0], out[1]))
    }

    /// Forward pass keeping every activation for differentiation.
    pub fn evaluate(&self, traces: &JunctionTraces) -> Result<Evaluation> {
        let mut eval = Evaluation::default();
        self.evaluate_into(traces, &mut eval)?;
        Ok(eval)
    }

    /// [`evaluate`](Self::evaluate) reusing the buffers of `eval`.
    pub fn evaluate_into(&self, traces: &JunctionTraces, eval: &mut Evaluation) -> Result<()> {
        self.fds.check_traces(traces)?;
        let x = self.norm.apply(&flux_extension_unchecked(traces, &self.fds));
        self.network.forward_all(&x, &mut eval.activations);
        let out = eval.activations.output();
        eval.theta = [out[0], out[1]];
        eval.admissible =
            AdmissibleSet::with_markers_unchecked(&self.fds, traces, &self.fds.max_markers());
        eval.fluxes = eval.admissible.param_to_fluxes_unchecked(eval.theta[0], eval.theta[1]);
        Ok(())
    }

    /// Accumulates `weight * d(g . fluxes)/d(params)` into `grad`, where
    /// `flux_grad = d(loss)/d(f1, f2, f3)` at the evaluation point.
    ///
    /// Kinks of the min-clamps take the derivative of the first argument.
    pub fn accumulate_gradient(&self, eval: &mut Evaluation, flux_grad: [f64; 3], grad: &mut [f64]) {
        let [g1, g2, g3] = flux_grad;
        // f3 = f1 + f2
        let df1 = g1 + g3;
        let df2 = g2 + g3;
        let g = &eval.admissible;
        let [t1, t2] = eval.theta;
        let a = g.d1.min(g.s3);
        let f1 = t1 * a;
        let rest = g.s3 - f1;
        let (b, db_dt1) = if g.d2 <= rest { (g.d2, 0.0) } else { (rest, -a) };
        let dtheta = [df1 * a + df2 * t2 * db_dt1, df2 * b];
        self.network.backward(&eval.activations, &dtheta, grad, &mut eval.scratch);
    }

    /// Gradient of the mean squared flux error over `batch`.
    pub fn mse_gradient(&self, batch: &[TrainingSample]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::domain("gradient of an empty batch"));
        }
        let mut grad = vec![0.0; self.parameter_count()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len() as f64;
        let mut eval = Evaluation::default();
        for s in batch {
            self.evaluate_into(&s.traces, &mut eval)?;
            let (l, fg) = squared_error(&eval.fluxes, &s.target);
            loss += l * scale;
            self.accumulate_gradient(&mut eval, fg.map(|v| v * scale), &mut grad);
        }
        Ok((loss, grad))
    }
}

/// Squared error averaged over the three roads and its flux derivative.
#[inline]
pub(crate) fn squared_error(pred: &CouplingFluxes, target: &CouplingFluxes) -> (f64, [f64; 3]) {
    let e = [pred.f1 - target.f1, pred.f2 - target.f2, pred.f3 - target.f3];
    let loss = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 3.0;
    (loss, e.map(|v| 2.0 * v / 3.0))
}

impl CouplingModel for MlCouplingModel {
    fn name(&self) -> String {
        self.variant.id().to_string()
    }

    fn diagrams(&self) -> &RoadDiagrams {
        &self.fds
    }

    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes> {
        self.fds.check_traces(traces)?;
        let x = self.norm.apply(&flux_extension_unchecked(traces, &self.fds));
        let out = self.network.forward(&x);
        let g = AdmissibleSet::with_markers_unchecked(&self.fds, traces, &self.fds.max_markers());
        Ok(g.param_to_fluxes_unchecked(out[0], out[1]))
    }
}

#[cfg(test)]
mod tests;
