//! The common interface of all coupling models and the consistency check.

use crate::error::Result;
use crate::junction::{fluxes_to_coupling_data, CouplingFluxes, JunctionTraces, RoadDiagrams};

/// A coupling model in flux form: maps junction traces to coupling fluxes.
pub trait CouplingModel: Send + Sync {
    fn name(&self) -> String;

    /// Fundamental diagrams of the roads carrying the traces.
    fn diagrams(&self) -> &RoadDiagrams;

    /// Diagrams the model uses inside the junction. Models with Lagrangian
    /// markers replace each maximal velocity by its marker.
    fn junction_diagrams(&self) -> Result<RoadDiagrams> {
        Ok(*self.diagrams())
    }

    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes>;
}

impl<M: CouplingModel + ?Sized> CouplingModel for Box<M> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn diagrams(&self) -> &RoadDiagrams {
        (**self).diagrams()
    }
    fn junction_diagrams(&self) -> Result<RoadDiagrams> {
        (**self).junction_diagrams()
    }
    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes> {
        (**self).fluxes(traces)
    }
}

impl<M: CouplingModel + ?Sized> CouplingModel for &M {
    fn name(&self) -> String {
        (**self).name()
    }
    fn diagrams(&self) -> &RoadDiagrams {
        (**self).diagrams()
    }
    fn junction_diagrams(&self) -> Result<RoadDiagrams> {
        (**self).junction_diagrams()
    }
    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes> {
        (**self).fluxes(traces)
    }
}

/// Applies the model, converts its fluxes to coupling data, applies the
/// model again on that data and returns the max-norm flux difference.
pub fn check_consistency<M: CouplingModel + ?Sized>(
    model: &M,
    traces: &JunctionTraces,
) -> Result<f64> {
    let first = model.fluxes(traces)?;
    let data = fluxes_to_coupling_data(&model.junction_diagrams()?, traces, &first)?;
    let second = model.fluxes(&data)?;
    Ok(first.max_abs_diff(&second))
}

/// Always returns zero fluxes. Serves as the no-throughput baseline.
#[derive(Debug, Clone)]
pub struct ZeroFlux {
    fds: RoadDiagrams,
}

impl ZeroFlux {
    pub fn new(fds: RoadDiagrams) -> Self {
        Self { fds }
    }
}

impl CouplingModel for ZeroFlux {
    fn name(&self) -> String {
        "zero".into()
    }
    fn diagrams(&self) -> &RoadDiagrams {
        &self.fds
    }
    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes> {
        self.fds.check_traces(traces)?;
        Ok(CouplingFluxes::zero())
    }
}
