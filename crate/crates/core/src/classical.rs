//! Classical coupling models C1-C4.
//!
//! * C1 maximizes the junction flux; a right-of-way parameter splits the
//!   supply when it is the bottleneck.
//! * C2 is C1 evaluated with marker-scaled flux functions in the junction.
//! * C3 maximizes the flux under a fixed proportional split.
//! * C4 shares its coupling fluxes with C3. Its homogenized pressure acts on
//!   the density boundary data only, so at flux level the two coincide; it
//!   keeps its own identity for fitting and reporting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingModel;
use crate::error::{Error, Result};
use crate::junction::{
    AdmissibleSet, CouplingFluxes, FundamentalDiagram, JunctionTraces, MarkerParams, RoadDiagrams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalKind {
    C1,
    C2,
    C3,
    C4,
}

impl ClassicalKind {
    pub const ALL: [ClassicalKind; 4] = [Self::C1, Self::C2, Self::C3, Self::C4];

    /// Whether the model carries Lagrangian markers.
    pub fn uses_markers(self) -> bool {
        !matches!(self, Self::C1)
    }

    /// Whether the priority must lie strictly inside `(0, 1)`.
    pub fn needs_open_beta(self) -> bool {
        matches!(self, Self::C3 | Self::C4)
    }

    pub fn id(self) -> &'static str {
        match self {
            Self::C1 => "c1",
            Self::C2 => "c2",
            Self::C3 => "c3",
            Self::C4 => "c4",
        }
    }
}

impl fmt::Display for ClassicalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ClassicalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(Self::C1),
            "c2" => Ok(Self::C2),
            "c3" => Ok(Self::C3),
            "c4" => Ok(Self::C4),
            other => Err(Error::config(format!("unknown classical model '{other}'"))),
        }
    }
}

/// Right-of-way (priority) parameter and junction markers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalParams {
    pub beta: f64,
    pub markers: MarkerParams,
}

/// Flow maximization on a given admissible set.
fn flow_maximization(g: &AdmissibleSet, beta: f64) -> Result<CouplingFluxes> {
    let AdmissibleSet { d1, d2, s3 } = *g;
    if d1 + d2 <= s3 {
        return Ok(g.snap(d1, d2));
    }
    let pre1 = beta * s3;
    let pre2 = (1.0 - beta) * s3;
    let over1 = pre1 > d1;
    let over2 = pre2 > d2;
    let (f1, f2) = match (over1, over2) {
        (false, false) => (pre1, s3 - pre1),
        (true, false) => (d1, s3 - d1),
        (false, true) => (s3 - d2, d2),
        (true, true) => {
            return Err(Error::Invariant(format!(
                "both preliminary fluxes exceed their demands (d1={d1}, d2={d2}, s3={s3}, beta={beta})"
            )))
        }
    };
    Ok(g.snap(f1, f2))
}

/// Flow maximization under the proportional split `f1 : f2 = beta : 1 - beta`.
fn proportional_maximization(g: &AdmissibleSet, beta: f64) -> CouplingFluxes {
    let f3 = (g.d1 / beta).min(g.d2 / (1.0 - beta)).min(g.s3);
    g.snap(beta * f3, (1.0 - beta) * f3)
}

fn check_closed_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::domain(format!("priority {beta} outside [0, 1]")))
    }
}

fn check_open_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("priority {beta} outside (0, 1)")))
    }
}

pub fn solve_c1(traces: &JunctionTraces, fds: &RoadDiagrams, beta: f64) -> Result<CouplingFluxes> {
    check_closed_beta(beta)?;
    let g = AdmissibleSet::from_traces(fds, traces)?;
    flow_maximization(&g, beta)
}

pub fn solve_c2(
    traces: &JunctionTraces,
    fds: &RoadDiagrams,
    beta: f64,
    markers: &MarkerParams,
) -> Result<CouplingFluxes> {
    check_closed_beta(beta)?;
    let g = AdmissibleSet::with_markers(fds, traces, markers)?;
    flow_maximization(&g, beta)
}

pub fn solve_c3(
    traces: &JunctionTraces,
    fds: &RoadDiagrams,
    beta: f64,
    markers: &MarkerParams,
) -> Result<CouplingFluxes> {
    check_open_beta(beta)?;
    let g = AdmissibleSet::with_markers(fds, traces, markers)?;
    Ok(proportional_maximization(&g, beta))
}

pub fn solve_c4(
    traces: &JunctionTraces,
    fds: &RoadDiagrams,
    beta: f64,
    markers: &MarkerParams,
) -> Result<CouplingFluxes> {
    solve_c3(traces, fds, beta, markers)
}

/// A classical model bound to its road diagrams and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    kind: ClassicalKind,
    fds: RoadDiagrams,
    params: ClassicalParams,
}

impl ClassicalModel {
    pub fn new(kind: ClassicalKind, fds: RoadDiagrams, params: ClassicalParams) -> Result<Self> {
        if kind.needs_open_beta() {
            check_open_beta(params.beta)?;
        } else {
            check_closed_beta(params.beta)?;
        }
        fds.check_markers(&params.markers)?;
        if kind == ClassicalKind::C1 && params.markers != fds.max_markers() {
            return Err(Error::config("C1 uses the maximal velocities as markers"));
        }
        Ok(Self { kind, fds, params })
    }

    /// C1 with right-of-way `beta`.
    pub fn c1(fds: RoadDiagrams, beta: f64) -> Result<Self> {
        Self::new(
            ClassicalKind::C1,
            fds,
            ClassicalParams {
                beta,
                markers: fds.max_markers(),
            },
        )
    }

    pub fn kind(&self) -> ClassicalKind {
        self.kind
    }

    pub fn params(&self) -> &ClassicalParams {
        &self.params
    }
}

impl CouplingModel for ClassicalModel {
    fn name(&self) -> String {
        self.kind.id().to_string()
    }

    fn diagrams(&self) -> &RoadDiagrams {
        &self.fds
    }

    fn junction_diagrams(&self) -> Result<RoadDiagrams> {
        let w = self.params.markers;
        Ok(RoadDiagrams::new(
            FundamentalDiagram::new(w.w1, self.fds.road1.rho_max())?,
            FundamentalDiagram::new(w.w2, self.fds.road2.rho_max())?,
            FundamentalDiagram::new(w.w3, self.fds.road3.rho_max())?,
        ))
    }

    fn fluxes(&self, traces: &JunctionTraces) -> Result<CouplingFluxes> {
        self.fds.check_traces(traces)?;
        let g = AdmissibleSet::with_markers_unchecked(&self.fds, traces, &self.params.markers);
        match self.kind {
            ClassicalKind::C1 | ClassicalKind::C2 => flow_maximization(&g, self.params.beta),
            ClassicalKind::C3 | ClassicalKind::C4 => {
                Ok(proportional_maximization(&g, self.params.beta))
            }
        }
    }
}
