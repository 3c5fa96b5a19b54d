//! Finite-volume relaxation scheme on the 2-to-1 network.
//!
//! Roads 1 and 2 occupy `[-s, 0]`, road 3 occupies `[0, s]`, each split
//! into `m` cells of width `s / m`. Interior interfaces use the central
//! relaxation flux, the three interfaces at `x = 0` use the coupling model,
//! and the outer interfaces use inflow, Neumann or closed conditions.
//!
//! The scheme runs in meters, seconds and vehicles/m. Coupling models and
//! diagrams keep their own units; [`Units`] converts between the two.

mod experiments;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::coupling::CouplingModel;
use crate::data::BoundaryFlow;
use crate::error::{Error, Result};
use crate::junction::{CouplingFluxes, FundamentalDiagram, JunctionTraces, RoadDiagrams};

pub use experiments::{
    run_boundary_experiment, run_riemann_prediction, simulate_single_road, BoundaryExperiment, RiemannPrediction,
    RIEMANN_FRACTIONS,
};

/// Densities beyond `[0, rho_max]` by more than this are clipped.
pub const CLIP_TOLERANCE: f64 = 1e-12;

/// Negative densities below `-ABORT_TOLERANCE * rho_max` abort the run.
pub const ABORT_TOLERANCE: f64 = 1e-6;

/// Scale factors from solver units to model units: a solver density times
/// `density` is a model density, a solver flux times `flux` a model flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub density: f64,
    pub flux: f64,
}

impl Units {
    /// Models in vehicles/km and vehicles/h.
    pub const TRAFFIC: Units = Units {
        density: 1000.0,
        flux: 3600.0,
    };

    /// Models already in solver units.
    pub const IDENTITY: Units = Units {
        density: 1.0,
        flux: 1.0,
    };

    /// The diagram in solver units.
    pub fn diagram(&self, fd: &FundamentalDiagram) -> Result<FundamentalDiagram> {
        FundamentalDiagram::new(fd.v_max() * self.density / self.flux, fd.rho_max() / self.density)
    }

    pub fn diagrams(&self, fds: &RoadDiagrams) -> Result<RoadDiagrams> {
        Ok(RoadDiagrams::new(
            self.diagram(&fds.road1)?,
            self.diagram(&fds.road2)?,
            self.diagram(&fds.road3)?,
        ))
    }
}

/// How the three junction discrepancies enter the relaxation speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    #[default]
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub cells: usize,
    pub cfl: f64,
    pub lambda_min: f64,
    /// Road length `s` in meters.
    pub half_length: f64,
    pub lambda_mode: LambdaMode,
    pub units: Units,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cells: 200,
            cfl: 0.24,
            lambda_min: 10.0,
            half_length: crate::data::HALF_LENGTH_M,
            lambda_mode: LambdaMode::Max,
            units: Units::TRAFFIC,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(Error::config(format!("need at least 2 cells per road, got {}", self.cells)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::config(format!("CFL number {} outside (0, 1)", self.cfl)));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return Err(Error::config("minimal relaxation speed must be positive"));
        }
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return Err(Error::config("road length must be positive"));
        }
        if !(self.units.density > 0.0 && self.units.flux > 0.0) {
            return Err(Error::config("unit scales must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.half_length / self.cells as f64
    }
}

/// Outer boundary of road 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub enum LeftBoundary {
    Closed,
    /// Zero-gradient: the boundary flux equals the flux of the first cell.
    Neumann,
    /// Constant inflow rate in solver units.
    Constant(f64),
    /// Kernel-smoothed crossing times, in vehicles/s.
    Inflow(BoundaryFlow),
}

impl LeftBoundary {
    fn rate(&self, t: f64) -> Option<f64> {
        match self {
            Self::Constant(q) => Some(*q),
            Self::Inflow(b) => Some(b.rate(t)),
            _ => None,
        }
    }

    /// `½ (f(rho_first) + V(t))` for data inflow.
    fn flux(&self, fd: &FundamentalDiagram, rho_first: f64, t: f64) -> f64 {
        match self {
            Self::Closed => 0.0,
            Self::Neumann => fd.flux_unchecked(rho_first),
            _ => 0.5 * (fd.flux_unchecked(rho_first) + self.rate(t).expect("inflow")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightBoundary {
    Closed,
    #[default]
    Neumann,
}

/// Cell averages in vehicles/m and the current time.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub roads: [Vec<f64>; 3],
    pub time: f64,
}

impl NetworkState {
    pub fn zeros(cells: usize) -> Self {
        Self::constant(cells, [0.0; 3])
    }

    pub fn constant(cells: usize, rho: [f64; 3]) -> Self {
        Self {
            roads: rho.map(|r| vec![r; cells]),
            time: 0.0,
        }
    }

    /// Vehicles on the network.
    pub fn mass(&self, dx: f64) -> f64 {
        self.roads.iter().map(|r| r.iter().sum::<f64>()).sum::<f64>() * dx
    }

    /// `(rho1[last], rho2[last], rho3[0])`.
    pub fn junction_cells(&self) -> [f64; 3] {
        [
            *self.roads[0].last().expect("cells"),
            *self.roads[1].last().expect("cells"),
            self.roads[2][0],
        ]
    }
}

/// `½ (f(rho_l) + f(rho_r)) - λ/2 (rho_r - rho_l)`.
#[inline]
pub fn interior_flux(fd: &FundamentalDiagram, rho_left: f64, rho_right: f64, lambda: f64) -> f64 {
    0.5 * (fd.flux_unchecked(rho_left) + fd.flux_unchecked(rho_right)) - 0.5 * lambda * (rho_right - rho_left)
}

/// Coupling fluxes in solver units for the junction-adjacent cells.
pub fn junction_flux<M: CouplingModel + ?Sized>(model: &M, units: &Units, cells: [f64; 3]) -> Result<CouplingFluxes> {
    let traces = JunctionTraces::from_array(cells.map(|r| r * units.density)).clamped(model.diagrams());
    let f = model.fluxes(&traces)?;
    Ok(CouplingFluxes::from_array(f.as_array().map(|v| v / units.flux)))
}

/// Relaxation speed for the next step: the largest of `lambda_min`, the
/// largest characteristic speed on the roads and `2/dx` times the
/// aggregated junction discrepancy.
pub fn adaptive_lambda(
    state: &NetworkState,
    fds: &RoadDiagrams,
    junction: &CouplingFluxes,
    config: &SolverConfig,
) -> f64 {
    let mut speed: f64 = 0.0;
    for (fd, road) in fds.as_array().iter().zip(&state.roads) {
        for &r in road {
            speed = speed.max(fd.flux_derivative(r).abs());
        }
    }
    let [r1, r2, r3] = state.junction_cells();
    let j = junction.as_array();
    let d = [
        (j[0] - fds.road1.flux_unchecked(r1)).abs(),
        (j[1] - fds.road2.flux_unchecked(r2)).abs(),
        (fds.road3.flux_unchecked(r3) - j[2]).abs(),
    ];
    let agg = match config.lambda_mode {
        LambdaMode::Max => d[0].max(d[1]).max(d[2]),
        LambdaMode::Min => d[0].min(d[1]).min(d[2]),
    };
    config.lambda_min.max(speed).max(2.0 / config.dx() * agg)
}

/// Summary of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub lambda: f64,
    pub junction: CouplingFluxes,
    /// `f3` of the last cell of road 3 at the start of the step.
    pub outflow: f64,
    /// Boundary fluxes of roads 1 and 2 used in the step.
    pub inflow: [f64; 2],
    /// Flux through the right end of road 3 used in the step.
    pub right_flux: f64,
}

/// Relaxation speed and step size extremes over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStats {
    pub steps: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Cell updates clipped back into `[0, rho_max]`, per road.
    pub clipped: [usize; 3],
}

impl Default for StepStats {
    fn default() -> Self {
        Self {
            steps: 0,
            lambda_min: f64::INFINITY,
            lambda_max: 0.0,
            dt_min: f64::INFINITY,
            dt_max: 0.0,
            clipped: [0; 3],
        }
    }
}

impl StepStats {
    fn record(&mut self, info: &StepInfo) {
        self.steps += 1;
        self.lambda_min = self.lambda_min.min(info.lambda);
        self.lambda_max = self.lambda_max.max(info.lambda);
        self.dt_min = self.dt_min.min(info.dt);
        self.dt_max = self.dt_max.max(info.dt);
    }
}

/// A network with a coupling model, boundary conditions and running
/// boundary-flux integrals.
pub struct Network<'a, M: CouplingModel + ?Sized> {
    config: SolverConfig,
    fds: RoadDiagrams,
    model: &'a M,
    pub left: [LeftBoundary; 2],
    pub right: RightBoundary,
    pub state: NetworkState,
    /// Vehicles that entered through the left ends of roads 1 and 2.
    pub inflow_total: [f64; 2],
    /// Vehicles that left through the right end of road 3.
    pub outflow_total: f64,
    pub stats: StepStats,
    fluxes: [Vec<f64>; 3],
}

impl<'a, M: CouplingModel + ?Sized> Network<'a, M> {
    pub fn new(
        model: &'a M,
        config: SolverConfig,
        left: [LeftBoundary; 2],
        right: RightBoundary,
        state: NetworkState,
    ) -> Result<Self> {
        config.validate()?;
        if state.roads.iter().any(|r| r.len() != config.cells) {
            return Err(Error::contract(format!("state must have {} cells per road", config.cells)));
        }
        for b in &left {
            if let Some(q) = b.rate(state.time) {
                if !(q >= 0.0) {
                    return Err(Error::domain(format!("inflow {q} must be nonnegative")));
                }
            }
        }
        let fds = config.units.diagrams(model.diagrams())?;
        Ok(Self {
            config,
            fds,
            model,
            left,
            right,
            state,
            inflow_total: [0.0; 2],
            outflow_total: 0.0,
            stats: StepStats::default(),
            fluxes: std::array::from_fn(|_| vec![0.0; config.cells + 1]),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Diagrams in solver units.
    pub fn diagrams(&self) -> &RoadDiagrams {
        &self.fds
    }

    pub fn mass(&self) -> f64 {
        self.state.mass(self.config.dx())
    }

    /// One step of at most `max_dt`.
    pub fn step(&mut self, max_dt: f64) -> Result<StepInfo> {
        let cfg = self.config;
        let dx = cfg.dx();
        let m = cfg.cells;
        let t = self.state.time;
        let junction = junction_flux(self.model, &cfg.units, self.state.junction_cells())?;
        debug_assert!(crate::junction::AdmissibleSet::from_traces(
            self.model.diagrams(),
            &JunctionTraces::from_array(self.state.junction_cells().map(|r| r * cfg.units.density))
                .clamped(self.model.diagrams())
        )
        .map(|g| g.contains_with_tolerance(
            junction.f1 * cfg.units.flux,
            junction.f2 * cfg.units.flux,
            1e-9
        ))
        .unwrap_or(true));
        let lambda = adaptive_lambda(&self.state, &self.fds, &junction, &cfg);
        let dt = (cfg.cfl * dx / lambda).min(max_dt);
        if !(dt > 0.0) {
            return Err(Error::Numerical(format!("time step {dt} at t = {t}")));
        }
        let j = junction.as_array();
        let fds = self.fds.as_array();

        for k in 0..3 {
            let rho = &self.state.roads[k];
            let fd = &fds[k];
            let f = &mut self.fluxes[k];
            for i in 1..m {
                f[i] = interior_flux(fd, rho[i - 1], rho[i], lambda);
            }
            if k < 2 {
                f[0] = self.left[k].flux(fd, rho[0], t);
                f[m] = j[k];
            } else {
                f[0] = j[2];
                f[m] = match self.right {
                    RightBoundary::Closed => 0.0,
                    RightBoundary::Neumann => fd.flux_unchecked(rho[m - 1]),
                };
            }
        }
        let outflow = fds[2].flux_unchecked(self.state.roads[2][m - 1]);
        let ratio = dt / dx;
        for k in 0..3 {
            let f = &self.fluxes[k];
            for (i, r) in self.state.roads[k].iter_mut().enumerate() {
                *r -= ratio * (f[i + 1] - f[i]);
            }
        }
        let inflow = [self.fluxes[0][0], self.fluxes[1][0]];
        let right_flux = self.fluxes[2][m];
        self.inflow_total[0] += dt * inflow[0];
        self.inflow_total[1] += dt * inflow[1];
        self.outflow_total += dt * right_flux;
        self.state.time = t + dt;
        self.check_state()?;
        let info = StepInfo {
            dt,
            lambda,
            junction,
            outflow,
            inflow,
            right_flux,
        };
        self.stats.record(&info);
        Ok(info)
    }

    /// Steps until `t_end`, landing on it exactly. Calls `observe` after
    /// every step.
    pub fn advance_to(&mut self, t_end: f64, mut observe: impl FnMut(&Self, &StepInfo)) -> Result<()> {
        while self.state.time < t_end {
            let info = self.step(t_end - self.state.time)?;
            if self.state.time >= t_end || t_end - self.state.time < 1e-12 * t_end.abs().max(1.0) {
                self.state.time = t_end;
            }
            observe(self, &info);
        }
        Ok(())
    }

    fn check_state(&mut self) -> Result<()> {
        let time = self.state.time;
        let junction = self.state.junction_cells();
        for (k, fd) in self.fds.as_array().iter().enumerate() {
            let rmax = fd.rho_max();
            let road = &mut self.state.roads[k];
            if let Some((i, r)) = road
                .iter()
                .enumerate()
                .find(|(_, r)| !r.is_finite() || **r < -ABORT_TOLERANCE * rmax)
            {
                return Err(Error::Numerical(format!(
                    "road {} cell {i} density {r} at t = {time}; junction cells {junction:?}",
                    k + 1
                )));
            }
            let mut clipped = 0;
            for r in road.iter_mut() {
                if *r < -CLIP_TOLERANCE * rmax {
                    *r = 0.0;
                    clipped += 1;
                } else if *r > rmax * (1.0 + CLIP_TOLERANCE) {
                    *r = rmax;
                    clipped += 1;
                }
            }
            if clipped > 0 {
                if self.stats.clipped[k] == 0 {
                    warn!("road {}: clipped {clipped} cells at t = {time}; further clips are only counted", k + 1);
                }
                self.stats.clipped[k] += clipped;
            }
        }
        Ok(())
    }
}

/// Cell centers of road `k` (0-based) in meters.
pub fn cell_centers(config: &SolverConfig, road: usize) -> Vec<f64> {
    let dx = config.dx();
    let origin = if road < 2 { -config.half_length } else { 0.0 };
    (0..config.cells).map(|i| origin + (i as f64 + 0.5) * dx).collect()
}
