use std::io::Write;

use super::{
    cell_centers, interior_flux, LeftBoundary, Network, NetworkState, RightBoundary, SolverConfig, StepStats,
};
use crate::coupling::CouplingModel;
use crate::data::BoundaryFlow;
use crate::error::{Error, Result};
use crate::junction::FundamentalDiagram;

/// Simulated outflow against the data for one dataset.
#[derive(Debug, Clone)]
pub struct BoundaryExperiment {
    /// Output grid in seconds.
    pub times: Vec<f64>,
    /// Smoothed data flows of roads 1, 2 and 3 on the grid, vehicles/s.
    pub data: [Vec<f64>; 3],
    /// `f3` of the last cell of road 3 on the grid, vehicles/s.
    pub model: Vec<f64>,
    /// `||V3 - V3_M|| / ||V3||` in L2 over the horizon; `None` when the
    /// data outflow vanishes.
    pub relative_error: Option<f64>,
    pub stats: StepStats,
    pub mass_final: f64,
    pub inflow_total: [f64; 2],
    pub outflow_total: f64,
}

impl BoundaryExperiment {
    /// Columns `time,v1_hat,v2_hat,v3_hat,v3_model`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "v1_hat", "v2_hat", "v3_hat", "v3_model"])?;
        for i in 0..self.times.len() {
            w.write_record([
                self.times[i].to_string(),
                self.data[0][i].to_string(),
                self.data[1][i].to_string(),
                self.data[2][i].to_string(),
                self.model[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Starts from an empty network, feeds the smoothed inflows of roads 1 and
/// 2 through the left boundaries and compares the outflow of road 3 with
/// the smoothed data outflow over `[0, horizon]`. The error integral uses
/// every time step; the returned series are sampled every `output_step`.
pub fn run_boundary_experiment<M: CouplingModel + ?Sized>(
    model: &M,
    config: &SolverConfig,
    flows: &[BoundaryFlow; 3],
    horizon: f64,
    output_step: f64,
) -> Result<BoundaryExperiment> {
    if !(horizon > 0.0 && output_step > 0.0) {
        return Err(Error::domain("horizon and output step must be positive"));
    }
    let left = [LeftBoundary::Inflow(flows[0].clone()), LeftBoundary::Inflow(flows[1].clone())];
    let mut net = Network::new(
        model,
        *config,
        left,
        RightBoundary::Neumann,
        NetworkState::zeros(config.cells),
    )?;
    let m = config.cells;
    let outflow_now = |net: &Network<M>| net.diagrams().road3.flux_unchecked(net.state.roads[2][m - 1]);

    let n_out = (horizon / output_step + 1e-9).floor() as usize;
    let mut times = vec![0.0];
    let mut data: [Vec<f64>; 3] = std::array::from_fn(|k| vec![flows[k].rate(0.0)]);
    let mut sim = vec![outflow_now(&net)];
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=n_out + 1 {
        let target = if k <= n_out { k as f64 * output_step } else { horizon };
        if target <= net.state.time {
            continue;
        }
        while net.state.time < target {
            let t = net.state.time;
            let info = net.step(target - t)?;
            let e = flows[2].rate(t);
            num += info.dt * (e - info.outflow).powi(2);
            den += info.dt * e * e;
            if target - net.state.time < 1e-12 * target.max(1.0) {
                net.state.time = target;
            }
        }
        times.push(target);
        for (d, f) in data.iter_mut().zip(flows) {
            d.push(f.rate(target));
        }
        sim.push(outflow_now(&net));
    }
    let relative_error = if den > 0.0 { Some((num / den).sqrt()) } else { None };
    Ok(BoundaryExperiment {
        times,
        data,
        model: sim,
        relative_error,
        stats: net.stats,
        mass_final: net.mass(),
        inflow_total: net.inflow_total,
        outflow_total: net.outflow_total,
    })
}

/// Initial densities of the prediction run as fractions of `rho_max`.
pub const RIEMANN_FRACTIONS: [f64; 3] = [0.7, 0.5, 0.8];

/// Density profiles after a road-wise constant start with Neumann data at
/// all outer boundaries.
#[derive(Debug, Clone)]
pub struct RiemannPrediction {
    pub model: String,
    /// Cell centers in meters.
    pub x: [Vec<f64>; 3],
    /// Initial densities in model units.
    pub initial: [f64; 3],
    /// Final densities in model units.
    pub density: [Vec<f64>; 3],
    pub time: f64,
    /// Vehicles on the network at the start and at the end.
    pub mass_initial: f64,
    pub mass_final: f64,
    pub inflow_total: [f64; 2],
    pub outflow_total: f64,
    pub stats: StepStats,
}

impl RiemannPrediction {
    /// Vehicles gained minus vehicles received through the boundaries,
    /// relative to the initial mass.
    pub fn balance_defect(&self) -> f64 {
        let expected = self.mass_initial + self.inflow_total[0] + self.inflow_total[1] - self.outflow_total;
        (self.mass_final - expected).abs() / self.mass_initial.max(f64::MIN_POSITIVE)
    }

    /// Columns `x,rho1,rho2,rho3`; roads 1 and 2 fill the rows with `x < 0`,
    /// road 3 the rows with `x > 0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "rho1", "rho2", "rho3"])?;
        for i in 0..self.x[0].len() {
            w.write_record([
                self.x[0][i].to_string(),
                self.density[0][i].to_string(),
                self.density[1][i].to_string(),
                String::new(),
            ])?;
        }
        for i in 0..self.x[2].len() {
            w.write_record([self.x[2][i].to_string(), String::new(), String::new(), self.density[2][i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run_riemann_prediction<M: CouplingModel + ?Sized>(
    model: &M,
    config: &SolverConfig,
    horizon: f64,
) -> Result<RiemannPrediction> {
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let units = config.units;
    let fds = units.diagrams(model.diagrams())?;
    let rho0 = [0, 1, 2].map(|k| RIEMANN_FRACTIONS[k] * fds.road(k).rho_max());
    let state = NetworkState::constant(config.cells, rho0);
    let mut net = Network::new(
        model,
        *config,
        [LeftBoundary::Neumann, LeftBoundary::Neumann],
        RightBoundary::Neumann,
        state,
    )?;
    let mass_initial = net.mass();
    net.advance_to(horizon, |_, _| {})?;
    Ok(RiemannPrediction {
        model: model.name(),
        x: [0, 1, 2].map(|k| cell_centers(config, k)),
        initial: rho0.map(|r| r * units.density),
        density: net.state.roads.clone().map(|r| r.into_iter().map(|v| v * units.density).collect()),
        time: net.state.time,
        mass_initial,
        mass_final: net.mass(),
        inflow_total: net.inflow_total,
        outflow_total: net.outflow_total,
        stats: net.stats,
    })
}

/// The interior scheme on a single road `[0, length]` with zero-gradient
/// ends, in the units of `fd`. Returns the cell averages at `t_end`.
pub fn simulate_single_road(
    fd: &FundamentalDiagram,
    initial: &[f64],
    length: f64,
    cfl: f64,
    lambda_min: f64,
    t_end: f64,
) -> Result<Vec<f64>> {
    let m = initial.len();
    if m < 2 || !(length > 0.0) || !(cfl > 0.0 && cfl < 1.0) || !(lambda_min > 0.0) {
        return Err(Error::config("invalid single-road setup"));
    }
    let dx = length / m as f64;
    let mut rho = initial.to_vec();
    let mut f = vec![0.0; m + 1];
    let mut t = 0.0;
    while t < t_end {
        let speed = rho.iter().fold(0.0f64, |a, &r| a.max(fd.flux_derivative(r).abs()));
        let lambda = lambda_min.max(speed);
        let dt = (cfl * dx / lambda).min(t_end - t);
        f[0] = fd.flux_unchecked(rho[0]);
        f[m] = fd.flux_unchecked(rho[m - 1]);
        for i in 1..m {
            f[i] = interior_flux(fd, rho[i - 1], rho[i], lambda);
        }
        for i in 0..m {
            rho[i] -= dt / dx * (f[i + 1] - f[i]);
        }
        t += dt;
        if t_end - t < 1e-12 * t_end.max(1.0) {
            break;
        }
    }
    Ok(rho)
}
