use serde::{Deserialize, Serialize};

use super::{Dataset, JunctionGeometry, VolumeId};
use crate::calibration::TrainingSample;
use crate::error::{Error, Result};
use crate::junction::{CouplingFluxes, JunctionTraces, RoadDiagrams};
use crate::units::{mps_to_kmh, per_m_to_per_km};

/// Spacing of the data time grid in seconds.
pub const GRID_STEP: f64 = 0.25;

/// Vehicles per km in `volume` at time `t`.
pub fn empirical_density(dataset: &Dataset, geometry: &JunctionGeometry, volume: VolumeId, t: f64) -> f64 {
    let r = geometry.volume(volume);
    let count = dataset
        .trajectories
        .iter()
        .filter_map(|tr| tr.position(t))
        .filter(|&(x, y)| r.contains(x, y))
        .count();
    per_m_to_per_km(count as f64 / r.diameter())
}

/// Mean speed in km/h of the vehicles in `volume` at time `t`, 0 if empty.
pub fn empirical_velocity(dataset: &Dataset, geometry: &JunctionGeometry, volume: VolumeId, t: f64) -> f64 {
    let r = geometry.volume(volume);
    let (n, sum) = dataset
        .trajectories
        .iter()
        .filter(|tr| tr.position(t).is_some_and(|(x, y)| r.contains(x, y)))
        .filter_map(|tr| tr.speed(t))
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        0.0
    } else {
        mps_to_kmh(sum / n as f64)
    }
}

/// Density (veh/km), velocity (km/h) and flux (veh/h) of one road.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoadSeries {
    pub density: Vec<f64>,
    pub velocity: Vec<f64>,
    pub flux: Vec<f64>,
}

impl RoadSeries {
    fn with_capacity(n: usize) -> Self {
        Self {
            density: Vec::with_capacity(n),
            velocity: Vec::with_capacity(n),
            flux: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, density: f64, velocity: f64) {
        self.density.push(density);
        self.velocity.push(velocity);
        self.flux.push(density * velocity);
    }

    fn shifted(&self, offset: usize, len: usize) -> Self {
        let r = offset..offset + len;
        Self {
            density: self.density[r.clone()].to_vec(),
            velocity: self.velocity[r.clone()].to_vec(),
            flux: self.flux[r].to_vec(),
        }
    }
}

/// Macroscopic series of the three roads on a uniform grid. Index `i`
/// belongs to time `start + i * step` of road 1; after [`apply_delays`]
/// roads 2 and 3 hold their values at `t + tau2` and `t + tau3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSeries {
    pub dataset: u32,
    pub start: f64,
    pub step: f64,
    pub roads: [RoadSeries; 3],
    pub delays: Option<(f64, f64)>,
}

impl EmpiricalSeries {
    pub fn len(&self) -> usize {
        self.roads[0].density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn fluxes(&self) -> [&[f64]; 3] {
        [&self.roads[0].flux, &self.roads[1].flux, &self.roads[2].flux]
    }

    /// Training samples pairing the density triple with the flux triple.
    /// Densities above `rho_max` of `fds` are clamped to it.
    pub fn samples(&self, fds: &RoadDiagrams) -> Vec<TrainingSample> {
        (0..self.len())
            .map(|i| {
                let traces = JunctionTraces::new(
                    self.roads[0].density[i],
                    self.roads[1].density[i],
                    self.roads[2].density[i],
                )
                .clamped(fds);
                let target = CouplingFluxes::new(self.roads[0].flux[i], self.roads[1].flux[i], self.roads[2].flux[i]);
                TrainingSample::at(self.start + i as f64 * self.step, traces, target)
            })
            .collect()
    }

    /// `(density, velocity)` pairs of road `road` (0-based) with positive
    /// density.
    pub fn speed_samples(&self, road: usize) -> Vec<crate::calibration::SpeedSample> {
        let r = &self.roads[road];
        r.density
            .iter()
            .zip(&r.velocity)
            .filter(|(d, _)| **d > 0.0)
            .map(|(&density, &velocity)| crate::calibration::SpeedSample { density, velocity })
            .collect()
    }
}

/// Series on the grid `0, step, ...` covering the recording interval.
pub fn empirical_series_with_step(dataset: &Dataset, geometry: &JunctionGeometry, step: f64) -> Result<EmpiricalSeries> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("grid step {step} must be positive")));
    }
    let n = (dataset.duration / step + 1e-9).floor() as usize + 1;
    let mut roads = [
        RoadSeries::with_capacity(n),
        RoadSeries::with_capacity(n),
        RoadSeries::with_capacity(n),
    ];
    for i in 0..n {
        let t = i as f64 * step;
        for id in VolumeId::ALL {
            roads[id.road()].push(
                empirical_density(dataset, geometry, id, t),
                empirical_velocity(dataset, geometry, id, t),
            );
        }
    }
    Ok(EmpiricalSeries {
        dataset: dataset.id,
        start: 0.0,
        step,
        roads,
        delays: None,
    })
}

pub fn empirical_series(dataset: &Dataset, geometry: &JunctionGeometry) -> Result<EmpiricalSeries> {
    empirical_series_with_step(dataset, geometry, GRID_STEP)
}

fn grid_steps(tau: f64, step: f64) -> Result<i64> {
    let k = (tau / step).round();
    if !tau.is_finite() || (k * step - tau).abs() > 1e-9 * (1.0 + tau.abs()) {
        return Err(Error::domain(format!("delay {tau} is not a multiple of the grid step {step}")));
    }
    Ok(k as i64)
}

/// Associates road 2 at `t + tau2` and road 3 at `t + tau3` with road 1 at
/// `t` and trims the common support. Delays add up when applied twice.
pub fn apply_delays(series: &EmpiricalSeries, tau2: f64, tau3: f64) -> Result<EmpiricalSeries> {
    let k2 = grid_steps(tau2, series.step)?;
    let k3 = grid_steps(tau3, series.step)?;
    let n = series.len() as i64;
    let lo = 0.max(-k2).max(-k3);
    let hi = n.min(n - k2).min(n - k3);
    if hi <= lo {
        return Err(Error::domain(format!(
            "delays ({tau2}, {tau3}) leave no common support in {} samples",
            n
        )));
    }
    let len = (hi - lo) as usize;
    let roads = [
        series.roads[0].shifted(lo as usize, len),
        series.roads[1].shifted((lo + k2) as usize, len),
        series.roads[2].shifted((lo + k3) as usize, len),
    ];
    let (p2, p3) = series.delays.unwrap_or((0.0, 0.0));
    Ok(EmpiricalSeries {
        dataset: series.dataset,
        start: series.start + lo as f64 * series.step,
        step: series.step,
        roads,
        delays: Some((p2 + tau2, p3 + tau3)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cubic, CubicSegment, Trajectory};

    fn vehicle(id: u64, x0: f64, v: f64, y: f64, t0: f64, t1: f64) -> Trajectory {
        let seg = CubicSegment {
            t0,
            t1,
            x: Cubic([x0, v, 0.0, 0.0]),
            y: Cubic([y, 0.0, 0.0, 0.0]),
        };
        Trajectory::new(0, id, vec![seg]).unwrap()
    }

    fn dataset(trajectories: Vec<Trajectory>, duration: f64) -> Dataset {
        Dataset {
            id: 0,
            duration,
            trajectories,
        }
    }

    #[test]
    fn density_and_velocity_examples() {
        let g = JunctionGeometry::default();
        let empty = dataset(vec![], 10.0);
        assert_eq!(empirical_density(&empty, &g, VolumeId::V2, 0.0), 0.0);
        assert_eq!(empirical_velocity(&empty, &g, VolumeId::V2, 0.0), 0.0);

        // three vehicles inside the 100 m volume V2
        let d = dataset(
            vec![
                vehicle(1, -100.0, 20.0, 1.0, 0.0, 10.0),
                vehicle(2, -110.0, 24.0, 5.0, 0.0, 10.0),
                vehicle(3, -120.0, 0.0, 9.0, 0.0, 10.0),
            ],
            10.0,
        );
        assert!((empirical_density(&d, &g, VolumeId::V2, 0.0) - 30.0).abs() < 1e-12);
        let v = empirical_velocity(&d, &g, VolumeId::V2, 0.0);
        assert!((v - mps_to_kmh(44.0 / 3.0)).abs() < 1e-12);

        let two = dataset(
            vec![vehicle(1, -100.0, 20.0, 1.0, 0.0, 1.0), vehicle(2, -110.0, 24.0, 5.0, 0.0, 1.0)],
            1.0,
        );
        assert!((empirical_velocity(&two, &g, VolumeId::V2, 0.0) - 79.2).abs() < 1e-12);

        let stopped = dataset(vec![vehicle(1, -100.0, 0.0, 1.0, 0.0, 1.0)], 1.0);
        assert!(empirical_density(&stopped, &g, VolumeId::V2, 0.5) > 0.0);
        assert_eq!(empirical_velocity(&stopped, &g, VolumeId::V2, 0.5), 0.0);
    }

    #[test]
    fn boundary_counts_as_inside() {
        let g = JunctionGeometry::default();
        let d = dataset(vec![vehicle(1, g.v2.x1, 0.0, 0.0, 0.0, 1.0)], 1.0);
        assert!(empirical_density(&d, &g, VolumeId::V2, 0.0) > 0.0);
        let out = dataset(vec![vehicle(1, g.v2.x1 + 1e-9, 0.0, 0.0, 0.0, 1.0)], 1.0);
        assert_eq!(empirical_density(&out, &g, VolumeId::V2, 0.0), 0.0);
    }

    #[test]
    fn absent_vehicles_do_not_count() {
        let g = JunctionGeometry::default();
        let d = dataset(vec![vehicle(1, -100.0, 0.0, 1.0, 2.0, 3.0)], 5.0);
        assert_eq!(empirical_density(&d, &g, VolumeId::V2, 1.0), 0.0);
        assert!(empirical_density(&d, &g, VolumeId::V2, 2.5) > 0.0);
    }

    fn ramp_series(n: usize) -> EmpiricalSeries {
        let road = |offset: f64| {
            let mut r = RoadSeries::default();
            for i in 0..n {
                r.push(i as f64 + offset, 1.0);
            }
            r
        };
        EmpiricalSeries {
            dataset: 0,
            start: 0.0,
            step: GRID_STEP,
            roads: [road(0.0), road(1000.0), road(2000.0)],
            delays: None,
        }
    }

    #[test]
    fn zero_delays_are_identity() {
        let s = ramp_series(40);
        let d = apply_delays(&s, 0.0, 0.0).unwrap();
        assert_eq!(d.roads, s.roads);
        assert_eq!(d.delays, Some((0.0, 0.0)));
    }

    #[test]
    fn delay_index_arithmetic() {
        let n = 1201; // 300 s
        let s = ramp_series(n);
        let d = apply_delays(&s, 0.0, 9.0).unwrap();
        assert_eq!(d.len(), n - 36);
        assert_eq!(d.roads[2].density[0], 2036.0);
        assert_eq!(d.roads[0].density[0], 0.0);

        let e = apply_delays(&s, -5.0, 25.0).unwrap();
        assert_eq!(e.len(), n - 120);
        assert_eq!(e.start, 5.0);
        assert_eq!(e.roads[0].density[0], 20.0);
        assert_eq!(e.roads[1].density[0], 1000.0);
        assert_eq!(e.roads[2].density[0], 2120.0);
        let last = e.len() - 1;
        assert_eq!(e.roads[2].density[last], 2000.0 + (n - 1) as f64);
    }

    #[test]
    fn delay_errors() {
        let s = ramp_series(10);
        assert!(apply_delays(&s, 0.1, 0.0).is_err());
        assert!(apply_delays(&s, 0.0, 5.0).is_err());
    }

    #[test]
    fn flux_identity() {
        let g = JunctionGeometry::default();
        let d = dataset(
            vec![vehicle(1, -200.0, 20.0, 1.0, 0.0, 20.0), vehicle(2, -200.0, 15.0, 12.0, 1.0, 20.0)],
            20.0,
        );
        let s = empirical_series(&d, &g).unwrap();
        assert_eq!(s.len(), 81);
        for r in &s.roads {
            for i in 0..s.len() {
                assert_eq!(r.flux[i], r.density[i] * r.velocity[i]);
                if r.density[i] == 0.0 {
                    assert_eq!(r.velocity[i], 0.0);
                }
            }
        }
        assert!(s.roads[0].density.iter().any(|&v| v > 0.0));
    }
}
