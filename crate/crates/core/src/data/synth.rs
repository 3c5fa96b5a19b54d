//! Synthetic trajectories standing in for drone recordings.
//!
//! Vehicles arrive upstream on the on-ramp and on the freeway as
//! inhomogeneous Poisson streams. Each vehicle relaxes toward the speed the
//! road's fundamental diagram assigns to the local arrival rate (free
//! branch), crosses the junction gap on a single cubic whose duration fixes
//! the travel time between the volume centers, and leaves at the road-3
//! target speed.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cubic, CubicSegment, Dataset, JunctionGeometry, Trajectory};
use crate::error::{Error, Result};
use crate::junction::{FundamentalDiagram, RoadDiagrams};
use crate::units::{kmh_to_mps, per_h_to_per_s};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub dataset: u32,
    /// Recording length in seconds.
    pub duration: f64,
    pub seed: u64,
    /// Mean arrival rates `[ramp, main]` in vehicles/h.
    pub rates: [f64; 2],
    /// Relative amplitude of the sinusoidal rate modulation, in `[0, 1)`.
    pub modulation: f64,
    /// Period of the rate modulation in seconds.
    pub period: f64,
    /// Diagrams in km/h and vehicles/km.
    pub diagrams: RoadDiagrams,
    /// Relative spread of the entry speed around the target.
    pub speed_noise: f64,
    /// Speed relaxation rate, 1/s.
    pub relaxation: f64,
    /// Travel time offset of the freeway stream: V2 traffic lines up with
    /// V1 traffic `ramp_offset` seconds later.
    pub ramp_offset: f64,
    /// Travel time from the center of V1 to the center of V3, seconds.
    pub merge_delay: f64,
    pub geometry: JunctionGeometry,
    /// Arrivals start this long before the recording.
    pub lead_time: f64,
    /// Longitudinal extent of the simulated paths.
    pub span: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dataset: 0,
            duration: 300.0,
            seed: 0,
            rates: [700.0, 3000.0],
            modulation: 0.4,
            period: 60.0,
            diagrams: RoadDiagrams::reference_onramp(),
            speed_noise: 0.03,
            relaxation: 0.5,
            ramp_offset: 0.0,
            merge_delay: 9.0,
            geometry: JunctionGeometry::default(),
            lead_time: 60.0,
            span: (-200.0, 200.0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration must be nonnegative"));
        }
        if self.rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::config(format!("arrival rates {:?} must be nonnegative", self.rates)));
        }
        if !(0.0..1.0).contains(&self.modulation) || !(self.period > 0.0) {
            return Err(Error::config("modulation must lie in [0, 1) with a positive period"));
        }
        if !(0.0..0.5).contains(&self.speed_noise) || !(self.relaxation > 0.0) {
            return Err(Error::config("speed noise must lie in [0, 0.5), relaxation must be positive"));
        }
        if !(self.lead_time >= 0.0) {
            return Err(Error::config("lead time must be nonnegative"));
        }
        let g = &self.geometry;
        if !(self.span.0 < g.inflow_x.min(g.v1.x0).min(g.v2.x0) && self.span.1 > g.outflow_x.max(g.v3.x1)) {
            return Err(Error::config("simulated span must cover the junction boundaries"));
        }
        Ok(())
    }

    fn rate(&self, road: usize, phase: f64, t: f64) -> f64 {
        self.rates[road] * (1.0 + self.modulation * (2.0 * PI * t / self.period + phase).sin())
    }
}

/// Speed on the free branch of `fd` at flow `q` (same units as `fd`); flows
/// above capacity map to the critical speed.
fn target_speed(fd: &FundamentalDiagram, q: f64) -> f64 {
    let rho = fd.inverse_free(q.min(fd.max_flux())).unwrap_or(fd.sigma());
    fd.velocity(rho)
}

/// Arrival times of an inhomogeneous Poisson process on `[a, b]` by
/// thinning.
fn arrivals(rng: &mut ChaCha8Rng, a: f64, b: f64, peak: f64, rate: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    if peak <= 0.0 {
        return out;
    }
    let mut t = a;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / peak;
        if t > b {
            return out;
        }
        if rng.random::<f64>() * peak <= rate(t) {
            out.push(t);
        }
    }
}

/// Exponential speed relaxation from `v0` toward `vt`, starting at `x0`.
#[derive(Debug, Clone, Copy)]
struct Relaxation {
    x0: f64,
    v0: f64,
    vt: f64,
    k: f64,
}

impl Relaxation {
    fn position(&self, s: f64) -> f64 {
        self.x0 + self.vt * s + (self.v0 - self.vt) * (1.0 - (-self.k * s).exp()) / self.k
    }

    fn speed(&self, s: f64) -> f64 {
        self.vt + (self.v0 - self.vt) * (-self.k * s).exp()
    }

    /// Time to reach `x`, by Newton iteration (speed stays positive).
    fn time_to(&self, x: f64) -> f64 {
        let mut s = (x - self.x0) / self.vt;
        for _ in 0..50 {
            let ds = (self.position(s) - x) / self.speed(s);
            s -= ds;
            if ds.abs() < 1e-12 * (1.0 + s.abs()) {
                break;
            }
        }
        s
    }
}

/// Smallest slope of the cubic on `[0, h]`.
fn min_slope(c: &Cubic, h: f64) -> f64 {
    let mut m = c.derivative(0.0).min(c.derivative(h));
    if c.0[3] != 0.0 {
        let s = -c.0[2] / (3.0 * c.0[3]);
        if s > 0.0 && s < h {
            m = m.min(c.derivative(s));
        }
    }
    m
}

fn segment(t0: f64, t1: f64, x: Cubic, y: f64) -> CubicSegment {
    CubicSegment {
        t0,
        t1,
        x,
        y: Cubic([y, 0.0, 0.0, 0.0]),
    }
}

struct Vehicle {
    ramp: bool,
    arrival: f64,
    v0: f64,
    vt: f64,
    v3: f64,
    lane_y: f64,
}

fn build(cfg: &SynthConfig, id: u64, v: &Vehicle) -> Result<Option<Trajectory>> {
    let g = &cfg.geometry;
    let (gap_start, center, delay, y_in) = if v.ramp {
        (g.v1.x1, g.v1.center_x(), cfg.merge_delay, g.ramp_center())
    } else {
        (g.v2.x1, g.v2.center_x(), cfg.merge_delay - cfg.ramp_offset, v.lane_y)
    };
    let rel = Relaxation {
        x0: cfg.span.0,
        v0: v.v0,
        vt: v.vt,
        k: cfg.relaxation,
    };
    let t = v.arrival;
    let s_gap = rel.time_to(gap_start);
    let s_center = rel.time_to(center);
    let gap_end = g.v3.x0;
    let downstream = (g.v3.center_x() - gap_end) / v.v3;
    let t_gap = delay - (s_gap - s_center) - downstream;
    if !(t_gap > 0.0) {
        return Err(Error::config(format!(
            "delay {delay} s is too short for the junction gap (vehicle {id})"
        )));
    }

    let mut segments = Vec::new();
    let mut s = 0.0;
    while s < s_gap {
        let e = (s + 1.0).min(s_gap);
        let e = if s_gap - e < 1e-6 { s_gap } else { e };
        let h = e - s;
        let x = Cubic::hermite(rel.position(s), rel.speed(s), rel.position(e), rel.speed(e), h);
        segments.push(segment(t + s, t + e, x, y_in));
        s = e;
    }

    let t_a = t + s_gap;
    let t_b = t_a + t_gap;
    let x = Cubic::hermite(gap_start, rel.speed(s_gap), gap_end, v.v3, t_gap);
    if !(min_slope(&x, t_gap) > 0.0) {
        return Err(Error::config(format!(
            "delay {delay} s forces vehicle {id} to stop or reverse in the junction gap"
        )));
    }
    let y_out = g.lane_center(g.main_lane_count - 1);
    let y = if v.ramp {
        Cubic::hermite(y_in, 0.0, y_out, 0.0, t_gap)
    } else {
        Cubic([v.lane_y, 0.0, 0.0, 0.0])
    };
    segments.push(CubicSegment { t0: t_a, t1: t_b, x, y });

    let t_end = t_b + (cfg.span.1 - gap_end) / v.v3;
    let y_last = if v.ramp { y_out } else { v.lane_y };
    segments.push(segment(t_b, t_end, Cubic([gap_end, v.v3, 0.0, 0.0]), y_last));

    let tr = Trajectory::new(cfg.dataset, id, segments)?;
    Ok(tr.clipped(0.0, cfg.duration))
}

/// Generates one dataset. Deterministic for a given configuration.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phases = [rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI];
    let peak = cfg.rates.map(|r| per_h_to_per_s(r * (1.0 + cfg.modulation)));
    let mut vehicles = Vec::new();
    for (road, ramp) in [(0, true), (1, false)] {
        let times = arrivals(&mut rng, -cfg.lead_time, cfg.duration, peak[road], |t| {
            per_h_to_per_s(cfg.rate(road, phases[road], t))
        });
        let fd = if ramp { &cfg.diagrams.road1 } else { &cfg.diagrams.road2 };
        for arrival in times {
            let q = cfg.rate(road, phases[road], arrival);
            let vt = kmh_to_mps(target_speed(fd, q));
            let q3 = cfg.rate(0, phases[0], arrival) + cfg.rate(1, phases[1], arrival);
            let v3 = kmh_to_mps(target_speed(&cfg.diagrams.road3, q3));
            let noise = 1.0 + cfg.speed_noise * (2.0 * rng.random::<f64>() - 1.0);
            let lane = rng.random_range(0..cfg.geometry.main_lane_count);
            vehicles.push(Vehicle {
                ramp,
                arrival,
                v0: vt * noise,
                vt,
                v3,
                lane_y: cfg.geometry.lane_center(lane),
            });
        }
    }
    vehicles.sort_by(|a, b| a.arrival.total_cmp(&b.arrival));
    let mut trajectories = Vec::new();
    for (i, v) in vehicles.iter().enumerate() {
        if let Some(tr) = build(cfg, i as u64 + 1, v)? {
            trajectories.push(tr);
        }
    }
    Ok(Dataset {
        id: cfg.dataset,
        duration: cfg.duration,
        trajectories,
    })
}

/// One configuration per recorded dataset, matching its duration and mean
/// arrival rates.
pub fn corpus_configs(manifests: &[super::DatasetManifest], base: &SynthConfig) -> Vec<SynthConfig> {
    manifests
        .iter()
        .map(|m| SynthConfig {
            dataset: m.id,
            duration: m.duration_s,
            seed: base.seed.wrapping_mul(1000).wrapping_add(m.id as u64),
            rates: m.rates(),
            ..base.clone()
        })
        .collect()
}
