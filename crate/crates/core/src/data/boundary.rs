use std::f64::consts::PI;

use log::warn;

use super::{Dataset, JunctionGeometry, Trajectory};

/// Crossing times further than this outside the recorded interval are not
/// trusted.
pub const EXTRAPOLATION_CAP_S: f64 = 30.0;

/// Default kernel bandwidth in seconds.
pub const KDE_BANDWIDTH_S: f64 = 0.75;

const SCAN_STEP_S: f64 = 0.25;

/// First time the (possibly extrapolated) path reaches `x_b` moving
/// downstream, searched within `cap` seconds around the recorded interval.
pub fn crossing_time(tr: &Trajectory, x_b: f64, cap: f64) -> Option<f64> {
    let a = tr.start() - cap;
    let b = tr.end() + cap;
    let g = |t: f64| tr.extrapolated_x(t) - x_b;

    let mut knots = vec![a];
    let mut t = a + SCAN_STEP_S;
    while t < tr.start() {
        knots.push(t);
        t += SCAN_STEP_S;
    }
    for s in tr.segments() {
        knots.push(s.t0);
    }
    let mut t = tr.end();
    while t < b {
        knots.push(t);
        t += SCAN_STEP_S;
    }
    knots.push(b);

    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            return Some(lo);
        }
        if glo < 0.0 && ghi >= 0.0 {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
    }
    None
}

/// Crossing times of the inflow boundary on roads 1 and 2 and of the
/// outflow boundary on road 3, each sorted. Roads 1 and 2 are told apart
/// by the lateral position at the crossing.
pub fn boundary_crossings(dataset: &Dataset, geometry: &JunctionGeometry) -> [Vec<f64>; 3] {
    let mut out: [Vec<f64>; 3] = Default::default();
    let mut skipped = [0usize; 3];
    for tr in &dataset.trajectories {
        match crossing_time(tr, geometry.inflow_x, EXTRAPOLATION_CAP_S) {
            Some(t) => {
                let (_, y) = tr.extrapolated_position(t);
                if geometry.on_ramp(y) {
                    out[0].push(t);
                } else if geometry.main_lanes.0 <= y && y <= geometry.main_lanes.1 {
                    out[1].push(t);
                }
            }
            // the vehicle never was upstream of the inflow boundary in range
            None if tr.extrapolated_x(tr.start()) < geometry.inflow_x => skipped[0] += 1,
            None => {}
        }
        match crossing_time(tr, geometry.outflow_x, EXTRAPOLATION_CAP_S) {
            Some(t) => out[2].push(t),
            None if tr.extrapolated_x(tr.end()) < geometry.outflow_x => skipped[2] += 1,
            None => {}
        }
    }
    if skipped[0] > 0 {
        warn!(
            "dataset {}: {} vehicles skipped, no inflow crossing within {EXTRAPOLATION_CAP_S} s",
            dataset.id, skipped[0]
        );
    }
    if skipped[2] > 0 {
        warn!(
            "dataset {}: {} vehicles skipped, no outflow crossing within {EXTRAPOLATION_CAP_S} s",
            dataset.id, skipped[2]
        );
    }
    for v in &mut out {
        v.sort_by(f64::total_cmp);
    }
    out
}

/// Counts per second `[k, k + 1)` over the recording interval.
pub fn histogram(times: &[f64], duration: f64) -> Vec<u32> {
    let bins = duration.ceil().max(0.0) as usize;
    let mut h = vec![0; bins];
    for &t in times {
        if t >= 0.0 && t < bins as f64 {
            h[t.floor() as usize] += 1;
        }
    }
    h
}

/// Per-second crossing counts of road `road` (0-based).
pub fn boundary_histogram(dataset: &Dataset, geometry: &JunctionGeometry, road: usize) -> Vec<u32> {
    let crossings = boundary_crossings(dataset, geometry);
    histogram(&crossings[road], dataset.duration)
}

/// Gaussian kernel estimate of the crossing rate at `t` in vehicles/s.
pub fn kde_boundary_flux(times: &[f64], t: f64, bandwidth: f64) -> f64 {
    let norm = 1.0 / (bandwidth * (2.0 * PI).sqrt());
    times
        .iter()
        .map(|&ti| {
            let z = (t - ti) / bandwidth;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * norm
}

/// Smoothed boundary flow of one road.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlow {
    pub times: Vec<f64>,
    pub bandwidth: f64,
}

impl BoundaryFlow {
    pub fn new(times: Vec<f64>, bandwidth: f64) -> Self {
        Self { times, bandwidth }
    }

    /// Vehicles per second at `t`.
    pub fn rate(&self, t: f64) -> f64 {
        kde_boundary_flux(&self.times, t, self.bandwidth)
    }

    /// Number of crossings in `[a, b)`.
    pub fn count_between(&self, a: f64, b: f64) -> usize {
        self.times.iter().filter(|&&t| a <= t && t < b).count()
    }
}
