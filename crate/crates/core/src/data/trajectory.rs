use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cubic in local time `s = t - t0`: `c[0] + c[1] s + c[2] s^2 + c[3] s^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        let c = &self.0;
        ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        let c = &self.0;
        (3.0 * c[3] * s + 2.0 * c[2]) * s + c[1]
    }

    /// Cubic Hermite interpolant of values and slopes at `s = 0` and `s = h`.
    pub fn hermite(p0: f64, m0: f64, p1: f64, m1: f64, h: f64) -> Self {
        let d = (p1 - p0) / h;
        Self([p0, m0, (3.0 * d - 2.0 * m0 - m1) / h, (m0 + m1 - 2.0 * d) / (h * h)])
    }

    /// The same polynomial expanded around `s = shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        let c = &self.0;
        Self([
            self.value(shift),
            self.derivative(shift),
            c[2] + 3.0 * c[3] * shift,
            c[3],
        ])
    }
}

/// One polynomial piece of a trajectory on `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicSegment {
    pub t0: f64,
    pub t1: f64,
    pub x: Cubic,
    pub y: Cubic,
}

impl CubicSegment {
    pub fn position(&self, t: f64) -> (f64, f64) {
        let s = t - self.t0;
        (self.x.value(s), self.y.value(s))
    }

    pub fn velocity(&self, t: f64) -> (f64, f64) {
        let s = t - self.t0;
        (self.x.derivative(s), self.y.derivative(s))
    }

    /// Restriction to `[a, b]`, re-expanded around `a`.
    fn restricted(&self, a: f64, b: f64) -> Self {
        let shift = a - self.t0;
        Self {
            t0: a,
            t1: b,
            x: self.x.shifted(shift),
            y: self.y.shifted(shift),
        }
    }
}

/// Planar vehicle path (meters) made of consecutive cubic segments. Outside
/// its time interval the vehicle is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dataset: u32,
    pub vehicle: u64,
    segments: Vec<CubicSegment>,
}

/// Relative tolerance for gaps between consecutive segments.
const JOIN_TOLERANCE: f64 = 1e-9;

impl Trajectory {
    pub fn new(dataset: u32, vehicle: u64, segments: Vec<CubicSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain(format!("vehicle {vehicle} has no segments")));
        }
        for s in &segments {
            if !(s.t0 < s.t1) || !s.t0.is_finite() || !s.t1.is_finite() {
                return Err(Error::domain(format!(
                    "vehicle {vehicle}: empty segment [{}, {}]",
                    s.t0, s.t1
                )));
            }
        }
        for w in segments.windows(2) {
            let scale = 1.0 + w[0].t1.abs();
            if (w[0].t1 - w[1].t0).abs() > JOIN_TOLERANCE * scale {
                return Err(Error::domain(format!(
                    "vehicle {vehicle}: segments do not join at t = {}",
                    w[0].t1
                )));
            }
        }
        Ok(Self {
            dataset,
            vehicle,
            segments,
        })
    }

    pub fn segments(&self) -> &[CubicSegment] {
        &self.segments
    }

    pub fn start(&self) -> f64 {
        self.segments[0].t0
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].t1
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start() <= t && t <= self.end()
    }

    fn segment_at(&self, t: f64) -> Option<&CubicSegment> {
        if !self.is_active(t) {
            return None;
        }
        let i = self.segments.partition_point(|s| s.t1 <= t);
        Some(&self.segments[i.min(self.segments.len() - 1)])
    }

    pub fn position(&self, t: f64) -> Option<(f64, f64)> {
        self.segment_at(t).map(|s| s.position(t))
    }

    pub fn velocity(&self, t: f64) -> Option<(f64, f64)> {
        self.segment_at(t).map(|s| s.velocity(t))
    }

    pub fn speed(&self, t: f64) -> Option<f64> {
        self.velocity(t).map(|(vx, vy)| vx.hypot(vy))
    }

    /// Part of the trajectory inside `[a, b]`; `None` if it does not overlap.
    pub fn clipped(&self, a: f64, b: f64) -> Option<Self> {
        let lo = a.max(self.start());
        let hi = b.min(self.end());
        if !(lo < hi) {
            return None;
        }
        let segments = self
            .segments
            .iter()
            .filter(|s| s.t1 > lo && s.t0 < hi)
            .map(|s| s.restricted(s.t0.max(lo), s.t1.min(hi)))
            .collect();
        Some(Self {
            dataset: self.dataset,
            vehicle: self.vehicle,
            segments,
        })
    }

    /// Longitudinal position extended beyond the interval with the first or
    /// last polynomial piece.
    pub fn extrapolated_x(&self, t: f64) -> f64 {
        let seg = if t < self.start() {
            &self.segments[0]
        } else if t > self.end() {
            &self.segments[self.segments.len() - 1]
        } else {
            self.segment_at(t).expect("active")
        };
        seg.x.value(t - seg.t0)
    }

    pub fn extrapolated_position(&self, t: f64) -> (f64, f64) {
        let seg = if t < self.start() {
            &self.segments[0]
        } else if t > self.end() {
            &self.segments[self.segments.len() - 1]
        } else {
            self.segment_at(t).expect("active")
        };
        seg.position(t)
    }
}
