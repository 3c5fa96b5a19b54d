use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || [x0, x1, y0, y1].iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// Membership in the closed region.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    /// Longitudinal extent.
    pub fn diameter(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn center_x(&self) -> f64 {
        0.5 * (self.x0 + self.x1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VolumeId {
    V1,
    V2,
    V3,
}

impl VolumeId {
    pub const ALL: [VolumeId; 3] = [Self::V1, Self::V2, Self::V3];

    /// Index of the road observed by the volume (0 for road 1).
    pub fn road(self) -> usize {
        self as usize
    }
}

impl fmt::Display for VolumeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.road() + 1)
    }
}

/// Control volumes and boundary positions of the on-ramp junction.
///
/// The freeway runs in +x with the junction at `x = 0`. The main lanes
/// occupy `main_lanes` in y, the on-ramp lies beside them in `ramp_lane`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionGeometry {
    pub v1: Rect,
    pub v2: Rect,
    pub v3: Rect,
    /// Lateral band of the main carriageway `(y0, y1)`.
    pub main_lanes: (f64, f64),
    pub main_lane_count: u32,
    /// Lateral band of the on-ramp.
    pub ramp_lane: (f64, f64),
    /// Boundary where vehicles enter roads 1 and 2.
    pub inflow_x: f64,
    /// Boundary where vehicles leave road 3.
    pub outflow_x: f64,
}

/// Half of the estimated junction length, meters.
pub const HALF_LENGTH_M: f64 = 135.14;

/// Total length 270.28 m split symmetrically around the junction. V1 is
/// shorter than V3 so that free-flowing on-ramp vehicles spend about as
/// long in V1 as in V3; with unequal residence times the volume fluxes only
/// fix the on-ramp delay up to half the difference.
impl Default for JunctionGeometry {
    fn default() -> Self {
        let s = HALF_LENGTH_M;
        Self {
            v1: Rect { x0: -s, x1: -51.5, y0: 10.5, y1: 14.0 },
            v2: Rect { x0: -s, x1: -35.14, y0: 0.0, y1: 10.5 },
            v3: Rect { x0: 35.14, x1: s, y0: 0.0, y1: 10.5 },
            main_lanes: (0.0, 10.5),
            main_lane_count: 3,
            ramp_lane: (10.5, 14.0),
            inflow_x: -s,
            outflow_x: s,
        }
    }
}

impl JunctionGeometry {
    pub fn volume(&self, id: VolumeId) -> &Rect {
        match id {
            VolumeId::V1 => &self.v1,
            VolumeId::V2 => &self.v2,
            VolumeId::V3 => &self.v3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for id in VolumeId::ALL {
            let r = self.volume(id);
            Rect::new(r.x0, r.x1, r.y0, r.y1)?;
        }
        if !(self.v2.x1 < self.v3.x0) {
            return Err(Error::config("V2 and V3 need a gap between them"));
        }
        if !(self.main_lanes.0 < self.main_lanes.1 && self.ramp_lane.0 < self.ramp_lane.1) {
            return Err(Error::config("empty lane band"));
        }
        if self.main_lane_count == 0 {
            return Err(Error::config("the freeway needs at least one lane"));
        }
        if !(self.inflow_x < self.outflow_x) {
            return Err(Error::config("inflow boundary must lie upstream of the outflow boundary"));
        }
        Ok(())
    }

    /// Lateral center of main lane `lane` (0 is the outermost from the ramp).
    pub fn lane_center(&self, lane: u32) -> f64 {
        let w = (self.main_lanes.1 - self.main_lanes.0) / self.main_lane_count as f64;
        self.main_lanes.0 + (lane as f64 + 0.5) * w
    }

    pub fn ramp_center(&self) -> f64 {
        0.5 * (self.ramp_lane.0 + self.ramp_lane.1)
    }

    pub fn on_ramp(&self, y: f64) -> bool {
        self.ramp_lane.0 <= y && y <= self.ramp_lane.1 && !(y <= self.main_lanes.1 && y >= self.main_lanes.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let g = JunctionGeometry::default();
        g.validate().unwrap();
        assert!((g.outflow_x - g.inflow_x - 270.28).abs() < 1e-9);
        assert!((g.v2.diameter() - 100.0).abs() < 1e-9);
        assert!(g.v2.x1 < g.v3.x0);
        assert!((g.lane_center(1) - 5.25).abs() < 1e-12);
        assert!(g.on_ramp(12.0) && !g.on_ramp(10.5) && !g.on_ramp(3.0));
    }

    #[test]
    fn closed_membership() {
        let r = Rect::new(0.0, 100.0, 0.0, 3.5).unwrap();
        assert!(r.contains(0.0, 0.0) && r.contains(100.0, 3.5));
        assert!(!r.contains(100.0 + 1e-12, 1.0));
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn overlapping_volumes_rejected() {
        let mut g = JunctionGeometry::default();
        g.v3.x0 = g.v2.x1;
        assert!(g.validate().is_err());
    }
}
