//! Fundamental diagrams, demand and supply, and the set of admissible
//! coupling fluxes at a junction with two incoming roads and one outgoing
//! road.
//!
//! Road indices follow the network convention: road 1 is the on-ramp,
//! road 2 the mainline before the merge, road 3 the mainline after it.
//! Array slots `[0, 1, 2]` hold roads 1, 2 and 3.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (w.r.t. the road's maximal flux) of the branch test
/// `f0 == f(rho0)` when converting coupling fluxes back to densities.
pub const BRANCH_TOLERANCE: f64 = 1e-9;

/// Relative tolerance of the post-check `f(rho_R) == f0` after inversion.
/// Relative to `max(f0, INVERSION_FLOOR * max_flux)`: near the stagnation
/// density a density ulp alone moves the flux by about `eps * v_max * rho_max`.
pub const INVERSION_TOLERANCE: f64 = 1e-10;
pub const INVERSION_FLOOR: f64 = 1e-4;

/// Greenshields fundamental diagram `V(rho) = v_max (1 - rho / rho_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiagram", into = "RawDiagram")]
pub struct FundamentalDiagram {
    v_max: f64,
    rho_max: f64,
}

#[derive(Serialize, Deserialize)]
struct RawDiagram {
    v_max: f64,
    rho_max: f64,
}

impl TryFrom<RawDiagram> for FundamentalDiagram {
    type Error = Error;
    fn try_from(raw: RawDiagram) -> Result<Self> {
        FundamentalDiagram::new(raw.v_max, raw.rho_max)
    }
}

impl From<FundamentalDiagram> for RawDiagram {
    fn from(fd: FundamentalDiagram) -> Self {
        RawDiagram {
            v_max: fd.v_max,
            rho_max: fd.rho_max,
        }
    }
}

impl FundamentalDiagram {
    pub fn new(v_max: f64, rho_max: f64) -> Result<Self> {
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::domain(format!("v_max must be positive, got {v_max}")));
        }
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(Error::domain(format!(
                "rho_max must be positive, got {rho_max}"
            )));
        }
        Ok(Self { v_max, rho_max })
    }

    /// Unit diagram `v_max = rho_max = 1`.
    pub fn unit() -> Self {
        Self {
            v_max: 1.0,
            rho_max: 1.0,
        }
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Density of maximal flux.
    pub fn sigma(&self) -> f64 {
        0.5 * self.rho_max
    }

    pub fn max_flux(&self) -> f64 {
        0.25 * self.v_max * self.rho_max
    }

    pub fn velocity(&self, rho: f64) -> f64 {
        self.v_max * (1.0 - rho / self.rho_max)
    }

    pub fn flux(&self, rho: f64) -> Result<f64> {
        self.check_density(rho)?;
        Ok(self.flux_unchecked(rho))
    }

    #[inline]
    pub fn flux_unchecked(&self, rho: f64) -> f64 {
        rho * self.v_max * (1.0 - rho / self.rho_max)
    }

    /// Characteristic speed `f'(rho)`.
    #[inline]
    pub fn flux_derivative(&self, rho: f64) -> f64 {
        self.v_max * (1.0 - 2.0 * rho / self.rho_max)
    }

    /// Flux with the maximal velocity replaced by the marker `w`.
    pub fn parameterized_flux(&self, rho: f64, w: f64) -> Result<f64> {
        self.check_density(rho)?;
        self.check_marker(w)?;
        Ok(param_flux(self.rho_max, rho, w))
    }

    pub fn demand(&self, rho: f64, w: f64) -> Result<f64> {
        self.check_density(rho)?;
        self.check_marker(w)?;
        Ok(self.demand_unchecked(rho, w))
    }

    pub fn supply(&self, rho: f64, w: f64) -> Result<f64> {
        self.check_density(rho)?;
        self.check_marker(w)?;
        Ok(self.supply_unchecked(rho, w))
    }

    #[inline]
    pub fn demand_unchecked(&self, rho: f64, w: f64) -> f64 {
        let rho = if rho <= self.sigma() { rho } else { self.sigma() };
        param_flux(self.rho_max, rho, w)
    }

    #[inline]
    pub fn supply_unchecked(&self, rho: f64, w: f64) -> f64 {
        let rho = if rho <= self.sigma() { self.sigma() } else { rho };
        param_flux(self.rho_max, rho, w)
    }

    /// Inverse of the flux restricted to `[sigma, rho_max]`.
    pub fn inverse_congested(&self, f: f64) -> Result<f64> {
        let x = self.check_flux(f)?;
        let root = (1.0 - x).max(0.0).sqrt();
        Ok(self.sigma() * (1.0 + root))
    }

    /// Inverse of the flux restricted to `[0, sigma]`.
    pub fn inverse_free(&self, f: f64) -> Result<f64> {
        let x = self.check_flux(f)?;
        let root = (1.0 - x).max(0.0).sqrt();
        // sigma (1 - sqrt(1 - x)) without cancellation for small x
        Ok(self.sigma() * x / (1.0 + root))
    }

    fn check_flux(&self, f: f64) -> Result<f64> {
        let fmax = self.max_flux();
        if !(f >= 0.0) {
            return Err(Error::domain(format!("flux must be nonnegative, got {f}")));
        }
        if f > fmax * (1.0 + BRANCH_TOLERANCE) {
            return Err(Error::domain(format!(
                "flux {f} exceeds the maximal flux {fmax}"
            )));
        }
        Ok((f / fmax).min(1.0))
    }

    fn check_density(&self, rho: f64) -> Result<()> {
        if rho >= 0.0 && rho <= self.rho_max {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "density {rho} outside [0, {}]",
                self.rho_max
            )))
        }
    }

    fn check_marker(&self, w: f64) -> Result<()> {
        if w >= 0.0 && w <= self.v_max {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "marker {w} outside [0, {}]",
                self.v_max
            )))
        }
    }
}

#[inline]
fn param_flux(rho_max: f64, rho: f64, w: f64) -> f64 {
    w * rho * (1.0 - rho / rho_max)
}

/// Fundamental diagrams of the three roads meeting at the junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadDiagrams {
    pub road1: FundamentalDiagram,
    pub road2: FundamentalDiagram,
    pub road3: FundamentalDiagram,
}

impl RoadDiagrams {
    pub fn new(
        road1: FundamentalDiagram,
        road2: FundamentalDiagram,
        road3: FundamentalDiagram,
    ) -> Self {
        Self {
            road1,
            road2,
            road3,
        }
    }

    pub fn uniform(fd: FundamentalDiagram) -> Self {
        Self::new(fd, fd, fd)
    }

    pub fn unit() -> Self {
        Self::uniform(FundamentalDiagram::unit())
    }

    /// Diagrams fitted to the Bonn-Beuel on-ramp recordings.
    pub fn reference_onramp() -> Self {
        Self::new(
            FundamentalDiagram { v_max: 62.94, rho_max: 84.99 },
            FundamentalDiagram { v_max: 77.59, rho_max: 400.0 },
            FundamentalDiagram { v_max: 75.28, rho_max: 400.0 },
        )
    }

    pub fn as_array(&self) -> [FundamentalDiagram; 3] {
        [self.road1, self.road2, self.road3]
    }

    pub fn road(&self, index: usize) -> &FundamentalDiagram {
        match index {
            0 => &self.road1,
            1 => &self.road2,
            2 => &self.road3,
            _ => panic!("road index {index} out of range"),
        }
    }

    /// Markers at their maximal values, which reproduce the plain fluxes.
    pub fn max_markers(&self) -> MarkerParams {
        MarkerParams {
            w1: self.road1.v_max,
            w2: self.road2.v_max,
            w3: self.road3.v_max,
        }
    }

    pub fn check_traces(&self, traces: &JunctionTraces) -> Result<()> {
        for (k, (fd, rho)) in self.as_array().iter().zip(traces.as_array()).enumerate() {
            if !(rho >= 0.0 && rho <= fd.rho_max) {
                return Err(Error::domain(format!(
                    "trace density {rho} on road {} outside [0, {}]",
                    k + 1,
                    fd.rho_max
                )));
            }
        }
        Ok(())
    }

    pub fn check_markers(&self, markers: &MarkerParams) -> Result<()> {
        for (k, (fd, w)) in self.as_array().iter().zip(markers.as_array()).enumerate() {
            if !(w >= 0.0 && w <= fd.v_max) {
                return Err(Error::domain(format!(
                    "marker {w} on road {} outside [0, {}]",
                    k + 1,
                    fd.v_max
                )));
            }
        }
        Ok(())
    }
}

/// Trace densities `(rho1, rho2, rho3)` next to the junction.
///
/// The same triple also carries coupling data `(rho_R^1, rho_R^2, rho_L^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JunctionTraces {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

impl JunctionTraces {
    pub fn new(rho1: f64, rho2: f64, rho3: f64) -> Self {
        Self { rho1, rho2, rho3 }
    }

    pub fn from_array(rho: [f64; 3]) -> Self {
        Self::new(rho[0], rho[1], rho[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rho1, self.rho2, self.rho3]
    }

    /// Clamps each density into `[0, rho_max]` of its road.
    pub fn clamped(&self, fds: &RoadDiagrams) -> Self {
        let c = |rho: f64, fd: &FundamentalDiagram| rho.clamp(0.0, fd.rho_max);
        Self::new(
            c(self.rho1, &fds.road1),
            c(self.rho2, &fds.road2),
            c(self.rho3, &fds.road3),
        )
    }
}

/// Coupling fluxes `(f1, f2, f3)` at the junction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CouplingFluxes {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

impl CouplingFluxes {
    pub fn new(f1: f64, f2: f64, f3: f64) -> Self {
        Self { f1, f2, f3 }
    }

    pub fn from_array(f: [f64; 3]) -> Self {
        Self::new(f[0], f[1], f[2])
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.f1, self.f2, self.f3]
    }

    pub fn kirchhoff_residual(&self) -> f64 {
        (self.f1 + self.f2 - self.f3).abs()
    }

    pub fn max_abs_diff(&self, other: &CouplingFluxes) -> f64 {
        (self.f1 - other.f1)
            .abs()
            .max((self.f2 - other.f2).abs())
            .max((self.f3 - other.f3).abs())
    }
}

/// Lagrangian markers `w1, w2, w3` scaling the junction flux per road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl MarkerParams {
    pub fn new(w1: f64, w2: f64, w3: f64) -> Self {
        Self { w1, w2, w3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }
}

/// Demands of the incoming roads and supply of the outgoing road. Determines
/// the admissible set of coupling fluxes completely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub d1: f64,
    pub d2: f64,
    pub s3: f64,
}

impl AdmissibleSet {
    pub fn new(d1: f64, d2: f64, s3: f64) -> Result<Self> {
        for (name, v) in [("d1", d1), ("d2", d2), ("s3", s3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(Self { d1, d2, s3 })
    }

    /// Demand and supply of the traces with the plain flux functions.
    pub fn from_traces(fds: &RoadDiagrams, traces: &JunctionTraces) -> Result<Self> {
        Self::with_markers(fds, traces, &fds.max_markers())
    }

    /// Generalized demand and supply with marker-parameterized fluxes.
    pub fn with_markers(
        fds: &RoadDiagrams,
        traces: &JunctionTraces,
        markers: &MarkerParams,
    ) -> Result<Self> {
        fds.check_traces(traces)?;
        fds.check_markers(markers)?;
        Ok(Self::with_markers_unchecked(fds, traces, markers))
    }

    pub(crate) fn with_markers_unchecked(
        fds: &RoadDiagrams,
        traces: &JunctionTraces,
        markers: &MarkerParams,
    ) -> Self {
        Self {
            d1: fds.road1.demand_unchecked(traces.rho1, markers.w1),
            d2: fds.road2.demand_unchecked(traces.rho2, markers.w2),
            s3: fds.road3.supply_unchecked(traces.rho3, markers.w3),
        }
    }

    /// Membership of `(f1, f2)` in the restricted admissible set.
    pub fn contains(&self, f1: f64, f2: f64) -> bool {
        0.0 <= f1 && f1 <= self.d1.min(self.s3 - f2) && 0.0 <= f2 && f2 <= self.d2.min(self.s3 - f1)
    }

    /// Membership with an absolute slack, for fluxes produced by floating
    /// point arithmetic.
    pub fn contains_with_tolerance(&self, f1: f64, f2: f64, tol: f64) -> bool {
        -tol <= f1
            && f1 <= self.d1.min(self.s3 - f2) + tol
            && -tol <= f2
            && f2 <= self.d2.min(self.s3 - f1) + tol
    }

    /// Maps `(theta1, theta2) in [0,1]^2` onto the admissible set.
    pub fn param_to_fluxes(&self, theta1: f64, theta2: f64) -> Result<CouplingFluxes> {
        for (name, t) in [("theta1", theta1), ("theta2", theta2)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::domain(format!("{name} = {t} outside [0, 1]")));
            }
        }
        Ok(self.param_to_fluxes_unchecked(theta1, theta2))
    }

    #[inline]
    pub(crate) fn param_to_fluxes_unchecked(&self, theta1: f64, theta2: f64) -> CouplingFluxes {
        let f1 = theta1 * self.d1.min(self.s3);
        let f2 = self.fit_under_supply(f1, theta2 * self.d2.min(self.s3 - f1));
        CouplingFluxes::new(f1, f2, f1 + f2)
    }

    /// Clamps a pair that is admissible up to rounding into the set and
    /// completes it by Kirchhoff's law.
    pub fn snap(&self, f1: f64, f2: f64) -> CouplingFluxes {
        let f1 = f1.clamp(0.0, self.d1.min(self.s3));
        let f2 = self.fit_under_supply(f1, f2.clamp(0.0, self.d2));
        CouplingFluxes::new(f1, f2, f1 + f2)
    }

    /// Lowers `f2` by a few ulps where rounding would let `f1 + f2` exceed the
    /// supply when checked as `f1 <= s3 - f2` or as `f2 <= s3 - f1`.
    #[inline]
    pub(crate) fn fit_under_supply(&self, f1: f64, f2: f64) -> f64 {
        let mut f2 = f2.min((self.s3 - f1).max(0.0));
        // steps of one ulp of s3 so that s3 - f2 moves even when f2 is tiny
        let step = f64::EPSILON * self.s3;
        while f2 > 0.0 && (f1 > self.s3 - f2 || f2 > self.s3 - f1) {
            f2 = (f2 - step).min(f2.next_down()).max(0.0);
        }
        f2
    }

    /// Inverse of [`param_to_fluxes`](Self::param_to_fluxes). `None` when a
    /// clamp vanishes and the parameter is not determined.
    pub fn fluxes_to_params(&self, f1: f64, f2: f64) -> Option<(f64, f64)> {
        let a = self.d1.min(self.s3);
        let b = self.d2.min(self.s3 - f1);
        if a > 0.0 && b > 0.0 {
            Some((f1 / a, f2 / b))
        } else {
            None
        }
    }
}

/// Converts coupling fluxes to coupling data `(rho_R^1, rho_R^2, rho_L^3)`.
///
/// On an incoming road the trace is kept when the flux matches its own flux,
/// otherwise the congested preimage of the coupling flux is used. On the
/// outgoing road the free-flow preimage is used instead. The fluxes have to
/// satisfy the demand and supply conditions of the traces.
pub fn fluxes_to_coupling_data(
    fds: &RoadDiagrams,
    traces: &JunctionTraces,
    fluxes: &CouplingFluxes,
) -> Result<JunctionTraces> {
    let ds = AdmissibleSet::from_traces(fds, traces)?;
    let bounds = [ds.d1, ds.d2, ds.s3];
    let names = ["demand of road 1", "demand of road 2", "supply of road 3"];
    let diagrams = fds.as_array();
    let rho0 = traces.as_array();
    let f0 = fluxes.as_array();
    let mut out = [0.0; 3];
    for k in 0..3 {
        let fd = &diagrams[k];
        let tol = BRANCH_TOLERANCE * fd.max_flux();
        if !(f0[k] >= -tol && f0[k] <= bounds[k] + tol) {
            return Err(Error::contract(format!(
                "coupling flux {} on road {} violates the {} ({})",
                f0[k],
                k + 1,
                names[k],
                bounds[k]
            )));
        }
        let f = f0[k].max(0.0);
        let own = fd.flux_unchecked(rho0[k]);
        out[k] = if (f - own).abs() <= tol {
            rho0[k]
        } else {
            let rho = if k < 2 {
                fd.inverse_congested(f)?
            } else {
                fd.inverse_free(f)?
            };
            let back = fd.flux_unchecked(rho);
            let scale = f.max(INVERSION_FLOOR * fd.max_flux());
            if (back - f).abs() > INVERSION_TOLERANCE * scale {
                return Err(Error::Numerical(format!(
                    "flux inversion on road {} lost accuracy: f({rho}) = {back}, expected {f}",
                    k + 1
                )));
            }
            rho
        };
    }
    Ok(JunctionTraces::from_array(out))
}
