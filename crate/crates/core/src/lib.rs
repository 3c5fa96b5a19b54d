//! Coupling conditions for macroscopic traffic flow at a 2-to-1 junction.
//!
//! The crate provides
//! * the junction substrate: Greenshields fundamental diagrams, demand and
//!   supply, the admissible set of coupling fluxes and its parametrization
//!   ([`junction`]),
//! * classical coupling models C1-C4 ([`classical`]) and the
//!   machine-learning models ML1-ML3 ([`ml`]) behind the common
//!   [`CouplingModel`] trait,
//! * the calibration pipeline: delay estimation, fundamental-diagram
//!   fitting, differential evolution and AMSGrad training ([`calibration`]),
//! * trajectory processing and a synthetic data generator ([`data`]),
//! * a finite-volume relaxation scheme on the junction network ([`solver`]).

pub mod calibration;
pub mod cli;
pub mod classical;
pub mod config;
pub mod coupling;
pub mod data;
pub mod error;
pub mod junction;
pub mod ml;
pub mod pipeline;
pub mod solver;
pub mod units;

pub use coupling::{check_consistency, CouplingModel};
pub use error::{Error, Result};
pub use junction::{
    AdmissibleSet, CouplingFluxes, FundamentalDiagram, JunctionTraces, MarkerParams, RoadDiagrams,
};
