//! Free-energy engine for the two-dimensional cluster variation method.
//!
//! The crate counts configuration variables on periodic bistate zigzag
//! grids ([`lattice`]), evaluates and inverts the CVM free energy
//! ([`thermo`]), drives grids toward equilibrium with conserved swaps
//! ([`minimize`]), fits a representational grid to an external one across a
//! sensing layer ([`blanket`]), checks the discrete variational free-energy
//! identities ([`varbayes`]) and provides brute-force oracles ([`exact`]).
//!
//! Numeric code is generic over [`Real`]; counting is exact for any
//! rational-like scalar. The aliases below fix the common choices.

pub mod blanket;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod minimize;
pub mod scalar;
pub mod thermo;
pub mod varbayes;

pub use error::{Error, ErrorClass, Result};
pub use lattice::{count_config, count_config_vars, ConfigCounts, ConfigVars, GridState, Site, Topology, Unit};
pub use scalar::Real;

/// Exact rational scalar for counting checks.
pub type Rational = num_rational::Rational64;

pub type ConfigVarsF64 = ConfigVars<f64>;
pub type ConfigVarsF32 = ConfigVars<f32>;
pub type ExactConfigVars = ConfigVars<Rational>;
pub type ThermoReportF64 = thermo::ThermoReport<f64>;
pub type HEstimateF64 = thermo::HEstimate<f64>;
pub type MinimizeTraceF64 = minimize::MinimizeTrace<f64>;
pub type DistributionF64 = varbayes::Distribution<f64>;
pub type DiscreteJointF64 = varbayes::DiscreteJoint<f64>;
pub type BoltzmannReportF64 = exact::BoltzmannReport<f64>;
pub type EnumerationResultF64 = exact::EnumerationResult<f64>;
pub type PipelineReportF64 = blanket::PipelineReport<f64>;

/// Engine version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
