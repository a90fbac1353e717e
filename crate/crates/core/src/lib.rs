//! Fleet routing with vehicle-to-vehicle charging (V2VC).
//!
//! The toolkit models a fleet of EVs on a road map over a discrete horizon.
//! EVs may charge each other at meeting points and draw from the grid at
//! parking stations. The model is assembled as an exact integer program over
//! a time-space network, solved exactly at desk scale by branch and bound
//! (with an independent brute-force oracle), and approximately at realistic
//! scale by the R-V2VC matching heuristic. A 3SAT reduction turns the
//! problem's hardness argument into an executable test generator.
//!
//! Core math is generic over a signed integer scalar ([`EnergyScalar`]);
//! the [`Energy`] alias fixes the default used by the CLI and file formats.

pub mod generator;
pub mod graph;
pub mod ip;
pub mod mps;
pub mod plan;
pub mod scalar;
pub mod scenario;
pub mod solver;
pub mod verifier;

pub use scalar::EnergyScalar;

/// Default energy scalar for the CLI and the file formats.
pub type Energy = i64;

/// Road map instantiated at the default scalar.
pub type RoadNetwork = graph::RoadNetwork<Energy>;
/// Time-space network at the default scalar.
pub type TimeSpaceNetwork = graph::TimeSpaceNetwork<Energy>;
/// Scenario at the default scalar.
pub type Scenario = scenario::Scenario<Energy>;
