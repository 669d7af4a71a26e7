//! Simulation and analysis toolkit for high-dimensional quantum key
//! distribution with position-momentum entangled photon pairs.
//!
//! The crate has two halves that must agree with each other:
//!
//! * an analytic model ([`analytic`], [`qkd`], [`sweep`]) that evaluates the
//!   joint detection matrix of a mode grid in closed form and turns it into
//!   error rates, photon information efficiencies and bit rates; and
//! * a Monte Carlo pipeline ([`simulate`], [`events`]) that generates
//!   time-tagged single-photon camera event streams, writes them in a
//!   bit-exact binary format, and recovers the same quantities from the
//!   streams by coincidence counting.
//!
//! The numerical core is generic over the scalar type through [`num::Real`];
//! concrete `f64` aliases are exported at the crate root.

pub mod analytic;
pub mod config;
pub mod events;
pub mod layouts;
pub mod num;
pub mod physics;
pub mod qkd;
pub mod simulate;
pub mod sweep;

pub use num::Real;

/// `f64` instantiations of the generic core types.
pub type SourceParams64 = physics::SourceParams<f64>;
pub type CorrelationWidths64 = physics::CorrelationWidths<f64>;
pub type OpticsParams64 = physics::OpticsParams<f64>;
pub type DetectionParams64 = analytic::DetectionParams<f64>;
pub type NextGenParams64 = analytic::NextGenParams<f64>;
pub type AnalyticModel64 = analytic::AnalyticModel<f64>;
pub type JointDetectionMatrix64 = analytic::JointDetectionMatrix<f64>;
pub type QkdMetrics64 = qkd::QkdMetrics<f64>;
