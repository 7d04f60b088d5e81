//! Sampled-data distributed control of nonholonomic unicycle swarms on
//! proximity networks.
//!
//! Agents live in the unit square and interact with every other agent closer
//! than a fixed radius. Headings and speeds are updated only at sampling
//! instants `t_k = k·τ` by nearest-neighbour averaging (optionally blended with
//! a reference signal for leader agents), held as constant rates over each
//! dwell interval, and positions are integrated exactly in closed form.
//!
//! The numerical core is generic over the scalar type (see [`Scalar`]); the
//! experiment harness and the file formats work in `f64`.

pub mod conditions;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod quadrature;
pub mod scalar;
pub mod schedule;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use conditions::{ConditionReport, InitialDiagnostics, LeaderDegreeReport};
pub use controllers::ControlSignal;
pub use dynamics::{AgentState, Controller, ModelParams, Role, SwarmState, Trajectory};
pub use graph::{Position2D, ProximityGraph, RingSet, SpectralSummary};
pub use harness::{CampaignSummary, Mode, RunConfig, RunOutcome};
pub use metrics::{StepMetrics, Verdict};
pub use schedule::ReferenceSchedule;

pub type Position = Position2D<f64>;
pub type Graph = ProximityGraph<f64>;
pub type Agent = AgentState<f64>;
pub type Swarm = SwarmState<f64>;
pub type Params = ModelParams<f64>;
pub type Schedule = ReferenceSchedule<f64>;
pub type Spectrum = SpectralSummary<f64>;
pub type Metrics = StepMetrics<f64>;
