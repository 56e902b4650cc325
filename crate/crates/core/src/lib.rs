//! Optimal secondary-user power and transmission duration for an unslotted
//! cognitive-radio channel whose primary user alternates between
//! exponentially distributed on and off periods.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: E1, I0, Marcum Q1 and an adaptive quadrature oracle.
//! - [`traffic`]: the alternating-renewal primary channel.
//! - [`link`]: Rayleigh-fading outage probability and ergodic capacities.
//! - [`sensing`]: perfect and quantized soft sensing.
//! - [`throughput`]: analytic evaluation of a transmission policy.
//! - [`optimizer`]: grid search and coordinate descent over policies.
//! - [`simulator`]: event-driven Monte Carlo used to validate the analytics.
//! - [`presets`]: the reference channel parameter sets.

pub mod error;
pub mod link;
pub mod numerics;
pub mod optimizer;
pub mod presets;
pub mod sensing;
pub mod simulator;
pub mod throughput;
pub mod traffic;

pub use error::{Error, Result};
pub use link::LinkBudget;
pub use sensing::{SoftMetricModel, ThresholdSet};
pub use throughput::{PerfectPolicy, Policy, PolicyEvaluation, Scenario, SoftPolicy};
pub use traffic::{ChannelState, TrafficModel};
