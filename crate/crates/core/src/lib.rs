//! Activity-driven adaptive SIS (A-SIS) epidemics on temporal networks.
//!
//! - [`model`]: parameters, derived rates and activity samplers.
//! - [`simulator`]: Monte Carlo simulation and decay-rate estimation.
//! - [`exact`]: the full `2^n`-state Markov chain for small `n`.
//! - [`bounds`]: the mean-field matrix and the closed-form decay-rate bound.
//! - [`allocation`]: optimal social-distancing investments via geometric programs.

pub mod allocation;
pub mod bounds;
pub mod exact;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod simulator;

pub use adsis_gp as gp;

pub use allocation::{AllocationError, AllocationResult, CostModel};
pub use bounds::{BoundReport, BoundsError};
pub use exact::{ExactError, TransitionMatrix};
pub use model::{ActivityDistribution, DerivedRates, ModelError, ModelParams};
pub use rng::{Seed, StreamDomain};
pub use simulator::{DecayEstimate, DecayMethod, NodeStateVector, ProbabilitySeries, SimError};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}
