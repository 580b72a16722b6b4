//! Information capacity of ligand-receptor signal transduction.
//!
//! A population of `n` receptors is modelled as a birth-death channel whose
//! state (the number of bound receptors) is also its output, driven by a
//! binary ligand concentration. The crate provides:
//!
//! - channel construction, discretization and stationary laws ([`channel`]);
//! - exact mutual information rates, per step and in the `tau -> 0` limit
//!   ([`entropy`]);
//! - IID and feedback capacity optimizers ([`capacity`]);
//! - a seeded Monte Carlo oracle with a plug-in MI estimator ([`simulate`]);
//! - TOML channel documents ([`channel_spec`]).
//!
//! Information is in nats; rates are in Hz.

pub mod capacity;
pub mod channel;
pub mod channel_spec;
pub mod entropy;
pub mod error;
pub mod simulate;

pub use capacity::{
    capacity_feedback, capacity_iid, verify_n_scaling, CapacityResult, OptimizerConfig, ScalingReport, ScalingRow,
};
pub use channel::{
    binomial_occupancy, discretize, output_chain, stationary, BirthDeathChannel, ChannelKind, Concentration,
    DiscreteChannelMatrices, FeedbackPolicy, ReceptorKinetics, StationaryDistribution, TridiagonalStochastic,
};
pub use channel_spec::ChannelSpec;
pub use entropy::{
    binary_entropy, edge_contributions, mi_rate_continuous, mi_rate_continuous_limit, mi_rate_discrete, mi_rate_iid,
    partial_entropy, psi, triple_entropy, MiRate, RateBasis,
};
pub use error::{Error, Result};
pub use simulate::{
    estimate_mi, occupancy, occupancy_chi_squared, simulate_trajectory, EmpiricalEstimate, SimulationConfig,
    Trajectory, TransitionCounts,
};
