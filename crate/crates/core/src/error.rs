use thiserror::Error;

/// Errors raised by channel construction, rate evaluation and optimization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid kinetics: {0}")]
    InvalidKinetics(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// `tau * (a_{k,H} + b_k) >= 1` at some state `k`.
    #[error(
        "step size tau={tau} too large: tau * (up_H[{state}] + down[{state}]) = {product} must be < 1 \
         (max admissible tau is {max_tau})"
    )]
    StepSize {
        tau: f64,
        state: usize,
        product: f64,
        max_tau: f64,
    },

    /// A zero up- or down-rate splits the chain; no unique stationary law.
    #[error("chain is not irreducible: zero {direction}-rate out of state {state}")]
    Irreducible { state: usize, direction: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    /// A closed form was requested for a channel kind it does not describe.
    #[error("{operation} requires an independent-receptor channel, got {kind}")]
    KindMismatch {
        operation: &'static str,
        kind: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid simulation setup: {0}")]
    Simulation(String),

    /// Internal-consistency failure; indicates a bug rather than bad input.
    #[error("consistency check failed: {0}")]
    Consistency(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
