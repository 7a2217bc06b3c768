//! Delay-constrained opportunistic network coding for a two-way relay.
//!
//! Two sources A and B share a MAC slot toward a relay. Each slot a
//! randomized policy, indexed by the queue pair `(i, j)`, chooses whether A,
//! B, both (lattice-coded) or neither transmit. Empty slots are throughput
//! for a secondary pair. This crate models the queue pair as a Markov chain,
//! finds the policy maximizing empty slots under an average-delay cap with
//! a linear program, converts it into channel-gain thresholds for Rayleigh
//! fading, and checks everything with a slot-level simulator.

pub mod chain;
pub mod lp;
pub mod metrics;
pub mod params;
pub mod policy;
pub mod power;
pub mod sim;
pub mod state;
pub mod stationary;

pub use chain::{build_transition_matrix, ChainError, TransitionMatrix};
pub use lp::{
    assemble_lp, optimal_policy, recover_policy, solve_lp, verify_solution, LpError, LpProblem,
    LpSolution, LpStatus, VerificationReport,
};
pub use metrics::{analytic_metrics, evaluate_policy, AnalyticMetrics, EvaluateError};
pub use params::{arrival_probs, ArrivalProbs, ParamError, SystemParams};
pub use policy::{allowed_actions, validate_policy, Action, Policy, ValidationReport, Violation};
pub use power::{
    average_power, power_profile, snr_targets, state_power, thresholds_from_policy, PowerProfile,
    SnrTargets, ThresholdTable,
};
pub use sim::{simulate, Mode, Scheme, SimConfig, SimError, SimReport};
pub use state::{state_space, QueueState, Region, StateSpace};
pub use stationary::{stationary_distribution, StationaryDistribution, StationaryError};
