//! Simulation core for a satellite/HAPS/ground network with a reflecting
//! surface: channel synthesis, zero-forcing precoding, rate metrics and a
//! DDPG agent that learns the precoder.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod ddpg;
pub mod error;
pub mod metrics;
pub mod neural;
pub mod numerics;
pub mod scenario;

pub use beamforming::{compute_sinr, solve_zf, BeamformingMatrix, SinrReport};
pub use channel::{build_channels, ChannelSet, RisPhaseProfile};
pub use ddpg::{AgentConfig, Environment, TrainingOutcome};
pub use error::{Error, Infeasibility, Result};
pub use metrics::{alpha_fair_throughput, RateReport};
pub use neural::{MlpParams, Mode};
pub use numerics::{ComplexMatrix, SimRng};
pub use scenario::{GeometryConfig, UserCount, UserDistribution, UserLayout};
