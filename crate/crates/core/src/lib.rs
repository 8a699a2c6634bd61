//! Composable partially observed Markov process models with particle
//! filtering, particle marginal Metropolis-Hastings and forward simulation.

pub mod compose;
pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod lgcp;
pub mod model;
pub mod obs;
pub mod oracle;
pub mod params;
pub mod pmmh;
pub mod resample;
pub mod rng;
pub mod sde;
pub mod sim;
pub mod stats;
pub mod tree;

pub use compose::{compose, compose_all, concat_transform, identity_model};
pub use error::{Error, Result};
pub use filter::{
    filter_scan, filter_step, init_filter, path_log_likelihood, FilterConfig, FilterScan, FilterState, FilterSummary,
    ParticleFilter, Prediction,
};
pub use lgcp::{event_log_density, LgcpAugmentedState};
pub use model::{validate_shape, LeafLayout, Model, UnparamModel};
pub use obs::{
    bernoulli_model, fourier_vector, gaussian_model, lgcp_model, phase_amplitude, poisson_model, seasonal_model,
    Component, Family,
};
pub use oracle::{conjugate_posterior, kalman_log_likelihood, KalmanFilter, LocalLevel};
pub use params::{combine_params, Constraint, InitialStateParams, LeafParams, ParamTree};
pub use pmmh::{
    acceptance_rate, pmmh_chain, pmmh_step, propose_random_walk, Chain, ChainConfig, MetropState, Parameters, PmmhChain,
    PmmhConfig, Prior, Priors, Proposal, RandomWalk,
};
pub use resample::{resample_multinomial, resample_stratified, resample_systematic, Resampling};
pub use rng::{Purpose, Substreams};
pub use sde::{Diffusion, Drift, SdeParams};
pub use sim::{simulate_at_times, simulate_lgcp, LgcpSimulation, Simulation, ThinningRecord};
pub use tree::{branch, StateTree, TimedObservation};
