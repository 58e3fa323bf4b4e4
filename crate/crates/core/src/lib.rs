//! Decentralized bandit learning in two-sided matching markets with linear
//! contextual rewards and latent environments.
//!
//! Agents learn arm rankings from noisy rewards, recover which latent environment
//! is active from those rankings, and replay Gale-Shapley proposals per environment.
//! Three learners are provided: ETPGS, IETP-GS (adds partial-rank environment
//! matching) and CD-ETP-GS (adds CUSUM restarts for piecewise-stationary parameters).

pub mod agents;
pub mod change_detection;
pub mod error;
pub mod estimation;
pub mod gale_shapley;
pub mod market;
pub mod ranking;
pub mod simulator;

pub use agents::Algorithm;
pub use error::{Error, Result};
pub use market::{presets, validate_scenario, MarketInstance, ValidationReport};
pub use simulator::{run, summarize, AgentMode, RunConfig, RunResult, Summary};
