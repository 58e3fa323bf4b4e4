//! The ground-truth market: instances, feature generation, arm acceptance and validation.

mod arms;
mod features;
mod instance;
pub mod presets;
mod validate;

pub use arms::{accept_proposals, resolve_collisions, ArmPreferences, MatchOutcome, Matching};
pub use features::{
    generate_features, min_gap, min_rank_gap, order_by_mean, true_mean, true_top_n, FeatureSet,
    RoundContext,
};
pub use instance::{
    ChangePoint, EnvSchedule, EnvironmentSpec, MarketInstance, NoiseModel, SwitchSpec,
    SCENARIO_SCHEMA,
};
pub use validate::{validate_scenario, Clause, ValidationFailure, ValidationReport};
