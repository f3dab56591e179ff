//! Adaptive campaign control.
//!
//! A campaign starts from level-dependent warm-up samples and then iterates:
//! sample, estimate indicators, optionally fit a log-linear decay to the
//! difference variances, solve for the coefficients, estimate the error, and
//! either stop or re-allocate with the samples already computed kept as a
//! floor.

mod campaign;
mod confidence;
mod config;
mod decay;

pub use campaign::{run_campaign, CampaignResult, CampaignRunner, CampaignStatus, IterationState, MAX_TOP_UP_ROUNDS};
pub use confidence::{inflate_for_confidence, variance_spread, weighted_spreads};
pub use config::{
    CampaignConfig, CampaignSection, CoefficientMode, HierarchySection, ModeSection, ModelKind, ModelSection,
    StatisticsSection, SyntheticParams, PRODUCTS,
};
pub use decay::{apply_decay_fit, fit_decay, DecayFit};
