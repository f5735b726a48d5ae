//! Expected-goals modeling, finishing-skill simulation and subgroup
//! calibration.
//!
//! Shots come in through [`statsbomb`] or the flat-file [`cache`], are turned
//! into six model features by [`features`], and scored by a ridge-penalized
//! logistic regression in [`logistic`]. The remaining modules build on those
//! predictions: Monte-Carlo skill experiments ([`sampler`], [`experiments`]),
//! exact goal-count distributions ([`goal_dist`]), subgroup calibration
//! diagnostics ([`subgroup`]) and multi-calibrated baselines ([`multicalib`]).

pub mod cache;
pub mod elo;
pub mod error;
pub mod experiments;
pub mod features;
pub mod gax;
pub mod goal_dist;
pub mod logistic;
pub mod metrics;
pub mod multicalib;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod shot;
pub mod split;
pub mod statsbomb;
pub mod subgroup;
pub mod synthetic;

pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector};
pub use gax::compute_gax;
pub use goal_dist::{poisson_binomial, tail_probabilities, GoalDistribution, ShotFilter};
pub use logistic::{train_logistic, TrainOptions, XgModel};
pub use metrics::{evaluate, EvalReport};
pub use multicalib::{fit_multicalibration, MultiCalibOptions, MultiCalibratedModel};
pub use sampler::{build_distribution, SpatialShotDistribution};
pub use shot::{
    BodyPart, MatchInfo, PlayerProfile, Position, ShotDataset, ShotRecord, TeamRating, TeamTier,
};
pub use subgroup::{SubgroupKey, VolumeTier};
