//! Learned placement policy: graph features, a two-head policy network
//! with a value head, PPO updates, and the rollout/training loop.

pub mod features;
pub mod model;
pub mod ppo;
pub mod train;

pub use features::{Adjacency, FeatureExtractor, GraphFeatures, FEATURE_DIM};
pub use model::{PolicyModel, CHECKPOINT_VERSION};
pub use ppo::{PpoConfig, PpoError, SampleMode};
pub use train::{
    collect_episode, evaluate_policy, train_loop, train_loop_with, EvalStats, TrainConfig,
    UpdateMetrics,
};
