//! Actor-critic learner with a clipped surrogate objective.

mod adam;
pub mod checkpoint;
pub mod gae;
pub mod gaussian;
pub mod mlp;
pub mod network;
pub mod normalizer;
pub mod ppo;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{config_hash, Checkpoint};
pub use gae::compute_gae;
pub use gaussian::{entropy, log_prob, sample_action, SampledAction};
pub use mlp::Mlp;
pub use network::{ActorCritic, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use normalizer::RunningNorm;
pub use ppo::{loss_and_grad, ppo_update, LossParts, LossWeights, Sample, UpdateDiagnostics, UpdateSettings};
pub use train::{train, EpisodeRecord, LearnerConfig, RolloutBuffer, TrainOutput, UpdateRecord};
