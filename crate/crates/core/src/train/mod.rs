//! Actor-critic training: PPO-style updates with RMSProp, optional heuristic
//! imitation warm-up, update rollback, checkpoints and drift metrics.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod divergence;
pub mod loss;
pub mod metrics;
pub mod rmsprop;
pub mod trainer;
pub mod trajectory;

pub use agent::{
    loki_schedule, sample_index, Agent, OptimizerState, Policy, UpdateMode, UpdateStats,
};
pub use checkpoint::{list_checkpoints, Checkpoint, CheckpointLabel, CheckpointMeta};
pub use config::{CriticTarget, LossVariant, TrainerConfig};
pub use divergence::{
    divergence, read_divergence_csv, write_divergence_csv, Divergence, DivergenceRecord,
};
pub use loss::{critic_loss, imitation_loss, kl_scaled_loss, ppo_clip_loss, LossOutput};
pub use metrics::{read_reward_curve, EpisodeMetrics, GrowthRecord, MetricsWriter};
pub use rmsprop::RmsProp;
pub use trainer::{
    derive_seed, evaluate, play, Evaluation, TrainEvent, TrainReport, Trainer, SOLVE_WINDOW,
};
pub use trajectory::{
    normalize_advantages, samples_from, Decision, Sample, Trajectory, Transition,
};
