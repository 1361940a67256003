//! Exploration, training, evaluation and curriculum fine-tuning.

mod evaluation;
mod exploration;
mod metrics;
mod trainer;

pub use evaluation::{
    evaluate, evaluate_checkpoint, EvalSummary, Evaluation, GreedyPolicy, Policy, RandomPolicy,
    ScriptedPolicy,
};
pub use exploration::{
    exploration_probability, greedy_action, select_action, ActionSource, ExplorationParams,
    Selection,
};
pub use metrics::{
    parse_trajectory, quartile_means, read_metrics_csv, write_metrics_csv, write_trajectory,
    EpisodeMetrics, MetricsWriter, TrajectoryRecord, METRICS_HEADER,
};
pub use trainer::{curriculum_finetune, episode_rng, half_life_decay, TrainConfig, Trainer};
