use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exploration::greedy_action;
use super::metrics::{EpisodeAccumulator, EpisodeMetrics, TrajectoryRecord};
use super::trainer::episode_rng;
use crate::environment::{Action, Simulator, WorldState};
use crate::error::{Error, Result};
use crate::qnet::{Checkpoint, ObservationConfig, QNetwork};

/// Decides an action from the current state. Implementations must be
/// shareable across evaluation threads.
pub trait Policy: Sync {
    fn act(&self, sim: &Simulator, state: &WorldState, rng: &mut ChaCha8Rng) -> Result<Action>;
}

/// Argmax of the Q-network; never explores.
pub struct GreedyPolicy<'a> {
    net: &'a QNetwork,
    observation: ObservationConfig,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(net: &'a QNetwork, observation: ObservationConfig) -> Result<Self> {
        if net.input_dim() != observation.dim() {
            return Err(Error::Schema(format!(
                "network expects {} inputs but the observation has {} values",
                net.input_dim(),
                observation.dim()
            )));
        }
        Ok(Self { net, observation })
    }

    pub fn from_checkpoint(checkpoint: &'a Checkpoint) -> Result<Self> {
        Self::new(&checkpoint.online, checkpoint.observation)
    }
}

impl Policy for GreedyPolicy<'_> {
    fn act(&self, sim: &Simulator, state: &WorldState, _rng: &mut ChaCha8Rng) -> Result<Action> {
        let q = self
            .net
            .forward(&self.observation.encode(state, sim.config()))?;
        Ok(greedy_action(&q))
    }
}

/// Uniformly random actions.
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&self, _sim: &Simulator, _state: &WorldState, rng: &mut ChaCha8Rng) -> Result<Action> {
        Ok(Action::ALL[rng.random_range(0..Action::COUNT)])
    }
}

/// Wraps a plain function as a policy.
pub struct ScriptedPolicy<F>(pub F);

impl<F> Policy for ScriptedPolicy<F>
where
    F: Fn(&Simulator, &WorldState) -> Action + Sync,
{
    fn act(&self, sim: &Simulator, state: &WorldState, _rng: &mut ChaCha8Rng) -> Result<Action> {
        Ok((self.0)(sim, state))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    /// Mean ground-plane distance over every evaluated step.
    pub avg_distance: f64,
    /// Mean visible steps per episode.
    pub avg_time: f64,
    /// Mean over episodes of the per-step mean reward.
    pub avg_reward: f64,
    pub collisions: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: EvalSummary,
    pub episodes: Vec<EpisodeMetrics>,
    /// One record list per episode when trajectories were requested.
    pub trajectories: Option<Vec<Vec<TrajectoryRecord>>>,
}

struct EpisodeRun {
    metrics: EpisodeMetrics,
    distance_sum: f64,
    trajectory: Vec<TrajectoryRecord>,
}

const POLICY_STREAM_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn run_episode<P: Policy + ?Sized>(
    sim: &Simulator,
    policy: &P,
    seed: u64,
    episode: u64,
    capture: bool,
) -> Result<EpisodeRun> {
    let mut env_rng = episode_rng(seed, episode);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed ^ POLICY_STREAM_SALT);
    policy_rng.set_stream(episode);
    let mut state = sim.reset(&mut env_rng)?;
    let mut acc = EpisodeAccumulator::default();
    let mut trajectory = Vec::new();
    loop {
        let action = policy.act(sim, &state, &mut policy_rng)?;
        let outcome = sim.step(&state, action, &mut env_rng)?;
        acc.record(&outcome);
        if capture {
            let target = outcome.state.target_position(sim.road());
            trajectory.push(TrajectoryRecord::from_step(&outcome, action, target));
        }
        state = outcome.state;
        if outcome.done {
            break;
        }
    }
    Ok(EpisodeRun {
        metrics: acc.finish(episode, 0.0, 0.0),
        distance_sum: acc.distance_sum(),
        trajectory,
    })
}

/// Runs `episodes` episodes of `policy` in parallel. Episode `i` uses the
/// same environment randomness for every policy, so results are paired.
pub fn evaluate<P: Policy + ?Sized>(
    sim: &Simulator,
    policy: &P,
    episodes: usize,
    seed: u64,
    capture_trajectories: bool,
) -> Result<Evaluation> {
    if episodes == 0 {
        return Err(Error::Schema(
            "evaluation needs at least one episode".into(),
        ));
    }
    let runs: Vec<EpisodeRun> = (0..episodes as u64)
        .into_par_iter()
        .map(|e| run_episode(sim, policy, seed, e, capture_trajectories))
        .collect::<Result<_>>()?;
    let total_steps: usize = runs.iter().map(|r| r.metrics.steps).sum();
    let n = episodes as f64;
    let summary = EvalSummary {
        episodes,
        avg_distance: runs.iter().map(|r| r.distance_sum).sum::<f64>() / total_steps as f64,
        avg_time: runs
            .iter()
            .map(|r| r.metrics.visible_steps as f64)
            .sum::<f64>()
            / n,
        avg_reward: runs.iter().map(|r| r.metrics.mean_step_reward).sum::<f64>() / n,
        collisions: runs.iter().filter(|r| r.metrics.collided).count(),
    };
    let episodes_out = runs.iter().map(|r| r.metrics).collect();
    let trajectories =
        capture_trajectories.then(|| runs.into_iter().map(|r| r.trajectory).collect());
    Ok(Evaluation {
        summary,
        episodes: episodes_out,
        trajectories,
    })
}

/// Greedy evaluation of a checkpoint.
pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    sim: &Simulator,
    episodes: usize,
    seed: u64,
    capture_trajectories: bool,
) -> Result<Evaluation> {
    let policy = GreedyPolicy::from_checkpoint(checkpoint)?;
    evaluate(sim, &policy, episodes, seed, capture_trajectories)
}
