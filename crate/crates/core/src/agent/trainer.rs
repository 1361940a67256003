use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exploration::{exploration_probability, select_action, ExplorationParams};
use super::metrics::{EpisodeAccumulator, EpisodeMetrics};
use crate::environment::Simulator;
use crate::error::{Error, Result};
use crate::qnet::{
    loss_and_gradient, sgd_step, Checkpoint, Experience, NetworkSpec, ObservationConfig, QNetwork,
    ReplayBuffer, RngState, TargetNetwork, GRID_CHANNELS,
};

/// Learning and bookkeeping settings for a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Per-episode multiplicative decay of the learning rate.
    pub lr_decay: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    /// Stored transitions required before learning starts.
    pub warmup: usize,
    /// Environment steps per gradient step.
    pub learn_every: usize,
    pub terminate_on_collision: bool,
    /// Rewards are divided by this before they enter the replay buffer.
    pub reward_scale: f64,
    pub seed: u64,
    pub observation: ObservationConfig,
    /// Hidden widths of the dense network (feature observations).
    pub hidden: Vec<usize>,
    /// Convolution widths of the grid network.
    pub conv_channels: Vec<usize>,
    /// Dense hidden width after the convolutions.
    pub conv_hidden: usize,
}

/// Decay factor that halves a quantity every `episodes` episodes.
pub fn half_life_decay(episodes: f64) -> f64 {
    0.5f64.powf(1.0 / episodes)
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            lr_initial: 0.01,
            lr_final: 0.001,
            lr_decay: half_life_decay(500.0),
            gamma: 0.1,
            batch_size: 64,
            replay_capacity: 50_000,
            target_sync: 500,
            warmup: 1000,
            learn_every: 1,
            terminate_on_collision: true,
            reward_scale: 1000.0,
            seed: 0,
            observation: ObservationConfig::default(),
            hidden: vec![128, 128],
            conv_channels: vec![8, 8, 8],
            conv_hidden: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.lr_initial >= 0.0 && self.lr_final >= 0.0 && self.lr_final <= self.lr_initial) {
            return Err(format!(
                "need 0 <= lr_final <= lr_initial (got {} and {})",
                self.lr_final, self.lr_initial
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err("batch_size must be positive and at most replay_capacity".into());
        }
        if self.target_sync == 0 || self.learn_every == 0 {
            return Err("target_sync and learn_every must be positive".into());
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err("reward_scale must be positive".into());
        }
        if self.hidden.contains(&0)
            || self.conv_channels.len() != 3
            || self.conv_channels.contains(&0)
        {
            return Err(
                "network widths must be positive, with exactly three convolution widths".into(),
            );
        }
        self.observation.validate()
    }

    /// Network shape implied by the observation mode.
    pub fn network_spec(&self) -> NetworkSpec {
        match self.observation {
            ObservationConfig::Features { .. } => {
                QNetwork::mlp_spec(self.observation.dim(), &self.hidden)
            }
            ObservationConfig::Grid { size, .. } => {
                let mut channels = vec![GRID_CHANNELS];
                channels.extend_from_slice(&self.conv_channels);
                NetworkSpec::Conv {
                    grid: size,
                    channels,
                    hidden: self.conv_hidden,
                    outputs: 6,
                }
            }
        }
    }

    /// `max(lr_final, lr_initial * lr_decay^k)`.
    pub fn learning_rate(&self, k: u64) -> f64 {
        (self.lr_initial * self.lr_decay.powf(k as f64)).max(self.lr_final)
    }
}

/// Generator driving the environment in episode `episode` of a run seeded
/// with `seed`. Each episode owns a stream, so different policies see the same
/// target motion for the same episode.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

const AGENT_STREAM: u64 = u64::MAX;

/// DQN learner bound to one environment.
pub struct Trainer {
    sim: Simulator,
    config: TrainConfig,
    exploration: ExplorationParams,
    online: QNetwork,
    target: TargetNetwork,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    episodes_done: u64,
    /// Episode at which the exploration schedule restarts.
    k_origin: u64,
    gradient_steps: u64,
    env_steps: u64,
}

impl Trainer {
    pub fn new(
        sim: Simulator,
        config: TrainConfig,
        exploration: ExplorationParams,
    ) -> Result<Self> {
        config
            .validate()
            .map_err(|e| Error::Schema(format!("train config: {e}")))?;
        exploration
            .validate()
            .map_err(|e| Error::Schema(format!("exploration: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(AGENT_STREAM);
        let online = QNetwork::random(config.network_spec(), &mut rng)?;
        let target = TargetNetwork::new(&online, config.target_sync)?;
        let replay = ReplayBuffer::new(config.replay_capacity)?;
        Ok(Self {
            sim,
            config,
            exploration,
            online,
            target,
            replay,
            rng,
            episodes_done: 0,
            k_origin: 0,
            gradient_steps: 0,
            env_steps: 0,
        })
    }

    /// Continue from saved parameters. With `reset_k` the exploration index
    /// starts over at the next episode; the learning-rate schedule always
    /// continues. The replay buffer starts empty.
    pub fn from_checkpoint(
        sim: Simulator,
        config: TrainConfig,
        exploration: ExplorationParams,
        checkpoint: &Checkpoint,
        reset_k: bool,
    ) -> Result<Self> {
        if checkpoint.observation != config.observation {
            return Err(Error::Schema(format!(
                "checkpoint observation {:?} (dimension {}) does not match configured {:?} (dimension {})",
                checkpoint.observation,
                checkpoint.observation.dim(),
                config.observation,
                config.observation.dim()
            )));
        }
        let mut trainer = Self::new(sim, config, exploration)?;
        if checkpoint.online.spec() != trainer.online.spec() {
            return Err(Error::Schema(format!(
                "checkpoint network {:?} does not match configured {:?}",
                checkpoint.online.spec(),
                trainer.online.spec()
            )));
        }
        trainer.online = checkpoint.online.clone();
        trainer.target =
            TargetNetwork::from_network(checkpoint.target.clone(), trainer.config.target_sync)?;
        trainer.episodes_done = checkpoint.episode;
        trainer.gradient_steps = checkpoint.gradient_steps;
        if reset_k {
            trainer.k_origin = checkpoint.episode;
        }
        if let Some(state) = &checkpoint.rng {
            trainer.rng = state.restore()?;
        }
        Ok(trainer)
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        self.target.network()
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    /// Exploration index of the next episode.
    pub fn exploration_index(&self) -> u64 {
        self.episodes_done - self.k_origin
    }

    pub fn current_lr(&self) -> f64 {
        self.config.learning_rate(self.episodes_done)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            online: self.online.clone(),
            target: self.target.network().clone(),
            observation: self.config.observation,
            lr: self.current_lr(),
            episode: self.episodes_done,
            gradient_steps: self.gradient_steps,
            rng: Some(RngState::capture(&self.rng)),
        }
    }

    fn learn(&mut self, lr: f64) -> Result<()> {
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let (_, grad) = loss_and_gradient(
            &self.online,
            self.target.network(),
            &batch,
            self.config.gamma,
        )?;
        sgd_step(&mut self.online, &grad, lr)?;
        self.gradient_steps += 1;
        self.target.after_step(&self.online, self.gradient_steps);
        Ok(())
    }

    /// Plays and learns from one episode.
    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        let k = self.exploration_index();
        let lr = self.current_lr();
        let epsilon = exploration_probability(k, &self.exploration);
        let observation = self.config.observation;
        let mut env_rng = episode_rng(self.config.seed, self.episodes_done);
        let mut state = self.sim.reset(&mut env_rng)?;
        let mut obs = observation.encode(&state, self.sim.config());
        let mut acc = EpisodeAccumulator::default();
        let warm = self.config.warmup.max(self.config.batch_size);
        loop {
            let q = self.online.forward(&obs)?;
            let choice = select_action(&q, k, state.t_nv, &self.exploration, &mut self.rng);
            let outcome = self.sim.step(&state, choice.action, &mut env_rng)?;
            let next_obs = observation.encode(&outcome.state, self.sim.config());
            let terminal = outcome.info.collided && self.sim.terminate_on_collision();
            self.replay.push(Experience {
                state: std::mem::replace(&mut obs, next_obs.clone()),
                action: choice.action.index(),
                reward: outcome.reward / self.config.reward_scale,
                next_state: next_obs,
                done: terminal,
            });
            self.env_steps += 1;
            if self.replay.len() >= warm
                && self
                    .env_steps
                    .is_multiple_of(self.config.learn_every as u64)
            {
                self.learn(lr)?;
            }
            acc.record(&outcome);
            state = outcome.state;
            if outcome.done {
                break;
            }
        }
        let metrics = acc.finish(self.episodes_done, epsilon, lr);
        self.episodes_done += 1;
        Ok(metrics)
    }

    /// Runs `episodes` episodes, handing each metrics row to `on_episode`.
    pub fn train<F>(&mut self, episodes: usize, mut on_episode: F) -> Result<Vec<EpisodeMetrics>>
    where
        F: FnMut(&Trainer, &EpisodeMetrics) -> Result<()>,
    {
        let mut rows = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let m = self.run_episode()?;
            on_episode(self, &m)?;
            rows.push(m);
        }
        Ok(rows)
    }
}

/// Fine-tunes a saved agent on a new environment for `config.episodes`
/// episodes, restarting the exploration schedule when `reset_k` is set.
pub fn curriculum_finetune(
    checkpoint: &Checkpoint,
    sim: Simulator,
    config: TrainConfig,
    exploration: ExplorationParams,
    reset_k: bool,
) -> Result<(Trainer, Vec<EpisodeMetrics>)> {
    let episodes = config.episodes;
    let mut trainer = Trainer::from_checkpoint(sim, config, exploration, checkpoint, reset_k)?;
    let rows = trainer.train(episodes, |_, _| Ok(()))?;
    Ok((trainer, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::generate_environment;
    use crate::reward::RewardParams;

    fn sim(n: usize) -> Simulator {
        Simulator::new(
            generate_environment(n, 11).unwrap(),
            RewardParams::default(),
            true,
        )
        .unwrap()
    }

    fn small() -> TrainConfig {
        TrainConfig {
            hidden: vec![16, 16],
            warmup: 64,
            batch_size: 16,
            target_sync: 50,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate(0), 0.01);
        assert!((cfg.learning_rate(500) - 0.005).abs() < 1e-12);
        assert_eq!(cfg.learning_rate(5000), 0.001);
        let mut last = f64::INFINITY;
        for k in 0..3000 {
            let lr = cfg.learning_rate(k);
            assert!(lr <= last);
            last = lr;
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let cfg = TrainConfig {
            lr_initial: 0.0,
            lr_final: 0.0,
            ..small()
        };
        let mut trainer = Trainer::new(sim(3), cfg, ExplorationParams::default()).unwrap();
        let before = trainer.online().clone();
        let rows = trainer.train(10, |_, _| Ok(())).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(trainer.gradient_steps() > 0);
        assert_eq!(trainer.online(), &before);
        for r in &rows {
            assert!(r.visible_steps <= r.steps && r.steps <= 500);
        }
    }

    #[test]
    fn same_seed_same_metrics() {
        let run = || {
            Trainer::new(sim(3), small(), ExplorationParams::default())
                .unwrap()
                .train(4, |_, _| Ok(()))
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn learning_changes_parameters_and_syncs() {
        let mut trainer = Trainer::new(sim(3), small(), ExplorationParams::default()).unwrap();
        let before = trainer.online().clone();
        trainer.train(3, |_, _| Ok(())).unwrap();
        assert_ne!(trainer.online(), &before);
        assert!(trainer.gradient_steps() >= 50);
        assert_ne!(trainer.target(), &before);
    }

    #[test]
    fn checkpoint_resume_matches_uninterrupted_run() {
        // without replay the buffer is irrelevant: learn from a batch of one fresh sample
        let cfg = TrainConfig {
            replay_capacity: 1,
            batch_size: 1,
            warmup: 1,
            ..small()
        };
        let mut straight = Trainer::new(sim(3), cfg.clone(), ExplorationParams::default()).unwrap();
        let all = straight.train(4, |_, _| Ok(())).unwrap();
        let mut first = Trainer::new(sim(3), cfg.clone(), ExplorationParams::default()).unwrap();
        first.train(2, |_, _| Ok(())).unwrap();
        let ck = Checkpoint::from_json(&first.checkpoint().to_json()).unwrap();
        let mut resumed =
            Trainer::from_checkpoint(sim(3), cfg, ExplorationParams::default(), &ck, false)
                .unwrap();
        let rest = resumed.train(2, |_, _| Ok(())).unwrap();
        assert_eq!(&all[2..], &rest[..]);
        assert_eq!(straight.online(), resumed.online());
    }

    #[test]
    fn finetune_resets_exploration_index() {
        let mut trainer = Trainer::new(sim(3), small(), ExplorationParams::default()).unwrap();
        trainer.train(3, |_, _| Ok(())).unwrap();
        let ck = trainer.checkpoint();
        let cfg = TrainConfig {
            episodes: 2,
            ..small()
        };
        let (tuned, rows) =
            curriculum_finetune(&ck, sim(5), cfg.clone(), ExplorationParams::default(), true)
                .unwrap();
        assert_eq!(rows[0].epsilon, 1.0);
        assert_eq!(rows[0].episode, 3);
        assert_eq!(tuned.episodes_done(), 5);
        assert_eq!(rows[0].lr, TrainConfig::default().learning_rate(3));
        let (_, kept) =
            curriculum_finetune(&ck, sim(5), cfg, ExplorationParams::default(), false).unwrap();
        assert!(kept[0].epsilon < 1.0);
    }

    #[test]
    fn mismatched_checkpoint_is_rejected() {
        let trainer = Trainer::new(sim(3), small(), ExplorationParams::default()).unwrap();
        let ck = trainer.checkpoint();
        let other = TrainConfig {
            hidden: vec![8],
            ..small()
        };
        assert!(
            Trainer::from_checkpoint(sim(3), other, ExplorationParams::default(), &ck, true)
                .is_err()
        );
        let grid = TrainConfig {
            observation: ObservationConfig::Grid {
                size: 5,
                cell: 5.0,
                t_cap: 50,
            },
            ..small()
        };
        let err = Trainer::from_checkpoint(sim(3), grid, ExplorationParams::default(), &ck, true)
            .err()
            .unwrap();
        assert!(
            err.to_string().contains("dimension 7") && err.to_string().contains("dimension 150")
        );
    }

    #[test]
    fn grid_mode_trains() {
        let cfg = TrainConfig {
            observation: ObservationConfig::Grid {
                size: 5,
                cell: 5.0,
                t_cap: 50,
            },
            conv_channels: vec![4, 4, 4],
            conv_hidden: 16,
            ..small()
        };
        let mut trainer = Trainer::new(sim(3), cfg, ExplorationParams::default()).unwrap();
        let before = trainer.online().clone();
        let rows = trainer.train(1, |_, _| Ok(())).unwrap();
        assert_eq!(rows.len(), 1);
        assert_ne!(trainer.online(), &before);
    }
}
