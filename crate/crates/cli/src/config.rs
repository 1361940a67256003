//! TOML run configuration: one section per subsystem, every key optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uavtrack::agent::{half_life_decay, ExplorationParams, TrainConfig};
use uavtrack::environment::{EnvConfig, FixedStart};
use uavtrack::error::ConfigError;
use uavtrack::geometry::{Cylinder, FovSpec, Point2};
use uavtrack::qnet::ObservationConfig;
use uavtrack::reward::RewardParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub side: f64,
    pub block_size: f64,
    /// Number of generated obstacles; ignored when `obstacles` is given.
    pub n_obstacles: usize,
    pub obstacle_seed: u64,
    pub obstacles: Option<Vec<ObstacleEntry>>,
    pub h_min: f64,
    pub h_max: f64,
    pub n_h: usize,
    pub theta_fov_deg: f64,
    pub t_max: usize,
    pub uav_speed: f64,
    pub target_speed_min: f64,
    pub target_speed_max: f64,
    pub start: Option<FixedStart>,
}

impl Default for EnvSection {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            side: env.side,
            block_size: env.block_size,
            n_obstacles: 3,
            obstacle_seed: 1,
            obstacles: None,
            h_min: env.h_min,
            h_max: env.h_max,
            n_h: env.n_h,
            theta_fov_deg: env.fov.degrees(),
            t_max: env.t_max,
            uav_speed: env.uav_speed,
            target_speed_min: env.target_speed_min,
            target_speed_max: env.target_speed_max,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub episodes: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Episodes over which the learning rate halves.
    pub lr_half_life: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub target_sync: u64,
    pub warmup: usize,
    pub learn_every: usize,
    pub terminate_on_collision: bool,
    pub reward_scale: f64,
    pub seed: u64,
    /// Save a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
    /// Episodes used for before/after comparisons.
    pub eval_episodes: usize,
    /// Restart the exploration schedule when fine-tuning.
    pub reset_k: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            episodes: t.episodes,
            lr_initial: t.lr_initial,
            lr_final: t.lr_final,
            lr_half_life: 500.0,
            gamma: t.gamma,
            batch_size: t.batch_size,
            replay_capacity: t.replay_capacity,
            target_sync: t.target_sync,
            warmup: t.warmup,
            learn_every: t.learn_every,
            terminate_on_collision: t.terminate_on_collision,
            reward_scale: t.reward_scale,
            seed: t.seed,
            checkpoint_every: 500,
            eval_episodes: 50,
            reset_k: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Features,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub observation: ObservationKind,
    pub t_cap: usize,
    pub grid_size: usize,
    pub grid_cell: f64,
    pub hidden: Vec<usize>,
    pub conv_channels: Vec<usize>,
    pub conv_hidden: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            observation: ObservationKind::Features,
            t_cap: 50,
            grid_size: 11,
            grid_cell: 5.0,
            hidden: t.hidden,
            conv_channels: t.conv_channels,
            conv_hidden: t.conv_hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvSection,
    pub reward: RewardParams,
    pub exploration: ExplorationParams,
    pub train: TrainSection,
    pub network: NetworkSection,
}

/// Allowed hyperparameter ranges, with their descriptive names.
pub mod ranges {
    pub const COLLISION: (f64, f64, &str) =
        (1000.0, 2000.0, "collision reward constant, magnitude");
    pub const INTERSECTION: (f64, f64, &str) =
        (30.0, 100.0, "intersection reward constant, magnitude");
    pub const DISTANCE: (f64, f64, &str) = (3000.0, 4500.0, "positive reward distance constant");
    pub const HEIGHT_REWARD: (f64, f64, &str) = (1500.0, 5000.0, "positive reward height constant");
    pub const NOT_VISIBLE: (f64, f64, &str) = (1.0, 50.0, "negative reward constant, magnitude");
    pub const BETA: (f64, f64, &str) = (1.0, 10.0, "time constant in negative reward");
    pub const ALPHA: (f64, f64, &str) = (0.1, 5.0, "episode constant in action selection");
    pub const P_SAT: (f64, f64, &str) = (0.1, 0.4, "saturation probability");
    pub const P_SS: (f64, f64, &str) = (0.9, 0.95, "search-space probability");
    pub const H_MIN: (f64, f64, &str) = (1.0, 10.0, "minimum attainable height");
    pub const H_MAX: (f64, f64, &str) = (10.0, 60.0, "maximum attainable height");
    pub const T_NV_THRESHOLD: (f64, f64, &str) =
        (3.0, 10.0, "threshold steps for entering search-space");
    pub const OBSTACLES: (f64, f64, &str) = (2.0, 7.0, "number of obstacles");
    pub const SIDE: (f64, f64, &str) = (100.0, 200.0, "side of the square environment");
    pub const N_H: (f64, f64, &str) = (5.0, 20.0, "number of height levels");
    pub const OBSTACLE_HEIGHT: (f64, f64, &str) = (1.0, 50.0, "obstacle height");
    pub const HEIGHT_STEP: (f64, f64, &str) = (1.0, 10.0, "height constant");
    pub const OBSTACLE_RADIUS: (f64, f64, &str) = (2.5, 10.0, "obstacle radius");
    pub const THETA_FOV: (f64, f64, &str) = (30.0, 45.0, "maximum viewing angle in degrees");
}

fn check(key: &str, value: f64, range: (f64, f64, &'static str)) -> Result<(), ConfigError> {
    let (min, max, label) = range;
    if value.is_nan() || value < min || value > max {
        return Err(ConfigError::OutOfRange {
            key: key.to_owned(),
            value,
            min,
            max,
            label,
        });
    }
    Ok(())
}

fn invalid(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// Range checks on every tabled hyperparameter, then the structural
    /// checks of each subsystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        use ranges::*;
        let e = &self.env;
        check("env.theta_fov_deg", e.theta_fov_deg, THETA_FOV)?;
        check("env.side", e.side, SIDE)?;
        check("env.h_min", e.h_min, H_MIN)?;
        check("env.h_max", e.h_max, H_MAX)?;
        check("env.n_h", e.n_h as f64, N_H)?;
        if e.n_h > 0 {
            check(
                "env.h_max - env.h_min over env.n_h",
                (e.h_max - e.h_min) / e.n_h as f64,
                HEIGHT_STEP,
            )?;
        }
        match &e.obstacles {
            Some(list) => {
                check("env.obstacles (count)", list.len() as f64, OBSTACLES)?;
                for (i, o) in list.iter().enumerate() {
                    check(
                        &format!("env.obstacles[{i}].radius"),
                        o.radius,
                        OBSTACLE_RADIUS,
                    )?;
                    check(
                        &format!("env.obstacles[{i}].height"),
                        o.height,
                        OBSTACLE_HEIGHT,
                    )?;
                }
            }
            None => check("env.n_obstacles", e.n_obstacles as f64, OBSTACLES)?,
        }
        let r = &self.reward;
        check("reward.r_c (magnitude)", r.r_c.abs(), COLLISION)?;
        check("reward.r_i (magnitude)", r.r_i.abs(), INTERSECTION)?;
        check("reward.r_v_c", r.r_v_c, DISTANCE)?;
        check("reward.h_v_c", r.h_v_c, HEIGHT_REWARD)?;
        check("reward.r_nv (magnitude)", r.r_nv.abs(), NOT_VISIBLE)?;
        check("reward.beta", r.beta, BETA)?;
        r.validate().map_err(invalid)?;
        let x = &self.exploration;
        check("exploration.alpha", x.alpha, ALPHA)?;
        check("exploration.p_sat", x.p_sat, P_SAT)?;
        check("exploration.p_ss", x.p_ss, P_SS)?;
        check(
            "exploration.t_nv_threshold",
            x.t_nv_threshold as f64,
            T_NV_THRESHOLD,
        )?;
        if self.train.lr_half_life.is_nan() || self.train.lr_half_life <= 0.0 {
            return Err(invalid("train.lr_half_life must be positive"));
        }
        if self.train.eval_episodes == 0 {
            return Err(invalid("train.eval_episodes must be positive"));
        }
        self.env_config()?;
        self.train_config().validate().map_err(invalid)
    }

    pub fn observation(&self) -> ObservationConfig {
        let n = &self.network;
        match n.observation {
            ObservationKind::Features => ObservationConfig::Features { t_cap: n.t_cap },
            ObservationKind::Grid => ObservationConfig::Grid {
                size: n.grid_size,
                cell: n.grid_cell,
                t_cap: n.t_cap,
            },
        }
    }

    pub fn env_config(&self) -> Result<EnvConfig, ConfigError> {
        let e = &self.env;
        let mut env = EnvConfig {
            side: e.side,
            block_size: e.block_size,
            obstacles: Vec::new(),
            h_min: e.h_min,
            h_max: e.h_max,
            n_h: e.n_h,
            fov: FovSpec::from_degrees(e.theta_fov_deg).map_err(invalid)?,
            t_max: e.t_max,
            uav_speed: e.uav_speed,
            target_speed_min: e.target_speed_min,
            target_speed_max: e.target_speed_max,
            start: e.start,
        };
        match &e.obstacles {
            Some(list) => {
                env.obstacles = list
                    .iter()
                    .map(|o| Cylinder {
                        center: Point2::new(o.x, o.y),
                        radius: o.radius,
                        height: o.height,
                    })
                    .collect();
            }
            None => {
                env.validate().map_err(invalid)?;
                env = env
                    .with_generated_obstacles(e.n_obstacles, e.obstacle_seed)
                    .map_err(invalid)?;
            }
        }
        env.validate().map_err(invalid)?;
        Ok(env)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let n = &self.network;
        TrainConfig {
            episodes: t.episodes,
            lr_initial: t.lr_initial,
            lr_final: t.lr_final,
            lr_decay: half_life_decay(t.lr_half_life),
            gamma: t.gamma,
            batch_size: t.batch_size,
            replay_capacity: t.replay_capacity,
            target_sync: t.target_sync,
            warmup: t.warmup,
            learn_every: t.learn_every,
            terminate_on_collision: t.terminate_on_collision,
            reward_scale: t.reward_scale,
            seed: t.seed,
            observation: self.observation(),
            hidden: n.hidden.clone(),
            conv_channels: n.conv_channels.clone(),
            conv_hidden: n.conv_hidden,
        }
    }
}
