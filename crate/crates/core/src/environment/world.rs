use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use super::road::{Junction, RoadNetwork, TargetState};
use crate::error::EnvError;
use crate::geometry::{check_collision, check_visibility, first_occluder, Point2, Point3};
use crate::reward::{compute_reward, RewardBranch, RewardParams};

const RESET_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    North,
    South,
    West,
    East,
    Up,
    Down,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; Action::COUNT] = [
        Action::North,
        Action::South,
        Action::West,
        Action::East,
        Action::Up,
        Action::Down,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Action::North => "north",
            Action::South => "south",
            Action::West => "west",
            Action::East => "east",
            Action::Up => "up",
            Action::Down => "down",
        }
    }
}

/// UAV pose. `position.z` always equals `EnvConfig::altitude(level)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub position: Point3,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub uav: UavState,
    pub target: TargetState,
    /// Steps taken so far in the episode.
    pub t: usize,
    /// Consecutive steps without seeing the target.
    pub t_nv: usize,
    /// Target position at the last step it was seen; the reset position
    /// before the first sighting.
    pub last_seen: Point2,
    /// Whether the target was seen on the latest step.
    pub visible: bool,
    pub done: bool,
}

impl WorldState {
    pub fn target_position(&self, road: &RoadNetwork) -> Point2 {
        self.target.position(road)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// The target was seen this step (the reward took the visible branch).
    pub visible: bool,
    /// The target lies inside the footprint, regardless of obstacles.
    pub in_fov: bool,
    pub occluded_by: Option<usize>,
    pub collided: bool,
    /// Ground-plane distance between UAV and target.
    pub distance: f64,
    pub distance_3d: f64,
    pub branch: RewardBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub state: WorldState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Environment dynamics plus reward and termination policy.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: EnvConfig,
    road: RoadNetwork,
    reward: RewardParams,
    terminate_on_collision: bool,
}

impl Simulator {
    pub fn new(
        config: EnvConfig,
        reward: RewardParams,
        terminate_on_collision: bool,
    ) -> Result<Self, EnvError> {
        config.validate()?;
        reward
            .validate()
            .map_err(|e| EnvError::Invalid(e.to_string()))?;
        let road = config.road();
        Ok(Self {
            config,
            road,
            reward,
            terminate_on_collision,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn road(&self) -> &RoadNetwork {
        &self.road
    }

    pub fn reward_params(&self) -> &RewardParams {
        &self.reward
    }

    pub fn terminate_on_collision(&self) -> bool {
        self.terminate_on_collision
    }

    fn uav_at(&self, x: f64, y: f64, level: usize) -> UavState {
        UavState {
            position: Point3::new(x, y, self.config.altitude(level)),
            level,
        }
    }

    fn collides(&self, p: &Point3) -> bool {
        self.config.obstacles.iter().any(|o| check_collision(p, o))
    }

    /// Start an episode: UAV on the `uav_speed` lattice at level 0 clear of
    /// every obstacle, target at a random junction with a random heading.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WorldState, EnvError> {
        let speed = rng.random_range(self.config.target_speed_min..=self.config.target_speed_max);
        let (uav, junction) = match &self.config.start {
            Some(start) => (
                self.uav_at(start.uav_x, start.uav_y, start.uav_level),
                Junction {
                    i: start.target_i,
                    j: start.target_j,
                },
            ),
            None => {
                let uav = self.draw_uav_start(rng)?;
                (uav, self.road.random_junction(rng))
            }
        };
        let heading = self.road.sample_heading(junction, rng);
        let target = TargetState {
            from: junction,
            heading,
            progress: 0.0,
            speed,
        };
        let target_pos = target.position(&self.road);
        let visible = !self.collides(&uav.position)
            && first_occluder(&uav.position, &target_pos, &self.config.obstacles).is_none()
            && check_visibility(&uav.position, &target_pos, &self.config.fov);
        Ok(WorldState {
            uav,
            target,
            t: 0,
            t_nv: 0,
            last_seen: target_pos,
            visible,
            done: false,
        })
    }

    fn draw_uav_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UavState, EnvError> {
        let lattice = (self.config.side / self.config.uav_speed).floor() as usize;
        let at = |ix: usize, iy: usize| {
            self.uav_at(
                ix as f64 * self.config.uav_speed,
                iy as f64 * self.config.uav_speed,
                0,
            )
        };
        for _ in 0..RESET_DRAWS {
            let uav = at(rng.random_range(0..=lattice), rng.random_range(0..=lattice));
            if !self.collides(&uav.position) {
                return Ok(uav);
            }
        }
        (0..=lattice)
            .flat_map(|ix| (0..=lattice).map(move |iy| (ix, iy)))
            .map(|(ix, iy)| at(ix, iy))
            .find(|uav| !self.collides(&uav.position))
            .ok_or_else(|| EnvError::Invalid("no collision-free start position".into()))
    }

    /// Kinematic update of the UAV alone, clamped to the arena and altitude band.
    pub fn apply_action(&self, uav: &UavState, action: Action) -> UavState {
        let s = self.config.side;
        let v = self.config.uav_speed;
        let Point3 { x, y, .. } = uav.position;
        let (x, y, level) = match action {
            Action::North => (x, (y + v).min(s), uav.level),
            Action::South => (x, (y - v).max(0.0), uav.level),
            Action::West => ((x - v).max(0.0), y, uav.level),
            Action::East => ((x + v).min(s), y, uav.level),
            Action::Up => (x, y, (uav.level + 1).min(self.config.n_h)),
            Action::Down => (x, y, uav.level.saturating_sub(1)),
        };
        self.uav_at(x, y, level)
    }

    /// Move the UAV, then the target, then score the resulting configuration.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &WorldState,
        action: Action,
        rng: &mut R,
    ) -> Result<StepOutcome, EnvError> {
        if state.done {
            return Err(EnvError::EpisodeFinished(state.t));
        }
        let uav = self.apply_action(&state.uav, action);
        let mut target = state.target;
        target.step(&self.road, rng);
        let target_pos = target.position(&self.road);

        let outcome = compute_reward(
            &uav.position,
            &target_pos,
            &self.config.obstacles,
            &self.config.fov,
            state.t_nv,
            &self.reward,
        )
        .map_err(|e| EnvError::Invalid(e.to_string()))?;

        let collided = outcome.branch == RewardBranch::Collision;
        let visible = outcome.branch == RewardBranch::Visible;
        let t = state.t + 1;
        let done = (collided && self.terminate_on_collision) || t >= self.config.t_max;
        let distance = uav.position.ground().distance(&target_pos);
        let info = StepInfo {
            visible,
            in_fov: check_visibility(&uav.position, &target_pos, &self.config.fov),
            occluded_by: first_occluder(&uav.position, &target_pos, &self.config.obstacles),
            collided,
            distance,
            distance_3d: distance.hypot(uav.position.z),
            branch: outcome.branch,
        };
        let next = WorldState {
            uav,
            target,
            t,
            t_nv: outcome.t_nv_next,
            last_seen: if visible { target_pos } else { state.last_seen },
            visible,
            done,
        };
        Ok(StepOutcome {
            state: next,
            reward: outcome.reward,
            done,
            info,
        })
    }
}
