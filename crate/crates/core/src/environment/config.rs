use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::road::RoadNetwork;
use crate::error::EnvError;
use crate::geometry::{Cylinder, FovSpec, Point2};

/// Obstacle radius range used by the generator.
pub const OBSTACLE_RADIUS_RANGE: (f64, f64) = (2.5, 10.0);
/// Obstacle height range used by the generator.
pub const OBSTACLE_HEIGHT_RANGE: (f64, f64) = (1.0, 50.0);
/// Minimum gap between a generated obstacle and the nearest road line.
pub const ROAD_CLEARANCE: f64 = 0.5;
const PLACEMENT_ATTEMPTS: usize = 1_000;

/// Optional fixed initial placement, bypassing the seeded draw in `reset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedStart {
    pub uav_x: f64,
    pub uav_y: f64,
    pub uav_level: usize,
    /// Junction indices of the target.
    pub target_i: usize,
    pub target_j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Side of the square arena.
    pub side: f64,
    /// Road spacing; `side` must be a whole number of blocks.
    pub block_size: f64,
    pub obstacles: Vec<Cylinder>,
    pub h_min: f64,
    pub h_max: f64,
    /// Number of altitude steps; levels run over `0..=n_h`.
    pub n_h: usize,
    pub fov: FovSpec,
    pub t_max: usize,
    pub uav_speed: f64,
    /// Target speed is drawn uniformly from this closed range at every reset.
    pub target_speed_min: f64,
    pub target_speed_max: f64,
    pub start: Option<FixedStart>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            side: 100.0,
            block_size: 20.0,
            obstacles: Vec::new(),
            h_min: 5.0,
            h_max: 55.0,
            n_h: 10,
            fov: FovSpec::from_degrees(30.0).expect("valid default fov"),
            t_max: 500,
            uav_speed: 2.0,
            target_speed_min: 1.0,
            target_speed_max: 2.0,
            start: None,
        }
    }
}

impl EnvConfig {
    /// Altitude gained per level.
    pub fn height_step(&self) -> f64 {
        (self.h_max - self.h_min) / self.n_h as f64
    }

    pub fn altitude(&self, level: usize) -> f64 {
        self.h_min + level as f64 * self.height_step()
    }

    pub fn road(&self) -> RoadNetwork {
        RoadNetwork::new(self.side, self.block_size)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let fail = |msg: String| Err(EnvError::Invalid(msg));
        let finite = [
            self.side,
            self.block_size,
            self.h_min,
            self.h_max,
            self.uav_speed,
            self.target_speed_min,
            self.target_speed_max,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all lengths must be finite".into());
        }
        if !(self.side > 0.0 && self.block_size > 0.0) {
            return fail("side and block_size must be positive".into());
        }
        let blocks = self.side / self.block_size;
        if (blocks - blocks.round()).abs() > 1e-9 || blocks.round() < 1.0 {
            return fail(format!(
                "side {} is not a whole number of blocks of size {}",
                self.side, self.block_size
            ));
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_max) {
            return fail(format!(
                "need 0 < h_min < h_max (got {} and {})",
                self.h_min, self.h_max
            ));
        }
        if self.n_h < 1 {
            return fail("n_h must be at least 1".into());
        }
        if self.t_max < 1 {
            return fail("t_max must be at least 1".into());
        }
        if !(self.uav_speed > 0.0) {
            return fail("uav_speed must be positive".into());
        }
        if !(0.0 <= self.target_speed_min && self.target_speed_min <= self.target_speed_max) {
            return fail("need 0 <= target_speed_min <= target_speed_max".into());
        }
        if self.target_speed_max > self.uav_speed {
            return fail(format!(
                "target speed {} exceeds uav_speed {}",
                self.target_speed_max, self.uav_speed
            ));
        }
        for (idx, obs) in self.obstacles.iter().enumerate() {
            obs.validate()?;
            let c = obs.center;
            if c.x - obs.radius < 0.0
                || c.x + obs.radius > self.side
                || c.y - obs.radius < 0.0
                || c.y + obs.radius > self.side
            {
                return fail(format!("obstacle {idx} does not lie inside the arena"));
            }
        }
        if let Some(start) = &self.start {
            let inside = |v: f64| (0.0..=self.side).contains(&v);
            let road = self.road();
            if !inside(start.uav_x) || !inside(start.uav_y) || start.uav_level > self.n_h {
                return fail("fixed UAV start lies outside the arena".into());
            }
            if start.target_i > road.blocks() || start.target_j > road.blocks() {
                return fail("fixed target start is not a junction".into());
            }
        }
        Ok(())
    }

    /// Replace the obstacle set with `n` seeded non-overlapping cylinders.
    ///
    /// Obstacles are drawn one after another from a single stream, so the
    /// first `m` obstacles for `(n, seed)` equal the whole set for `(m, seed)`.
    pub fn with_generated_obstacles(mut self, n: usize, seed: u64) -> Result<Self, EnvError> {
        self.obstacles = place_obstacles(&self, n, seed)?;
        Ok(self)
    }
}

/// Default arena with `n` generated obstacles.
pub fn generate_environment(n: usize, seed: u64) -> Result<EnvConfig, EnvError> {
    EnvConfig::default().with_generated_obstacles(n, seed)
}

fn place_obstacles(config: &EnvConfig, n: usize, seed: u64) -> Result<Vec<Cylinder>, EnvError> {
    let road = config.road();
    let block = road.block_size();
    let r_max = OBSTACLE_RADIUS_RANGE.1.min(block / 2.0 - ROAD_CLEARANCE);
    if r_max < OBSTACLE_RADIUS_RANGE.0 && n > 0 {
        return Err(EnvError::Invalid(format!(
            "block size {block} is too small for obstacles"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<Cylinder> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0;
        let cyl = loop {
            if attempts == PLACEMENT_ATTEMPTS {
                return Err(EnvError::Placement {
                    requested: n,
                    attempts,
                });
            }
            attempts += 1;
            let bi = rng.random_range(0..road.blocks()) as f64;
            let bj = rng.random_range(0..road.blocks()) as f64;
            let radius = rng.random_range(OBSTACLE_RADIUS_RANGE.0..=r_max);
            let height = rng.random_range(OBSTACLE_HEIGHT_RANGE.0..=OBSTACLE_HEIGHT_RANGE.1);
            let margin = radius + ROAD_CLEARANCE;
            let x = bi * block + rng.random_range(margin..=block - margin);
            let y = bj * block + rng.random_range(margin..=block - margin);
            let candidate = Cylinder {
                center: Point2::new(x, y),
                radius,
                height,
            };
            let overlaps = placed
                .iter()
                .any(|o| o.center.distance(&candidate.center) <= o.radius + candidate.radius);
            if !overlaps {
                break candidate;
            }
        };
        placed.push(cyl);
    }
    Ok(placed)
}
