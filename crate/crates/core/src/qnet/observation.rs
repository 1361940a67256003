use serde::{Deserialize, Serialize};

use crate::environment::{EnvConfig, WorldState};
use crate::geometry::Point2;

/// Grid channels, in storage order.
pub const GRID_CHANNELS: usize = 6;

/// How a world state is turned into network input. Every component lies in
/// `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservationConfig {
    /// `[x/s, y/s, level/n_h, (seen_x - x)/s, (seen_y - y)/s, min(t_nv, t_cap)/t_cap, visible]`.
    Features { t_cap: usize },
    /// Local `size x size` window of `cell`-sized squares centred under the
    /// UAV, channels-last. Channels: obstacle (1 if it reaches the UAV's
    /// altitude, 0.5 if lower), outside-arena mask, last-seen target (clamped
    /// to the window border), then constant planes for altitude level,
    /// normalised `t_nv` and the visibility flag.
    Grid {
        size: usize,
        cell: f64,
        t_cap: usize,
    },
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig::Features { t_cap: 50 }
    }
}

impl ObservationConfig {
    pub fn dim(&self) -> usize {
        match self {
            ObservationConfig::Features { .. } => 7,
            ObservationConfig::Grid { size, .. } => size * size * GRID_CHANNELS,
        }
    }

    fn t_cap(&self) -> usize {
        match self {
            ObservationConfig::Features { t_cap } | ObservationConfig::Grid { t_cap, .. } => *t_cap,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.t_cap() == 0 {
            return Err("t_cap must be positive".into());
        }
        if let ObservationConfig::Grid { size, cell, .. } = self {
            if *size == 0 || size % 2 == 0 {
                return Err(format!("grid size must be odd and positive, got {size}"));
            }
            if !(*cell > 0.0) {
                return Err("grid cell must be positive".into());
            }
        }
        Ok(())
    }

    pub fn encode(&self, state: &WorldState, env: &EnvConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.encode_into(state, env, &mut out);
        out
    }

    pub fn encode_into(&self, state: &WorldState, env: &EnvConfig, out: &mut Vec<f64>) {
        out.clear();
        let cap = self.t_cap();
        let lost = state.t_nv.min(cap) as f64 / cap as f64;
        let level = state.uav.level as f64 / env.n_h as f64;
        let visible = if state.visible { 1.0 } else { 0.0 };
        let uav = state.uav.position;
        match *self {
            ObservationConfig::Features { .. } => {
                let s = env.side;
                out.extend_from_slice(&[
                    uav.x / s,
                    uav.y / s,
                    level,
                    (state.last_seen.x - uav.x) / s,
                    (state.last_seen.y - uav.y) / s,
                    lost,
                    visible,
                ]);
            }
            ObservationConfig::Grid { size, cell, .. } => {
                let half = (size / 2) as isize;
                let target_cell = |v: f64, centre: f64| {
                    ((v - centre) / cell)
                        .round()
                        .clamp(-half as f64, half as f64) as isize
                };
                let (tq, tr) = (
                    target_cell(state.last_seen.x, uav.x),
                    target_cell(state.last_seen.y, uav.y),
                );
                for r in -half..=half {
                    for q in -half..=half {
                        let p = Point2::new(uav.x + q as f64 * cell, uav.y + r as f64 * cell);
                        let outside = p.x < 0.0 || p.y < 0.0 || p.x > env.side || p.y > env.side;
                        let obstacle = env
                            .obstacles
                            .iter()
                            .filter(|o| o.center.distance(&p) <= o.radius)
                            .map(|o| if o.height >= uav.z { 1.0 } else { 0.5 })
                            .fold(0.0, f64::max);
                        out.extend_from_slice(&[
                            obstacle,
                            if outside { 1.0 } else { 0.0 },
                            if (q, r) == (tq, tr) { 1.0 } else { 0.0 },
                            level,
                            lost,
                            visible,
                        ]);
                    }
                }
            }
        }
    }
}
