use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::Action;
use crate::qnet::argmax;

/// Exploration schedule and Search-Space settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationParams {
    /// Floor the exploration probability settles to.
    pub p_sat: f64,
    /// Per-episode decay constant.
    pub alpha: f64,
    /// Random-action probability while in Search-Space mode.
    pub p_ss: f64,
    /// Invisible steps after which Search-Space mode takes over.
    pub t_nv_threshold: usize,
    pub search_space: bool,
}

impl Default for ExplorationParams {
    fn default() -> Self {
        Self {
            p_sat: 0.1,
            alpha: 0.1,
            p_ss: 0.9,
            t_nv_threshold: 5,
            search_space: true,
        }
    }
}

impl ExplorationParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.p_sat) {
            return Err(format!("p_sat must lie in [0, 1), got {}", self.p_sat));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.p_ss > 0.0 && self.p_ss < 1.0) {
            return Err(format!("p_ss must lie in (0, 1), got {}", self.p_ss));
        }
        Ok(())
    }
}

/// `(1 - p_sat) * exp(-alpha * k) + p_sat`.
pub fn exploration_probability(k: u64, params: &ExplorationParams) -> f64 {
    (1.0 - params.p_sat) * (-params.alpha * k as f64).exp() + params.p_sat
}

/// Which rule produced an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSource {
    Greedy,
    Explore,
    SearchSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub action: Action,
    pub source: ActionSource,
}

pub fn greedy_action(q_values: &[f64]) -> Action {
    Action::from_index(argmax(q_values)).expect("one Q-value per action")
}

/// Search-Space rule while the target has been lost for `t_nv_threshold`
/// steps, the decaying schedule otherwise. Random actions are uniform over
/// all six.
pub fn select_action<R: Rng + ?Sized>(
    q_values: &[f64],
    k: u64,
    t_nv: usize,
    params: &ExplorationParams,
    rng: &mut R,
) -> Selection {
    debug_assert_eq!(q_values.len(), Action::COUNT);
    let (p, source) = if params.search_space && t_nv >= params.t_nv_threshold {
        (params.p_ss, ActionSource::SearchSpace)
    } else {
        (exploration_probability(k, params), ActionSource::Explore)
    };
    if rng.random::<f64>() < p {
        let action = Action::ALL[rng.random_range(0..Action::COUNT)];
        Selection { action, source }
    } else {
        Selection {
            action: greedy_action(q_values),
            source: ActionSource::Greedy,
        }
    }
}
