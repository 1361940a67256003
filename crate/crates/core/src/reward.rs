//! Piecewise tracking reward.
//!
//! Checks run in a fixed order: collision with any obstacle, then an
//! obstructed sight line, then footprint visibility, and finally the
//! invisibility penalty. Every branch except "visible" advances the
//! invisibility counter before the penalty is evaluated.

use serde::{Deserialize, Serialize};

use crate::error::RewardError;
use crate::geometry::{
    check_collision, check_occlusion, check_visibility, Cylinder, FovSpec, Point2, Point3,
};

/// How the invisibility penalty depends on the invisibility counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// `R_nv * exp(-beta * t_nv)`: the penalty fades the longer the target is lost.
    #[default]
    Decaying,
    /// `R_nv * (1 - exp(-beta * t_nv))`: the penalty saturates the longer the target is lost.
    Growing,
}

/// Signed reward constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    /// Collision constant, negative.
    pub r_c: f64,
    /// Obstructed-sight-line constant, negative and milder than `r_c`.
    pub r_i: f64,
    /// Distance numerator of the positive reward.
    pub r_v_c: f64,
    /// Altitude numerator of the positive reward.
    pub h_v_c: f64,
    /// Invisibility constant, negative.
    pub r_nv: f64,
    pub beta: f64,
    /// Floor on the ground distance in the positive reward.
    pub dist_epsilon: f64,
    pub penalty_mode: PenaltyMode,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            r_c: -1500.0,
            r_i: -50.0,
            r_v_c: 3000.0,
            h_v_c: 1500.0,
            r_nv: -10.0,
            beta: 2.0,
            dist_epsilon: 0.5,
            penalty_mode: PenaltyMode::Decaying,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        let fail = |msg: &str| Err(RewardError::Invalid(msg.to_owned()));
        let all = [
            self.r_c,
            self.r_i,
            self.r_v_c,
            self.h_v_c,
            self.r_nv,
            self.beta,
            self.dist_epsilon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all constants must be finite");
        }
        if !(self.r_c < self.r_i && self.r_i < 0.0) {
            return fail("need r_c < r_i < 0");
        }
        if !(self.r_v_c > 0.0 && self.h_v_c > 0.0) {
            return fail("r_v_c and h_v_c must be positive");
        }
        if !(self.r_nv < 0.0) {
            return fail("r_nv must be negative");
        }
        if !(self.beta > 0.0) {
            return fail("beta must be positive");
        }
        if !(self.dist_epsilon > 0.0) {
            return fail("dist_epsilon must be positive");
        }
        Ok(())
    }

    /// Invisibility penalty for a counter value that already includes the current step.
    pub fn invisibility_penalty(&self, t_nv: usize) -> f64 {
        let decay = (-self.beta * t_nv as f64).exp();
        match self.penalty_mode {
            PenaltyMode::Decaying => self.r_nv * decay,
            PenaltyMode::Growing => self.r_nv * (1.0 - decay),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardBranch {
    Collision,
    Intersection,
    Visible,
    NotVisible,
}

impl RewardBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            RewardBranch::Collision => "collision",
            RewardBranch::Intersection => "intersection",
            RewardBranch::Visible => "visible",
            RewardBranch::NotVisible => "not_visible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub reward: f64,
    pub t_nv_next: usize,
    pub branch: RewardBranch,
}

/// Reward for a visible target: favours small ground distance and low altitude.
pub fn positive_reward(
    uav: &Point3,
    target: &Point2,
    params: &RewardParams,
) -> Result<f64, RewardError> {
    if !(uav.z > 0.0) {
        return Err(RewardError::NonPositiveAltitude(uav.z));
    }
    let distance = uav.ground().distance(target).max(params.dist_epsilon);
    Ok(params.r_v_c / distance + params.h_v_c / uav.z)
}

pub fn compute_reward(
    uav: &Point3,
    target: &Point2,
    obstacles: &[Cylinder],
    fov: &FovSpec,
    t_nv: usize,
    params: &RewardParams,
) -> Result<RewardOutcome, RewardError> {
    let lost = |reward| RewardOutcome {
        reward,
        t_nv_next: t_nv + 1,
        branch: RewardBranch::Collision,
    };

    if obstacles.iter().any(|obs| check_collision(uav, obs)) {
        return Ok(lost(params.r_c));
    }
    if obstacles
        .iter()
        .any(|obs| check_occlusion(uav, target, obs).unwrap_or(false))
    {
        return Ok(RewardOutcome {
            branch: RewardBranch::Intersection,
            ..lost(params.r_i)
        });
    }
    if check_visibility(uav, target, fov) {
        return Ok(RewardOutcome {
            reward: positive_reward(uav, target, params)?,
            t_nv_next: 0,
            branch: RewardBranch::Visible,
        });
    }
    let t_nv_next = t_nv + 1;
    Ok(RewardOutcome {
        reward: params.invisibility_penalty(t_nv_next),
        t_nv_next,
        branch: RewardBranch::NotVisible,
    })
}
