//! Seeded urban arena: road grid, target motion, UAV kinematics and stepping.

mod config;
mod road;
mod world;

pub use config::{
    generate_environment, EnvConfig, FixedStart, OBSTACLE_HEIGHT_RANGE, OBSTACLE_RADIUS_RANGE,
    ROAD_CLEARANCE,
};
pub use road::{Heading, Junction, RoadNetwork, TargetState};
pub use world::{Action, Simulator, StepInfo, StepOutcome, UavState, WorldState};
