use serde::{Deserialize, Serialize};

use crate::math::normalize_angle;
use crate::scene::{Pose, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    pub forward_step: f64,
    /// Turn increment in degrees.
    pub turn_step_deg: f64,
    pub agent_radius: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            forward_step: 0.25,
            turn_step_deg: 10.0,
            agent_radius: 0.2,
        }
    }
}

impl MotionConfig {
    pub fn turn_step(&self) -> f64 {
        self.turn_step_deg.to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub step_count: usize,
}

/// Apply one discrete action. A forward move whose swept disc would touch an
/// obstacle leaves the pose unchanged; the step still counts.
pub fn step_agent(scene: &SceneSpec, agent: &AgentState, action: Action, motion: &MotionConfig) -> AgentState {
    let mut pose = agent.pose;
    match action {
        Action::TurnLeft => pose.yaw = normalize_angle(pose.yaw + motion.turn_step()),
        Action::TurnRight => pose.yaw = normalize_angle(pose.yaw - motion.turn_step()),
        Action::Forward => {
            let to = [
                pose.x + motion.forward_step * pose.yaw.cos(),
                pose.y + motion.forward_step * pose.yaw.sin(),
            ];
            if !scene.segment_collides([pose.x, pose.y], to, motion.agent_radius) {
                pose.x = to[0];
                pose.y = to[1];
            }
        }
    }
    AgentState {
        pose,
        step_count: agent.step_count + 1,
    }
}
