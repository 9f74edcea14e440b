//! Embodied exploration: occupancy mapping, discrete motion, planning and the
//! two hand-coded policies (random goals, greedy frontier).

mod agent;
mod episode;
mod frontier;
pub mod log;
mod occupancy;
mod planner;

pub use agent::{step_agent, Action, AgentState, MotionConfig};
pub use episode::{run_episode, Episode, EpisodeConfig, StepDiagnostics, Trajectory, TrajectoryStep};
pub use frontier::{frontier_cells, frontier_clusters, frontier_goals, next_goal, Policy};
pub use occupancy::{explored_fraction, update_occupancy, Cell, CellIdx, OccupancyGrid};
pub use planner::{bfs_distances, plan_path, UNREACHABLE};
