use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{step_agent, Action, AgentState, MotionConfig};
use super::frontier::{next_goal, Policy};
use super::occupancy::{update_occupancy, Cell, CellIdx, OccupancyGrid};
use super::planner::{bfs_distances, plan_path, UNREACHABLE};
use crate::detector::{simulate_detections, DetectionSet, NoiseModel};
use crate::error::{Error, Result};
use crate::math::normalize_angle;
use crate::scene::{render_frame, CameraIntrinsics, FrameObservation, Pose, SceneSpec};
use crate::seed::stage_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub steps: usize,
    pub cell_size: f64,
    pub motion: MotionConfig,
    pub camera_height: f64,
    /// Turn a full circle before following any policy.
    pub initial_scan: bool,
    pub start_attempts: usize,
    /// Decisions without getting closer to the goal before it is abandoned.
    pub max_stall: usize,
    /// Goal counts as reached within this many grid steps.
    pub goal_tolerance_cells: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            cell_size: 0.1,
            motion: MotionConfig::default(),
            camera_height: crate::scene::DEFAULT_CAMERA_HEIGHT,
            initial_scan: true,
            start_attempts: 10_000,
            max_stall: 40,
            goal_tolerance_cells: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub frame: FrameObservation,
    pub detections: DetectionSet,
}

/// Frames and detections for steps `0..N`, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameObservation> {
        self.steps.iter().map(|s| &s.frame)
    }
}

/// Per-step controller state, recorded for analysis and tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub free_cells: usize,
    /// Action taken after sensing at this step (`None` on the last step).
    pub action: Option<Action>,
    pub goal: Option<CellIdx>,
    /// Increments on every (re)plan.
    pub plan_id: u64,
    /// Grid steps from the agent's cell to the goal under the active plan.
    pub goal_distance: Option<u32>,
    pub blocked: bool,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub grid: OccupancyGrid,
    pub diagnostics: Vec<StepDiagnostics>,
    pub poses: Vec<Pose>,
}

struct Plan {
    goal: CellIdx,
    /// BFS distances to the goal over the planning grid at plan time.
    dist: Vec<u32>,
    path: Vec<CellIdx>,
    id: u64,
}

struct Controller {
    policy: Policy,
    cfg: EpisodeConfig,
    scan_remaining: usize,
    plan: Option<Plan>,
    next_plan_id: u64,
    excluded: BTreeSet<CellIdx>,
    best_distance: u32,
    stall: usize,
}

impl Controller {
    fn new(policy: Policy, cfg: &EpisodeConfig) -> Self {
        let per_turn = cfg.motion.turn_step();
        let scan = if cfg.initial_scan {
            (std::f64::consts::TAU / per_turn).round() as usize
        } else {
            0
        };
        Self {
            policy,
            cfg: cfg.clone(),
            scan_remaining: scan,
            plan: None,
            next_plan_id: 0,
            excluded: BTreeSet::new(),
            best_distance: UNREACHABLE,
            stall: 0,
        }
    }

    fn planning_grid(&self, grid: &OccupancyGrid, agent_cell: CellIdx) -> OccupancyGrid {
        let radius = (self.cfg.motion.agent_radius / grid.cell_size).ceil() as usize;
        let mut g = grid.inflated(radius);
        g.force(agent_cell, Cell::Free);
        g
    }

    fn exclude_around(&mut self, goal: CellIdx, grid: &OccupancyGrid) {
        let r = 3isize;
        for dr in -r..=r {
            for dc in -r..=r {
                let (nr, nc) = (goal.0 as isize + dr, goal.1 as isize + dc);
                if nr >= 0 && nc >= 0 && (nr as usize) < grid.rows && (nc as usize) < grid.cols {
                    self.excluded.insert((nr as usize, nc as usize));
                }
            }
        }
    }

    fn make_plan(&mut self, planning: &OccupancyGrid, start: CellIdx, goal: CellIdx) -> bool {
        match plan_path(planning, start, goal) {
            Some(path) => {
                let id = self.next_plan_id;
                self.next_plan_id += 1;
                self.plan = Some(Plan {
                    goal,
                    dist: bfs_distances(planning, goal),
                    path,
                    id,
                });
                self.best_distance = UNREACHABLE;
                self.stall = 0;
                true
            }
            None => false,
        }
    }

    fn drop_plan(&mut self) {
        self.plan = None;
    }

    /// Choose the next action. Returns `(action, goal, plan_id, goal_distance)`.
    fn decide(
        &mut self,
        grid: &OccupancyGrid,
        pose: &Pose,
        rng: &mut ChaCha8Rng,
    ) -> (Action, Option<CellIdx>, u64, Option<u32>) {
        if self.scan_remaining > 0 {
            self.scan_remaining -= 1;
            return (Action::TurnLeft, None, self.next_plan_id, None);
        }
        let Some(agent_cell) = grid.cell_of(pose.x, pose.y) else {
            return (Action::TurnLeft, None, self.next_plan_id, None);
        };
        let planning = self.planning_grid(grid, agent_cell);

        // Keep, repair or abandon the current plan.
        if let Some(plan) = &self.plan {
            let goal = plan.goal;
            let here = plan.dist[agent_cell.0 * grid.cols + agent_cell.1];
            let still_frontier = planning.is_free(goal)
                && planning.neighbors4(goal).any(|n| planning.get(n) == Cell::Unknown);
            if here <= self.cfg.goal_tolerance_cells {
                if self.policy == Policy::Frontier {
                    self.exclude_around(goal, grid);
                }
                self.drop_plan();
            } else if self.policy == Policy::Frontier && !still_frontier {
                self.drop_plan();
            } else if self.stall > self.cfg.max_stall {
                self.exclude_around(goal, grid);
                self.drop_plan();
            } else {
                let path_ok = plan.path.iter().all(|&c| planning.is_free(c) || c == agent_cell);
                if !path_ok || here == UNREACHABLE {
                    self.drop_plan();
                    if !self.make_plan(&planning, agent_cell, goal) {
                        self.exclude_around(goal, grid);
                    }
                }
            }
        }

        if self.plan.is_none() {
            for _ in 0..20 {
                let Some(goal) = next_goal(self.policy, &planning, agent_cell, rng, &self.excluded) else {
                    break;
                };
                let dist_here = bfs_distances(&planning, goal)[agent_cell.0 * grid.cols + agent_cell.1];
                if dist_here <= self.cfg.goal_tolerance_cells {
                    // already there; look elsewhere
                    self.exclude_around(goal, grid);
                    continue;
                }
                if self.make_plan(&planning, agent_cell, goal) {
                    break;
                }
                self.exclude_around(goal, grid);
            }
        }

        let Some(plan) = &self.plan else {
            // nothing left to explore: keep looking around
            return (Action::TurnLeft, None, self.next_plan_id, None);
        };
        let goal = plan.goal;
        let plan_id = plan.id;
        let here = plan.dist[agent_cell.0 * grid.cols + agent_cell.1];
        if here < self.best_distance {
            self.best_distance = here;
            self.stall = 0;
        } else {
            self.stall += 1;
        }
        let action = self.follow(&planning, plan, pose, here);
        (action, Some(goal), plan_id, Some(here))
    }

    /// Greedy heading choice over the reachable discrete headings: prefer the
    /// landing cell closest to the goal, then the fewest turns. Forward is only
    /// emitted when the landing cell is no farther from the goal than the
    /// current one.
    fn follow(&self, planning: &OccupancyGrid, plan: &Plan, pose: &Pose, here: u32) -> Action {
        let step = self.cfg.motion.forward_step;
        let turn = self.cfg.motion.turn_step();
        let n_turns = (std::f64::consts::PI / turn).round() as i64;
        let cols = planning.cols;
        let landing = |yaw: f64| -> Option<u32> {
            // sample the straight segment against the planning grid
            let samples = (step / (planning.cell_size / 2.0)).ceil() as usize;
            let mut last = None;
            for i in 1..=samples {
                let t = if i == samples { step } else { step * i as f64 / samples as f64 };
                let cell = planning.cell_of(pose.x + t * yaw.cos(), pose.y + t * yaw.sin())?;
                if !planning.is_free(cell) {
                    return None;
                }
                last = Some(cell);
            }
            let cell = last?;
            let d = plan.dist[cell.0 * cols + cell.1];
            (d != UNREACHABLE).then_some(d)
        };
        let mut best: Option<(u32, i64, i64)> = None;
        for k in -n_turns..=n_turns {
            let yaw = if k == 0 { pose.yaw } else { normalize_angle(pose.yaw + k as f64 * turn) };
            if let Some(d) = landing(yaw) {
                let key = (d, k.abs(), -k);
                if d <= here && best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        match best {
            Some((_, 0, _)) => Action::Forward,
            Some((_, _, neg_k)) if neg_k < 0 => Action::TurnLeft,
            Some(_) => Action::TurnRight,
            None => {
                // no progressing heading: turn towards the next path cell
                let next = plan
                    .path
                    .iter()
                    .position(|&c| plan.dist[c.0 * cols + c.1] < here)
                    .map(|i| plan.path[i])
                    .unwrap_or(plan.goal);
                let [tx, ty] = planning.cell_center(next);
                let diff = normalize_angle((ty - pose.y).atan2(tx - pose.x) - pose.yaw);
                if diff >= 0.0 {
                    Action::TurnLeft
                } else {
                    Action::TurnRight
                }
            }
        }
    }

    fn on_blocked(&mut self, grid: &mut OccupancyGrid, pose: &Pose) {
        let reach = self.cfg.motion.agent_radius + grid.cell_size;
        if let Some(c) = grid.cell_of(pose.x + reach * pose.yaw.cos(), pose.y + reach * pose.yaw.sin()) {
            grid.mark_blocked(c);
        }
        if let Some(plan) = self.plan.take() {
            let Some(agent_cell) = grid.cell_of(pose.x, pose.y) else {
                return;
            };
            let planning = self.planning_grid(grid, agent_cell);
            if !self.make_plan(&planning, agent_cell, plan.goal) {
                self.exclude_around(plan.goal, grid);
            }
        }
    }
}

/// Sample a collision-free start pose with a yaw on the turn lattice.
pub fn sample_start_pose(scene: &SceneSpec, cfg: &EpisodeConfig, rng: &mut impl Rng) -> Result<Pose> {
    let b = &scene.bounds;
    let r = cfg.motion.agent_radius;
    let headings = (std::f64::consts::TAU / cfg.motion.turn_step()).round() as i64;
    for _ in 0..cfg.start_attempts {
        let x = rng.random_range(b.min[0] + r..b.max[0] - r);
        let y = rng.random_range(b.min[1] + r..b.max[1] - r);
        if scene.is_free(x, y, r) {
            let k = rng.random_range(0..headings);
            let mut pose = Pose::new(x, y, k as f64 * cfg.motion.turn_step());
            pose.camera_height = cfg.camera_height;
            return Ok(pose);
        }
    }
    Err(Error::NoValidStartPose {
        attempts: cfg.start_attempts,
    })
}

/// Collect `cfg.steps` observations following `policy`:
/// sense, detect, map, then pick and execute the next action.
pub fn run_episode(
    scene: &SceneSpec,
    policy: Policy,
    noise: &NoiseModel,
    cfg: &EpisodeConfig,
    k: &CameraIntrinsics,
    seed: u64,
) -> Result<Episode> {
    if cfg.steps == 0 {
        return Err(Error::InvalidConfig("episode needs at least one step".into()));
    }
    let mut start_rng = stage_rng(seed, "start-pose", 0);
    let mut policy_rng = stage_rng(seed, "policy", 0);
    let pose = sample_start_pose(scene, cfg, &mut start_rng)?;
    let mut agent = AgentState { pose, step_count: 0 };
    let mut grid = OccupancyGrid::for_scene(scene, cfg.cell_size);
    let mut controller = Controller::new(policy, cfg);

    let mut trajectory = Trajectory::default();
    let mut diagnostics = Vec::with_capacity(cfg.steps);
    let mut poses = Vec::with_capacity(cfg.steps);

    for i in 0..cfg.steps {
        let frame = render_frame(scene, &agent.pose, k);
        let mut det_rng = stage_rng(seed, "detect", i as u64);
        let detections = simulate_detections(i, &frame, scene, noise, &mut det_rng);
        update_occupancy(&mut grid, &frame, k);
        poses.push(agent.pose);
        trajectory.steps.push(TrajectoryStep { frame, detections });

        let mut diag = StepDiagnostics {
            free_cells: grid.count(Cell::Free),
            action: None,
            goal: None,
            plan_id: 0,
            goal_distance: None,
            blocked: false,
        };
        if i + 1 < cfg.steps {
            let (action, goal, plan_id, dist) = controller.decide(&grid, &agent.pose, &mut policy_rng);
            let next = step_agent(scene, &agent, action, &cfg.motion);
            if action == Action::Forward && next.pose == agent.pose {
                diag.blocked = true;
                controller.on_blocked(&mut grid, &agent.pose);
            }
            diag.action = Some(action);
            diag.goal = goal;
            diag.plan_id = plan_id;
            diag.goal_distance = dist;
            agent = next;
        }
        diagnostics.push(diag);
    }

    Ok(Episode {
        trajectory,
        grid,
        diagnostics,
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::NUM_CLASSES;
    use crate::explore::explored_fraction;
    use crate::scene::{generate_scene, SceneParams};

    fn empty_room() -> SceneSpec {
        let params = SceneParams {
            objects_per_class: [[0, 0]; NUM_CLASSES],
            interior_walls: 0,
            ..Default::default()
        };
        generate_scene(&params, 4).unwrap()
    }

    #[test]
    fn single_step_episode() {
        let scene = empty_room();
        let cfg = EpisodeConfig { steps: 1, ..Default::default() };
        let ep = run_episode(&scene, Policy::Frontier, &NoiseModel::default(), &cfg, &CameraIntrinsics::default(), 3).unwrap();
        assert_eq!(ep.trajectory.len(), 1);
        assert_eq!(ep.diagnostics[0].action, None);
    }

    #[test]
    fn zero_steps_rejected() {
        let scene = empty_room();
        let cfg = EpisodeConfig { steps: 0, ..Default::default() };
        assert!(run_episode(&scene, Policy::Frontier, &NoiseModel::default(), &cfg, &CameraIntrinsics::default(), 3).is_err());
    }

    #[test]
    fn no_room_for_agent() {
        let mut scene = empty_room();
        scene.obstacles.push(scene.bounds);
        let cfg = EpisodeConfig { steps: 3, start_attempts: 50, ..Default::default() };
        let err = run_episode(&scene, Policy::Frontier, &NoiseModel::default(), &cfg, &CameraIntrinsics::default(), 3).unwrap_err();
        assert!(matches!(err, Error::NoValidStartPose { attempts: 50 }));
    }

    #[test]
    fn frontier_covers_empty_room() {
        let scene = empty_room();
        let cfg = EpisodeConfig::default();
        let ep = run_episode(&scene, Policy::Frontier, &NoiseModel::default(), &cfg, &CameraIntrinsics::default(), 1).unwrap();
        let frac = explored_fraction(&ep.grid, &scene);
        assert!(frac >= 0.95, "explored fraction {frac}");
    }
}
