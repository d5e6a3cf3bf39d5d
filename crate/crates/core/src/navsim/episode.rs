use std::fmt::Write as _;

use super::{
    costmap_2d, forward_stop_controller, step_robot, subgoal_planner, Cmd, CostmapParams, ForwardStopParams, Limits,
    PlannerParams, RobotState,
};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::pixelnet::{predict_ssm, predict_trav, SoftmaxClassifier};
use crate::pu::PuClassifier;
use crate::seed::{derive_seed, rng_for};
use crate::voxelfusion::{ClassLikelihood, SemanticVoxelMap, TravLikelihood, VoxelMapConfig};
use crate::world::{build_world, render_frame, PlanarBox, ScenarioConfig, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapMode {
    /// Every mapped voxel is an obstacle.
    Baseline,
    /// Voxels mapped as traversable plants are dropped from the obstacle cloud.
    Proposed,
}

impl MapMode {
    pub fn name(self) -> &'static str {
        match self {
            MapMode::Baseline => "baseline",
            MapMode::Proposed => "proposed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(MapMode::Baseline),
            "proposed" => Some(MapMode::Proposed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    ForwardStop,
    Subgoal,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::ForwardStop => "forward-stop",
            ControllerKind::Subgoal => "subgoal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward-stop" => Some(ControllerKind::ForwardStop),
            "subgoal" => Some(ControllerKind::Subgoal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Traversed,
    Stuck,
    Collision,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Traversed => "traversed",
            Outcome::Stuck => "stuck",
            Outcome::Collision => "collision",
        }
    }
}

/// One navigation trial. The robot starts on the corridor centerline at
/// `start_x` heading +x; the goal is the centerline point at `goal_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub world: ScenarioConfig,
    pub corridor: usize,
    pub start_x: f64,
    pub goal_x: f64,
    /// Intermediate way-points for the sub-goal controller, in order.
    pub subgoals: Vec<(f64, f64)>,
    pub controller: ControllerKind,
    /// Rigid wall across the corridor at this x.
    pub wall_x: Option<f64>,
    pub dt: f64,
    pub max_time: f64,
    pub stuck_time: f64,
    /// Minimum decrease in goal distance that counts as progress.
    pub progress_epsilon: f64,
    pub goal_tolerance: f64,
    /// Clear the map once when stuck before giving up.
    pub allow_reset: bool,
    pub theta_free: f64,
    pub limits: Limits,
    pub forward: ForwardStopParams,
    pub planner: PlannerParams,
    pub inflation_radius: f64,
    pub costmap_resolution: f64,
    pub voxel: VoxelMapConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        let world = ScenarioConfig::default();
        let forward = ForwardStopParams::for_robot(&world.robot);
        Self {
            corridor: 1,
            start_x: 0.0,
            goal_x: world.row_length,
            subgoals: Vec::new(),
            controller: ControllerKind::ForwardStop,
            wall_x: None,
            dt: 0.1,
            max_time: 210.0,
            stuck_time: 30.0,
            progress_epsilon: 0.05,
            goal_tolerance: 0.3,
            allow_reset: false,
            theta_free: 0.75,
            limits: Limits::default(),
            forward,
            planner: PlannerParams::default(),
            inflation_radius: 0.25,
            costmap_resolution: 0.1,
            voxel: VoxelMapConfig { max_range: world.max_range, ..VoxelMapConfig::default() },
            world,
        }
    }
}

impl Scenario {
    /// Default greenhouse with foliage leaning into the corridors.
    pub fn overhung(seed: u64) -> Self {
        Self { world: ScenarioConfig { seed, ..ScenarioConfig::default() }, ..Self::default() }
    }

    /// No overhang; a rigid wall blocks the corridor mid-way.
    pub fn walled(seed: u64) -> Self {
        let world = ScenarioConfig { seed, overhang_fraction: 0.0, ..ScenarioConfig::default() };
        Self { wall_x: Some(world.row_length / 2.0 + 1.25), world, ..Self::default() }
    }

    /// No overhang and no wall.
    pub fn clear(seed: u64) -> Self {
        Self { world: ScenarioConfig { seed, overhang_fraction: 0.0, ..ScenarioConfig::default() }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.voxel.validate()?;
        if !(self.dt > 0.0) || !(self.max_time > 0.0) || !(self.stuck_time > 0.0) {
            return Err(Error::config("time step, time limit and stuck time must be positive"));
        }
        if !(self.goal_tolerance > 0.0) || !(self.progress_epsilon >= 0.0) {
            return Err(Error::config("goal tolerance must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta_free) {
            return Err(Error::config("free-space threshold must lie in [0, 1]"));
        }
        if !(self.costmap_resolution > 0.0) || !(self.inflation_radius >= 0.0) {
            return Err(Error::config("costmap resolution must be positive"));
        }
        if self.corridor >= self.world.corridor_count() {
            return Err(Error::UnknownCorridor { id: self.corridor, count: self.world.corridor_count() });
        }
        Ok(())
    }

    pub fn build_world(&self) -> Result<WorldModel> {
        self.validate()?;
        let mut world = build_world(&self.world)?;
        if let Some(x) = self.wall_x {
            world.add_wall(self.corridor, x)?;
        }
        Ok(world)
    }

    fn goal(&self) -> (f64, f64) {
        (self.goal_x, self.world.corridor_y(self.corridor))
    }
}

/// Perception models and calibrated likelihoods used in proposed mode.
#[derive(Debug, Clone)]
pub struct EpisodeModels {
    pub ssm: SoftmaxClassifier,
    pub tem: PuClassifier,
    pub class_lik: ClassLikelihood,
    pub trav_lik: TravLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub tick: u32,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub stopped: bool,
    pub stop_events: u32,
    pub map_size: usize,
    pub obstacles: usize,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavEpisodeResult {
    pub mode: MapMode,
    pub outcome: Outcome,
    pub distance: f64,
    pub sim_time: f64,
    pub stop_events: u32,
    pub resets: u32,
    pub final_state: RobotState,
    pub trace: Vec<TraceRow>,
}

impl NavEpisodeResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("tick,time,x,y,theta,v,omega,stopped,stop_events,map_size,obstacles,blocked\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.tick,
                r.time,
                r.x,
                r.y,
                r.theta,
                r.v,
                r.omega,
                u8::from(r.stopped),
                r.stop_events,
                r.map_size,
                r.obstacles,
                u8::from(r.blocked)
            );
        }
        s
    }
}

fn footprint(world: &WorldModel, s: &RobotState) -> PlanarBox {
    let r = &world.config.robot;
    PlanarBox {
        x: s.x,
        y: s.y,
        yaw: s.theta,
        half_length: r.length / 2.0,
        half_width: r.width / 2.0,
        z0: world.config.ground_clearance,
        z1: r.height,
    }
}

/// Whether the robot body intersects any rigid primitive. Foliage contact
/// is allowed.
pub fn collides(world: &WorldModel, s: &RobotState) -> bool {
    let fp = footprint(world, s);
    world.primitives.iter().any(|p| p.is_rigid() && p.shape.overlaps_footprint(&fp))
}

/// Closed-loop episode: render, perceive, fuse, control, step, check.
pub fn run_episode(
    world: &WorldModel,
    scenario: &Scenario,
    models: Option<&EpisodeModels>,
    mode: MapMode,
) -> Result<NavEpisodeResult> {
    run_episode_with_map(world, scenario, models, mode).map(|(r, _)| r)
}

/// Like [`run_episode`], also returning the voxel map as it stood at the end.
pub fn run_episode_with_map(
    world: &WorldModel,
    scenario: &Scenario,
    models: Option<&EpisodeModels>,
    mode: MapMode,
) -> Result<(NavEpisodeResult, SemanticVoxelMap)> {
    scenario.validate()?;
    let mut map = match (mode, models) {
        (MapMode::Proposed, Some(m)) => {
            SemanticVoxelMap::calibrated(scenario.voxel, m.class_lik.clone(), m.trav_lik.clone())?
        }
        (MapMode::Proposed, None) => return Err(Error::Uncalibrated),
        (MapMode::Baseline, _) => SemanticVoxelMap::new(scenario.voxel)?,
    };
    let yc = world.corridor_y(scenario.corridor)?;
    let goal = scenario.goal();
    let mut waypoints: Vec<(f64, f64)> = scenario.subgoals.clone();
    waypoints.push(goal);
    let mut next_wp = 0;

    let b = &world.bounds;
    let cost_params = CostmapParams {
        inflation_radius: scenario.inflation_radius,
        z_min: scenario.forward.z_min,
        z_max: world.config.robot.height,
        ..CostmapParams::covering((b.min.x, b.min.y), (b.max.x, b.max.y), scenario.costmap_resolution)?
    };

    let render_seed = derive_seed(world.config.seed, "episode");
    let intr = world.config.intrinsics;
    let z = world.config.ground_clearance;
    let dist_to_goal = |s: &RobotState| ((s.x - goal.0).powi(2) + (s.y - goal.1).powi(2)).sqrt();

    let mut state = RobotState { x: scenario.start_x, y: yc, ..Default::default() };
    let mut trace = Vec::new();
    let mut distance = 0.0;
    let mut stop_events = 0;
    let mut resets = 0;
    let mut was_moving = true;
    let mut best = dist_to_goal(&state);
    let mut last_progress = 0.0;
    let max_ticks = (scenario.max_time / scenario.dt).ceil() as u32;
    let mut outcome = Outcome::Stuck;
    let mut time = 0.0;

    for tick in 0..max_ticks {
        let robot_pose = Pose::from_yaw(state.x, state.y, z, state.theta);
        let cam = world.config.mount.camera_pose(&robot_pose);
        let mut rng = rng_for(render_seed, &format!("tick-{tick}"));
        let frame = render_frame(world, &cam, &intr, tick, &mut rng);
        let cloud = match (mode, models) {
            (MapMode::Proposed, Some(m)) => {
                let (_, classes) = predict_ssm(&frame, &m.ssm);
                let trav = predict_trav(&frame, &m.ssm, &m.tem);
                map.integrate_frame(&frame, &classes, &trav)?;
                map.obstacle_cloud(scenario.theta_free)
            }
            _ => {
                map.integrate_geometry(&frame)?;
                map.all_centroids()
            }
        };

        while next_wp + 1 < waypoints.len() {
            let (wx, wy) = waypoints[next_wp];
            if ((state.x - wx).powi(2) + (state.y - wy).powi(2)).sqrt() <= scenario.goal_tolerance {
                next_wp += 1;
            } else {
                break;
            }
        }
        let (cmd, blocked) = match scenario.controller {
            ControllerKind::ForwardStop => (forward_stop_controller(&cloud, &state, &scenario.forward), false),
            ControllerKind::Subgoal => {
                let cm = costmap_2d(&cloud, &cost_params)?;
                let out = subgoal_planner(&cm, &state, waypoints[next_wp], &scenario.planner)?;
                (out.cmd, out.blocked)
            }
        };
        let stopped = cmd == Cmd::STOP;
        if stopped && was_moving {
            stop_events += 1;
        }
        was_moving = !stopped;

        state = step_robot(&state, cmd, scenario.dt, &scenario.limits)?;
        distance += state.v.abs() * scenario.dt;
        time = f64::from(tick + 1) * scenario.dt;
        trace.push(TraceRow {
            tick,
            time,
            x: state.x,
            y: state.y,
            theta: state.theta,
            v: state.v,
            omega: state.omega,
            stopped,
            stop_events,
            map_size: map.len(),
            obstacles: cloud.len(),
            blocked,
        });

        if collides(world, &state) {
            outcome = Outcome::Collision;
            break;
        }
        let d = dist_to_goal(&state);
        if d <= scenario.goal_tolerance {
            outcome = Outcome::Traversed;
            break;
        }
        if d < best - scenario.progress_epsilon {
            best = d;
            last_progress = time;
        } else if time - last_progress >= scenario.stuck_time {
            if scenario.allow_reset && resets == 0 {
                map.clear();
                resets += 1;
                last_progress = time;
            } else {
                break;
            }
        }
    }

    let result =
        NavEpisodeResult { mode, outcome, distance, sim_time: time, stop_events, resets, final_state: state, trace };
    Ok((result, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pixelnet::SoftmaxClassifier;
    use crate::pu::LabelModel;

    /// Models that call every pixel a traversable plant.
    fn permissive_models() -> EpisodeModels {
        let tem = PuClassifier::new(LabelModel { weights: vec![0.0; 19], bias: 0.0 }, 0.5).unwrap();
        EpisodeModels {
            ssm: SoftmaxClassifier::zeros(3, 8),
            tem,
            class_lik: ClassLikelihood::new([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]]).unwrap(),
            trav_lik: crate::voxelfusion::TravLikelihood::new([
                vec![0.19, 0.19, 0.19, 0.19, 0.19, 0.01, 0.01, 0.01, 0.01, 0.01],
                vec![0.01, 0.01, 0.01, 0.01, 0.01, 0.19, 0.19, 0.19, 0.19, 0.19],
            ])
            .unwrap(),
        }
    }

    fn short(mut sc: Scenario) -> Scenario {
        sc.world.row_length = 2.5;
        sc.world.foliage_per_meter = 0.0;
        sc.goal_x = 2.0;
        sc.start_x = 0.5;
        sc
    }

    #[test]
    fn clear_corridor_identical_in_both_modes() {
        let sc = short(Scenario::clear(3));
        let world = sc.build_world().unwrap();
        let m = permissive_models();
        let a = run_episode(&world, &sc, Some(&m), MapMode::Proposed).unwrap();
        let b = run_episode(&world, &sc, None, MapMode::Baseline).unwrap();
        assert_eq!(a.outcome, Outcome::Traversed);
        assert_eq!(b.outcome, Outcome::Traversed);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert!((ra.x - rb.x).abs() < 1e-9 && (ra.y - rb.y).abs() < 1e-9 && (ra.theta - rb.theta).abs() < 1e-9);
        }
        assert!((a.distance - 1.2).abs() < 0.11);
    }

    #[test]
    fn wall_stops_baseline_without_collision() {
        let mut sc = short(Scenario::walled(4));
        sc.wall_x = Some(1.5);
        sc.stuck_time = 5.0;
        let world = sc.build_world().unwrap();
        let r = run_episode(&world, &sc, None, MapMode::Baseline).unwrap();
        assert_eq!(r.outcome, Outcome::Stuck);
        assert!(r.final_state.x + 0.3 < 1.5);
        assert!(r.stop_events >= 1);
    }

    #[test]
    fn permissive_models_drive_into_the_wall() {
        // Calling the wall a traversable plant removes it from the obstacle cloud.
        let mut sc = short(Scenario::walled(4));
        sc.wall_x = Some(1.5);
        let world = sc.build_world().unwrap();
        let r = run_episode(&world, &sc, Some(&permissive_models()), MapMode::Proposed).unwrap();
        assert_eq!(r.outcome, Outcome::Collision);
    }

    #[test]
    fn subgoal_controller_reaches_goal() {
        let mut sc = short(Scenario::clear(5));
        sc.controller = ControllerKind::Subgoal;
        sc.subgoals = vec![(1.0, sc.world.corridor_y(1))];
        let world = sc.build_world().unwrap();
        let r = run_episode(&world, &sc, None, MapMode::Baseline).unwrap();
        assert_eq!(r.outcome, Outcome::Traversed, "{:?}", r.final_state);
    }

    #[test]
    fn reset_is_counted_and_episode_deterministic() {
        let mut sc = short(Scenario::walled(6));
        sc.wall_x = Some(1.5);
        sc.stuck_time = 3.0;
        sc.allow_reset = true;
        let world = sc.build_world().unwrap();
        let a = run_episode(&world, &sc, None, MapMode::Baseline).unwrap();
        let b = run_episode(&world, &sc, None, MapMode::Baseline).unwrap();
        assert_eq!(a.resets, 1);
        assert_eq!(a.outcome, Outcome::Stuck);
        assert_eq!(a.trace_csv(), b.trace_csv());
        assert!(run_episode(&world, &sc, None, MapMode::Proposed).is_err());
    }
}
