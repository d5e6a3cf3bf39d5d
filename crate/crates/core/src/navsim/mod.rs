//! Kinematic navigation simulator.
//!
//! A unicycle robot drives closed-loop against the live voxel map. Two
//! controllers are provided: a forward-stop controller that drives straight
//! and halts while any obstacle point sits in a box ahead, and a sub-goal
//! follower that plans on an inflated 2D costmap.

mod costmap;
mod episode;

pub use costmap::{
    costmap_2d, plan_path, subgoal_planner, Cell, Costmap2D, CostmapParams, PlannerOutput, PlannerParams,
};
pub use episode::{
    collides, run_episode, run_episode_with_map, ControllerKind, EpisodeModels, MapMode, NavEpisodeResult, Outcome,
    Scenario, TraceRow,
};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cmd {
    pub v: f64,
    pub omega: f64,
}

impl Cmd {
    pub const STOP: Cmd = Cmd { v: 0.0, omega: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { v_max: 0.5, omega_max: 1.0 }
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Unicycle integration with commands clamped to the limits. The heading is
/// not wrapped so that constant turning integrates exactly.
pub fn step_robot(state: &RobotState, cmd: Cmd, dt: f64, limits: &Limits) -> Result<RobotState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("time step must be positive"));
    }
    let v = cmd.v.clamp(-limits.v_max, limits.v_max);
    let omega = cmd.omega.clamp(-limits.omega_max, limits.omega_max);
    Ok(RobotState {
        x: state.x + v * state.theta.cos() * dt,
        y: state.y + v * state.theta.sin() * dt,
        theta: state.theta + omega * dt,
        v,
        omega,
    })
}

/// Stop box ahead of the robot, in the robot frame: `x ∈ [0, depth]`,
/// `|y| ≤ width/2`, world `z ∈ (z_min, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardStopParams {
    pub v_nom: f64,
    pub depth: f64,
    pub width: f64,
    pub height: f64,
    /// Points at or below this height (ground returns) are ignored.
    pub z_min: f64,
}

impl Default for ForwardStopParams {
    fn default() -> Self {
        Self { v_nom: 0.1, depth: 0.8, width: 0.6, height: 1.0, z_min: 0.05 }
    }
}

impl ForwardStopParams {
    pub fn for_robot(robot: &crate::travmask::RobotFootprint) -> Self {
        Self { width: robot.width + 0.2, height: robot.height, ..Self::default() }
    }

    pub fn blocks(&self, p: &Vec3, state: &RobotState) -> bool {
        let (s, c) = state.theta.sin_cos();
        let (dx, dy) = (p.x - state.x, p.y - state.y);
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        (0.0..=self.depth).contains(&lx) && ly.abs() <= self.width / 2.0 && p.z > self.z_min && p.z <= self.height
    }
}

/// `(v_nom, 0)` when the stop box is clear, otherwise a full stop.
pub fn forward_stop_controller(cloud: &[Vec3], state: &RobotState, params: &ForwardStopParams) -> Cmd {
    if cloud.iter().any(|p| params.blocks(p, state)) {
        Cmd::STOP
    } else {
        Cmd { v: params.v_nom, omega: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn straight_and_turn_steps() {
        let l = Limits::default();
        let s = step_robot(&RobotState::default(), Cmd { v: 0.1, omega: 0.0 }, 1.0, &l).unwrap();
        assert!((s.x - 0.1).abs() < 1e-15 && s.y == 0.0 && s.theta == 0.0);
        let s = step_robot(
            &RobotState::default(),
            Cmd { v: 0.0, omega: std::f64::consts::PI },
            1.0,
            &Limits { omega_max: 4.0, ..l },
        )
        .unwrap();
        assert!((s.theta - std::f64::consts::PI).abs() < 1e-15 && s.x == 0.0 && s.y == 0.0);
        assert!(step_robot(&RobotState::default(), Cmd::STOP, 0.0, &l).is_err());
    }

    #[test]
    fn commands_are_clamped() {
        let l = Limits { v_max: 0.2, omega_max: 0.5 };
        let s = step_robot(&RobotState::default(), Cmd { v: 3.0, omega: -9.0 }, 1.0, &l).unwrap();
        assert_eq!((s.v, s.omega), (0.2, -0.5));
    }

    proptest! {
        #[test]
        fn straight_line_substeps_match(theta in -3.0f64..3.0, v in 0.0f64..0.5) {
            let l = Limits::default();
            let start = RobotState { theta, ..Default::default() };
            let cmd = Cmd { v, omega: 0.0 };
            let mut s = start;
            for _ in 0..10 {
                s = step_robot(&s, cmd, 0.1, &l).unwrap();
            }
            let one = step_robot(&start, cmd, 1.0, &l).unwrap();
            prop_assert!((s.x - one.x).abs() < 1e-12 && (s.y - one.y).abs() < 1e-12);
        }
    }

    #[test]
    fn stop_box_examples() {
        let p = ForwardStopParams::default();
        let st = RobotState::default();
        assert_eq!(forward_stop_controller(&[], &st, &p), Cmd { v: 0.1, omega: 0.0 });
        assert_eq!(forward_stop_controller(&[Vec3::new(0.3, 0.0, 0.5)], &st, &p), Cmd::STOP);
        assert_eq!(forward_stop_controller(&[Vec3::new(0.3, 2.0, 0.5)], &st, &p), Cmd { v: 0.1, omega: 0.0 });
        // Ground returns and points behind do not stop the robot.
        assert_eq!(forward_stop_controller(&[Vec3::new(0.3, 0.0, 0.02), Vec3::new(-0.3, 0.0, 0.5)], &st, &p).v, 0.1);
        // The box turns with the robot.
        let turned = RobotState { theta: std::f64::consts::FRAC_PI_2, ..Default::default() };
        assert_eq!(forward_stop_controller(&[Vec3::new(0.0, 0.5, 0.5)], &turned, &p), Cmd::STOP);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }
}
