use super::WorldModel;
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Straight pass along one corridor centerline.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub corridor: usize,
    /// Longitudinal start position (m).
    pub start: f64,
    pub length: f64,
    pub spacing: f64,
    /// Sideways offset from the centerline (m, +y).
    pub lateral_offset: f64,
    /// Drive toward -x instead of +x.
    pub reverse: bool,
}

impl PathSpec {
    pub fn full_corridor(world: &WorldModel, corridor: usize, spacing: f64) -> Self {
        Self { corridor, start: 0.0, length: world.config.row_length, spacing, lateral_offset: 0.0, reverse: false }
    }
}

/// Robot base poses at fixed spacing along the corridor, heading in the
/// travel direction; the base sits at the configured ground clearance.
pub fn script_trajectory(world: &WorldModel, spec: &PathSpec) -> Result<Vec<Pose>> {
    let yc = world.corridor_y(spec.corridor)?;
    if !(spec.spacing > 0.0) || !(spec.length >= 0.0) {
        return Err(Error::invalid("path spacing must be positive and length non-negative"));
    }
    let steps = (spec.length / spec.spacing + 1e-9).floor() as usize;
    let (dir, yaw) = if spec.reverse { (-1.0, std::f64::consts::PI) } else { (1.0, 0.0) };
    let z = world.config.ground_clearance;
    Ok((0..=steps)
        .map(|k| Pose::from_yaw(spec.start + dir * k as f64 * spec.spacing, yc + spec.lateral_offset, z, yaw))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{build_world, ScenarioConfig};

    #[test]
    fn corridor_pass_pose_count() {
        let world = build_world(&ScenarioConfig::default()).unwrap();
        let spec = PathSpec::full_corridor(&world, 1, 0.25);
        let poses = script_trajectory(&world, &spec).unwrap();
        assert_eq!(poses.len(), 31);
        let y0 = poses[0].translation().y;
        for w in poses.windows(2) {
            let d = w[1].translation() - w[0].translation();
            assert!((d.norm() - 0.25).abs() < 1e-9);
            assert!((w[1].translation().y - y0).abs() < 1e-12);
            assert!(d.y.abs() < 1e-12 && d.z.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_length_single_pose() {
        let world = build_world(&ScenarioConfig::default()).unwrap();
        let spec = PathSpec { length: 0.0, ..PathSpec::full_corridor(&world, 0, 0.25) };
        assert_eq!(script_trajectory(&world, &spec).unwrap().len(), 1);
    }

    #[test]
    fn unknown_corridor() {
        let world = build_world(&ScenarioConfig::default()).unwrap();
        let spec = PathSpec::full_corridor(&world, 17, 0.25);
        assert!(matches!(script_trajectory(&world, &spec), Err(Error::UnknownCorridor { .. })));
    }

    #[test]
    fn reverse_faces_back() {
        let world = build_world(&ScenarioConfig::default()).unwrap();
        let spec = PathSpec { start: 7.5, reverse: true, ..PathSpec::full_corridor(&world, 0, 0.5) };
        let poses = script_trajectory(&world, &spec).unwrap();
        assert!((poses.last().unwrap().translation().x).abs() < 1e-9);
        assert!((poses[0].yaw().abs() - std::f64::consts::PI).abs() < 1e-12);
    }
}
