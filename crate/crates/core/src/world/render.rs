use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Class, Primitive, WorldModel, VOID};
use crate::geometry::{CameraIntrinsics, Pose, Vec3};
use crate::world::shapes::{intersect_ground, Shape};

/// Camera placement on the robot: `forward` and `height` meters from the
/// robot origin, pitched down by `pitch_deg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMount {
    pub forward: f64,
    pub height: f64,
    pub pitch_deg: f64,
}

impl CameraMount {
    /// Optical frame relative to the robot frame.
    pub fn robot_to_camera(&self) -> Pose {
        // Columns: optical x -> -y, optical y -> -z, optical z -> +x.
        let optical = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let pitch = Rotation3::from_axis_angle(&Vector3::y_axis(), self.pitch_deg.to_radians());
        let rot = pitch * Rotation3::from_matrix_unchecked(optical);
        Pose::from_rotation(rot, Vec3::new(self.forward, 0.0, self.height))
    }

    pub fn camera_pose(&self, robot_pose: &Pose) -> Pose {
        robot_pose.compose(&self.robot_to_camera())
    }
}

/// One synthetic RGB-D-like observation. Images are row-major; `features`
/// is channel-interleaved with `feature_dim` channels per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u32,
    pub intrinsics: CameraIntrinsics,
    pub feature_dim: usize,
    pub features: Vec<f32>,
    /// Optical-axis depth in meters; 0 means no return.
    pub depth: Vec<f32>,
    /// Camera-to-world.
    pub pose: Pose,
    pub gt_class: Vec<u8>,
    pub gt_trav: Vec<u8>,
}

impl Frame {
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn pixel_count(&self) -> usize {
        self.intrinsics.pixel_count()
    }

    pub fn pixel_features(&self, idx: usize) -> &[f32] {
        &self.features[idx * self.feature_dim..(idx + 1) * self.feature_dim]
    }

    /// World-frame point of pixel `idx`, if it has a depth return.
    pub fn world_point(&self, idx: usize) -> Option<Vec3> {
        let z = f64::from(self.depth[idx]);
        if z <= 0.0 {
            return None;
        }
        let u = (idx % self.width()) as f64 + 0.5;
        let v = (idx / self.width()) as f64 + 0.5;
        let p = crate::geometry::backproject(u, v, z, &self.intrinsics).ok()?;
        Some(self.pose.transform_point(&p))
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.pixel_count();
        if self.depth.len() != n || self.gt_class.len() != n || self.gt_trav.len() != n {
            return Err("layer sizes differ".into());
        }
        if self.features.len() != n * self.feature_dim {
            return Err("feature layer size mismatch".into());
        }
        for i in 0..n {
            if !(self.depth[i] >= 0.0) {
                return Err(format!("negative depth at {i}"));
            }
            if self.gt_trav[i] == 1 && self.gt_class[i] != Class::Plant as u8 {
                return Err(format!("traversable non-plant pixel {i}"));
            }
            if self.gt_class[i] == VOID && self.depth[i] != 0.0 {
                return Err(format!("void pixel {i} has depth"));
            }
        }
        Ok(())
    }
}

struct Hit<'a> {
    depth: f64,
    primitive: Option<&'a Primitive>,
}

/// Ray-casts every pixel center against the world. Nearest surface wins;
/// rays beyond the sensor range come back void.
pub fn render_frame<R: Rng + ?Sized>(
    world: &WorldModel,
    pose: &Pose,
    intr: &CameraIntrinsics,
    frame_id: u32,
    rng: &mut R,
) -> Frame {
    let max_range = world.config.max_range;
    let origin = pose.translation();
    let forward = pose.transform_vector(&Vec3::new(0.0, 0.0, 1.0));
    // Half-diagonal field of view bounds how far off-axis a visible point can be.
    let corner =
        intr.ray_direction(0.0, 0.0).norm().max(intr.ray_direction(intr.width as f64, intr.height as f64).norm());
    let reach = max_range * corner;
    let visible: Vec<&Primitive> = world
        .primitives
        .iter()
        .filter(|p| {
            let (c, r) = p.shape.bounding_sphere();
            let rel = c - origin;
            rel.norm() - r <= reach && rel.dot(&forward) >= -r
        })
        // Foliage the camera is pushing through is treated as brushed aside.
        .filter(|p| !matches!(p.shape, Shape::Sphere(s) if p.traversable && (s.center - origin).norm() < s.radius))
        .collect();

    let n = intr.pixel_count();
    let f = world.features.dim;
    let mut depth = vec![0.0f32; n];
    let mut gt_class = vec![VOID; n];
    let mut gt_trav = vec![0u8; n];
    let mut classes: Vec<(Option<Class>, bool)> = vec![(None, false); n];

    for v in 0..intr.height {
        for u in 0..intr.width {
            let idx = v * intr.width + u;
            let dir = pose.transform_vector(&intr.ray_direction(u as f64 + 0.5, v as f64 + 0.5));
            let mut best = Hit { depth: f64::INFINITY, primitive: None };
            let mut hit_ground = false;
            if let Some(t) = intersect_ground(&origin, &dir) {
                best.depth = t;
                hit_ground = true;
            }
            for p in &visible {
                if let Some(t) = p.shape.intersect(&origin, &dir) {
                    if t < best.depth {
                        best = Hit { depth: t, primitive: Some(p) };
                        hit_ground = false;
                    }
                }
            }
            // The camera-frame ray has unit z, so the ray parameter is the depth.
            if best.depth > max_range || best.depth < world.config.min_range || !best.depth.is_finite() {
                continue;
            }
            depth[idx] = best.depth as f32;
            let (class, trav) = match best.primitive {
                Some(p) => (p.class, p.traversable),
                None if hit_ground => (Class::Ground, false),
                None => unreachable!("finite depth without a hit"),
            };
            gt_class[idx] = class as u8;
            gt_trav[idx] = u8::from(trav);
            classes[idx] = (Some(class), trav);
        }
    }

    let mut features = Vec::with_capacity(n * f);
    let sigma = world.features.sigma;
    for &(class, trav) in &classes {
        let mean = world.features.mean(class, trav);
        for &m in mean {
            let z: f64 = rng.sample(StandardNormal);
            features.push((m + sigma * z) as f32);
        }
    }

    Frame { frame_id, intrinsics: *intr, feature_dim: f, features, depth, pose: *pose, gt_class, gt_trav }
}
