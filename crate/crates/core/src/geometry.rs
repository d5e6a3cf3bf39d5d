//! Rigid transforms, pinhole projection and voxel indexing.
//!
//! Camera frames follow the optical convention: x right, y down, z forward.
//! World and robot frames are x forward, y left, z up.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// Rigid transform mapping points from a local frame into a parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Rotation3<f64>,
    translation: Vec3,
}

impl Pose {
    /// Builds a pose from a raw rotation matrix, rejecting matrices that are
    /// not proper rotations.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let ortho_err = (gram - Matrix3::identity()).abs().max();
        if ortho_err > ORTHO_TOL {
            return Err(Error::invalid(format!("rotation is not orthonormal (error {ortho_err:e})")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid(format!("rotation determinant {det} != 1")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite translation"));
        }
        Ok(Self { rotation: Rotation3::from_matrix_unchecked(rotation), translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Rotation3::identity(), translation }
    }

    /// Planar pose: rotation about +z by `yaw` radians.
    pub fn from_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { rotation: Rotation3::from_axis_angle(&Vector3::z_axis(), yaw), translation: Vec3::new(x, y, z) }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    /// Quaternion in scalar-last order `(qx, qy, qz, qw)`; must be unit
    /// norm within 1e-6.
    pub fn from_quaternion(translation: Vec3, q: [f64; 4]) -> Result<Self> {
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("quaternion norm {norm} is not 1")));
        }
        let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]));
        Ok(Self { rotation: uq.to_rotation_matrix(), translation })
    }

    /// Scalar-last unit quaternion `(qx, qy, qz, qw)` with `qw >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        let c = q.coords;
        let sign = if c.w < 0.0 { -1.0 } else { 1.0 };
        [sign * c.x, sign * c.y, sign * c.z, sign * c.w]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// Heading of the local x axis projected onto the world xy plane.
    pub fn yaw(&self) -> f64 {
        let m = self.rotation.matrix();
        m[(1, 0)].atan2(m[(0, 0)])
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rot = self.rotation.inverse();
        Self { rotation: rot, translation: -(rot * self.translation) }
    }

    /// `self ∘ other`: maps points from `other`'s local frame through
    /// `other` and then through `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Pinhole intrinsics. Pixel `(u, v)` lies inside the image when
/// `0 <= u < width` and `0 <= v < height`; pixel centers sit at half-integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return Err(Error::invalid("cx must lie strictly inside the image"));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(Error::invalid("cy must lie strictly inside the image"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Unnormalized camera-frame ray direction through a pixel position.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Projects a camera-frame point; `None` if it is behind the camera or
/// lands outside the image.
pub fn project(p: &Vec3, intr: &CameraIntrinsics) -> Option<(f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    let u = intr.fx * p.x / p.z + intr.cx;
    let v = intr.fy * p.y / p.z + intr.cy;
    let inside = u >= 0.0 && u < intr.width as f64 && v >= 0.0 && v < intr.height as f64;
    inside.then_some((u, v))
}

/// Lifts pixel `(u, v)` at optical-axis depth `z` into the camera frame.
pub fn backproject(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<Vec3> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::invalid(format!("depth must be positive, got {z}")));
    }
    Ok(Vec3::new((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z))
}

pub fn transform_point(pose: &Pose, p: &Vec3) -> Vec3 {
    pose.transform_point(p)
}

/// Integer index of a cubic voxel; voxel `k` spans `[k·s, (k+1)·s)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub ix: i32,
    pub iy: i32,
    pub iz: i32,
}

impl VoxelKey {
    pub const fn new(ix: i32, iy: i32, iz: i32) -> Self {
        Self { ix, iy, iz }
    }

    pub fn offset(&self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.ix + dx, self.iy + dy, self.iz + dz)
    }
}

pub fn voxel_key_of(p: &Vec3, voxel_size: f64) -> VoxelKey {
    debug_assert!(voxel_size > 0.0);
    VoxelKey::new(
        (p.x / voxel_size).floor() as i32,
        (p.y / voxel_size).floor() as i32,
        (p.z / voxel_size).floor() as i32,
    )
}

pub fn voxel_center(key: VoxelKey, voxel_size: f64) -> Vec3 {
    Vec3::new(
        (f64::from(key.ix) + 0.5) * voxel_size,
        (f64::from(key.iy) + 0.5) * voxel_size,
        (f64::from(key.iz) + 0.5) * voxel_size,
    )
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn intr100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn project_examples() {
        let intr = intr100();
        assert_eq!(project(&Vec3::new(0.0, 0.0, 1.0), &intr), Some((50.0, 50.0)));
        assert_eq!(project(&Vec3::new(0.5, 0.0, 1.0), &intr), None);
        let (u, v) = project(&Vec3::new(0.25, -0.1, 2.0), &intr).unwrap();
        assert!((u - 62.5).abs() < 1e-12 && (v - 45.0).abs() < 1e-12);
        assert_eq!(project(&Vec3::new(0.0, 0.0, -1.0), &intr), None);
    }

    #[test]
    fn backproject_examples() {
        let intr = intr100();
        assert_eq!(backproject(50.0, 50.0, 2.0, &intr).unwrap(), Vec3::new(0.0, 0.0, 2.0));
        let p = backproject(100.0, 50.0, 1.0, &intr).unwrap();
        assert!((p - Vec3::new(0.5, 0.0, 1.0)).norm() < 1e-12);
        assert!(backproject(10.0, 10.0, 0.0, &intr).is_err());
        assert!(backproject(10.0, 10.0, -1.0, &intr).is_err());
    }

    #[test]
    fn projection_roundtrip_random() {
        let intr = intr100();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = rng.random_range(0.0..100.0);
            let v = rng.random_range(0.0..100.0);
            let z = rng.random_range(0.1..20.0);
            let p = backproject(u, v, z, &intr).unwrap();
            let (u2, v2) = project(&p, &intr).unwrap();
            assert!((u - u2).abs() < 1e-6 && (v - v2).abs() < 1e-6);
            let p2 = backproject(u2, v2, p.z, &intr).unwrap();
            assert!((p - p2).norm() < 1e-6);
        }
    }

    #[test]
    fn transform_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&Pose::identity(), &p), p);
        let t = Pose::from_translation(Vec3::new(0.0, 0.0, 5.0));
        assert_eq!(transform_point(&t, &p), Vec3::new(1.0, 2.0, 8.0));
        let yaw = Pose::from_yaw(0.0, 0.0, 0.0, FRAC_PI_2);
        let q = transform_point(&yaw, &Vec3::new(1.0, 0.0, 0.0));
        assert!((q - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn pose_rejects_bad_rotation() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(skew, Vec3::zeros()).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(reflect, Vec3::zeros()).is_err());
        assert!(Pose::new(Matrix3::identity(), Vec3::zeros()).is_ok());
    }

    #[test]
    fn quaternion_roundtrip() {
        let pose = Pose::from_yaw(1.0, -2.0, 0.5, 2.3);
        let q = pose.quaternion();
        let back = Pose::from_quaternion(pose.translation(), q).unwrap();
        assert!((back.rotation() - pose.rotation()).abs().max() < 1e-12);
        assert!(Pose::from_quaternion(Vec3::zeros(), [0.0, 0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn voxel_key_examples() {
        assert_eq!(voxel_key_of(&Vec3::new(0.05, 0.05, 0.05), 0.1), VoxelKey::new(0, 0, 0));
        assert_eq!(voxel_key_of(&Vec3::new(-0.05, 0.05, 0.25), 0.1), VoxelKey::new(-1, 0, 2));
        assert_eq!(voxel_key_of(&Vec3::new(0.1, 0.1, 0.1), 0.1), VoxelKey::new(1, 1, 1));
    }

    #[test]
    fn voxel_center_examples_and_roundtrip() {
        let c = voxel_center(VoxelKey::new(0, 0, 0), 0.1);
        assert!((c - Vec3::new(0.05, 0.05, 0.05)).norm() < 1e-12);
        let c = voxel_center(VoxelKey::new(-1, 0, 2), 0.1);
        assert!((c - Vec3::new(-0.05, 0.05, 0.25)).norm() < 1e-12);
        for ix in -20..=20 {
            for iy in -20..=20 {
                for iz in -20..=20 {
                    let k = VoxelKey::new(ix, iy, iz);
                    assert_eq!(voxel_key_of(&voxel_center(k, 0.1), 0.1), k);
                }
            }
        }
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-1.0f64..1.0), 0.0f64..std::f64::consts::PI, prop::array::uniform3(-10.0f64..10.0))
            .prop_filter_map("degenerate axis", |(axis, angle, t)| {
                let axis = Vec3::from(axis);
                (axis.norm() > 1e-3).then(|| {
                    let rot = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
                    Pose::from_rotation(rot, Vec3::from(t))
                })
            })
    }

    proptest! {
        #[test]
        fn pose_inverse_is_identity(pose in arb_pose()) {
            let id = pose.compose(&pose.inverse());
            prop_assert!((id.rotation() - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!(id.translation().norm() < 1e-9);
        }

        #[test]
        fn pose_composition_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.rotation() - right.rotation()).abs().max() < 1e-9);
            prop_assert!((left.translation() - right.translation()).norm() < 1e-9);
        }

        #[test]
        fn voxel_key_translation_consistent(
            p in prop::array::uniform3(-50.0f64..50.0),
            shift in prop::array::uniform3(-30i32..30),
        ) {
            // Stay on a grid-aligned lattice so the shift is exact in binary.
            let size = 0.125;
            let p = Vec3::from(p);
            let k = voxel_key_of(&p, size);
            let moved = p + Vec3::new(f64::from(shift[0]), f64::from(shift[1]), f64::from(shift[2])) * size;
            prop_assert_eq!(voxel_key_of(&moved, size), k.offset(shift[0], shift[1], shift[2]));
        }
    }
}
