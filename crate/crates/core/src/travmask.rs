//! Traversability masks from robot traversals.
//!
//! The robot's rectangular envelope is swept along the trajectory through a
//! voxel grid; every voxel whose center falls inside the envelope at some
//! pose is marked traversed. Each frame's mask is then the set of pixels
//! whose depth-backprojected point lands in a traversed voxel, so occluders
//! in front of a traversed region are left unlabeled.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geometry::{voxel_center, voxel_key_of, Pose, Vec3, VoxelKey};
use crate::world::Frame;

/// Rectangular robot envelope in the robot frame:
/// `x ∈ [-L/2, L/2]`, `y ∈ [-W/2, W/2]`, `z ∈ [0, H]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotFootprint {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl RobotFootprint {
    pub fn validate(&self) -> Result<()> {
        if self.length > 0.0 && self.width > 0.0 && self.height > 0.0 {
            Ok(())
        } else {
            Err(Error::config("robot footprint dimensions must be positive"))
        }
    }

    pub fn contains_local(&self, p: &Vec3) -> bool {
        p.x.abs() <= self.length / 2.0 && p.y.abs() <= self.width / 2.0 && p.z >= 0.0 && p.z <= self.height
    }

    fn local_corners(&self) -> [Vec3; 8] {
        let (hx, hy, h) = (self.length / 2.0, self.width / 2.0, self.height);
        let mut out = [Vec3::zeros(); 8];
        let mut i = 0;
        for x in [-hx, hx] {
            for y in [-hy, hy] {
                for z in [0.0, h] {
                    out[i] = Vec3::new(x, y, z);
                    i += 1;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraversedVoxelSet {
    pub voxel_size: f64,
    pub keys: BTreeSet<VoxelKey>,
}

impl TraversedVoxelSet {
    pub fn new(voxel_size: f64) -> Self {
        Self { voxel_size, keys: BTreeSet::new() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.keys.contains(&voxel_key_of(p, self.voxel_size))
    }

    /// `ix,iy,iz` lines with a header, in key order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ix,iy,iz\n");
        for k in &self.keys {
            out.push_str(&format!("{},{},{}\n", k.ix, k.iy, k.iz));
        }
        out
    }
}

/// Union over poses of the voxels whose centers lie inside the footprint.
pub fn sweep_traversed_voxels(trajectory: &[Pose], fp: &RobotFootprint, voxel_size: f64) -> Result<TraversedVoxelSet> {
    if trajectory.is_empty() {
        return Err(Error::invalid("trajectory is empty"));
    }
    if !(voxel_size > 0.0) {
        return Err(Error::invalid("voxel size must be positive"));
    }
    fp.validate()?;
    let mut set = TraversedVoxelSet::new(voxel_size);
    for pose in trajectory {
        let inv = pose.inverse();
        let corners = fp.local_corners().map(|c| pose.transform_point(&c));
        let mut lo = corners[0];
        let mut hi = corners[0];
        for c in &corners[1..] {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        let kl = voxel_key_of(&lo, voxel_size);
        let kh = voxel_key_of(&hi, voxel_size);
        for ix in kl.ix..=kh.ix {
            for iy in kl.iy..=kh.iy {
                for iz in kl.iz..=kh.iz {
                    let key = VoxelKey::new(ix, iy, iz);
                    let local = inv.transform_point(&voxel_center(key, voxel_size));
                    if fp.contains_local(&local) {
                        set.keys.insert(key);
                    }
                }
            }
        }
    }
    Ok(set)
}

/// Binary mask (row-major, 0/1): 1 where the pixel's backprojected point
/// falls in a traversed voxel. Pixels without depth are 0.
pub fn render_traversability_mask(frame: &Frame, tv: &TraversedVoxelSet) -> Vec<u8> {
    (0..frame.pixel_count())
        .map(|i| match frame.world_point(i) {
            Some(p) if tv.contains_point(&p) => 1,
            _ => 0,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct MaskDataset {
    pub swept: TraversedVoxelSet,
    pub masks: Vec<Vec<u8>>,
    pub labeled_pixels: usize,
    pub gt_traversable_pixels: usize,
}

impl MaskDataset {
    /// Labeled pixels over ground-truth traversable pixels (0 if there are none).
    pub fn coverage(&self) -> f64 {
        if self.gt_traversable_pixels == 0 {
            0.0
        } else {
            self.labeled_pixels as f64 / self.gt_traversable_pixels as f64
        }
    }
}

pub fn build_mask_dataset(
    frames: &[Frame],
    trajectory: &[Pose],
    fp: &RobotFootprint,
    voxel_size: f64,
) -> Result<MaskDataset> {
    let swept = sweep_traversed_voxels(trajectory, fp, voxel_size)?;
    let masks: Vec<Vec<u8>> = frames.iter().map(|f| render_traversability_mask(f, &swept)).collect();
    let labeled_pixels = masks.iter().flatten().filter(|&&m| m == 1).count();
    let gt_traversable_pixels = frames.iter().flat_map(|f| &f.gt_trav).filter(|&&t| t == 1).count();
    Ok(MaskDataset { swept, masks, labeled_pixels, gt_traversable_pixels })
}

#[cfg(test)]
mod tests {
    use nalgebra::Matrix3;

    use super::*;
    use crate::geometry::CameraIntrinsics;

    const FP: RobotFootprint = RobotFootprint { length: 0.6, width: 0.4, height: 1.0 };

    /// Brute-force oracle: scan a generous key box and test each center
    /// against every pose directly.
    fn oracle(trajectory: &[Pose], fp: &RobotFootprint, size: f64) -> BTreeSet<VoxelKey> {
        let mut out = BTreeSet::new();
        for ix in -40..140 {
            for iy in -40..40 {
                for iz in -5..25 {
                    let key = VoxelKey::new(ix, iy, iz);
                    let c = voxel_center(key, size);
                    let x = c.x;
                    for pose in trajectory {
                        let t = pose.translation();
                        let yaw = pose.yaw();
                        let (s, co) = yaw.sin_cos();
                        let (dx, dy, dz) = (x - t.x, c.y - t.y, c.z - t.z);
                        let lx = co * dx + s * dy;
                        let ly = -s * dx + co * dy;
                        if lx.abs() <= fp.length / 2.0 && ly.abs() <= fp.width / 2.0 && dz >= 0.0 && dz <= fp.height {
                            out.insert(key);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn single_pose_box() {
        let set = sweep_traversed_voxels(&[Pose::identity()], &FP, 0.1).unwrap();
        assert_eq!(set.len(), 240);
        assert_eq!(set.keys, oracle(&[Pose::identity()], &FP, 0.1));
        for k in &set.keys {
            let c = voxel_center(*k, 0.1);
            assert!(c.x.abs() < 0.3 && c.y.abs() < 0.2 && c.z >= 0.0 && c.z < 1.0);
        }
    }

    #[test]
    fn duplicate_pose_idempotent() {
        let one = sweep_traversed_voxels(&[Pose::identity()], &FP, 0.1).unwrap();
        let two = sweep_traversed_voxels(&[Pose::identity(), Pose::identity()], &FP, 0.1).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn disjoint_poses() {
        let poses = [Pose::identity(), Pose::from_yaw(10.0, 0.0, 0.0, 0.0)];
        let set = sweep_traversed_voxels(&poses, &FP, 0.1).unwrap();
        assert_eq!(set.len(), 480);
    }

    #[test]
    fn rotated_trajectory_matches_oracle() {
        let poses: Vec<Pose> =
            (0..12).map(|k| Pose::from_yaw(0.35 * k as f64, 0.1 * k as f64, 0.1, 0.2 * k as f64)).collect();
        let set = sweep_traversed_voxels(&poses, &FP, 0.1).unwrap();
        assert_eq!(set.keys, oracle(&poses, &FP, 0.1));
        let mut reversed = poses.clone();
        reversed.reverse();
        assert_eq!(sweep_traversed_voxels(&reversed, &FP, 0.1).unwrap(), set);
    }

    #[test]
    fn empty_trajectory_rejected() {
        assert!(sweep_traversed_voxels(&[], &FP, 0.1).is_err());
    }

    /// Frame looking along +x from the origin at a wall of uniform depth.
    fn wall_frame(depth: f32) -> Frame {
        let intr = CameraIntrinsics::new(20.0, 20.0, 10.0, 8.0, 20, 16).unwrap();
        // Optical z -> +x, optical x -> -y, optical y -> -z.
        let rot = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let pose = Pose::new(rot, Vec3::new(0.0, 0.0, 0.5)).unwrap();
        let n = intr.pixel_count();
        Frame {
            frame_id: 0,
            intrinsics: intr,
            feature_dim: 1,
            features: vec![0.0; n],
            depth: vec![depth; n],
            pose,
            gt_class: vec![0; n],
            gt_trav: vec![1; n],
        }
    }

    #[test]
    fn empty_set_gives_zero_mask() {
        let frame = wall_frame(1.0);
        let mask = render_traversability_mask(&frame, &TraversedVoxelSet::new(0.1));
        assert!(mask.iter().all(|&m| m == 0));
    }

    #[test]
    fn traversed_block_per_pixel_oracle() {
        let frame = wall_frame(1.0);
        let mut tv = TraversedVoxelSet::new(0.1);
        // Block covering x in [1.0, 1.1), y in [-0.3, 0.3), z in [0.2, 0.8).
        for iy in -3..3 {
            for iz in 2..8 {
                tv.keys.insert(VoxelKey::new(10, iy, iz));
            }
        }
        let mask = render_traversability_mask(&frame, &tv);
        let mut ones = 0;
        for (i, &m) in mask.iter().enumerate() {
            let u = (i % 20) as f64 + 0.5;
            let v = (i / 20) as f64 + 0.5;
            let p = crate::geometry::backproject(u, v, 1.0, &frame.intrinsics).unwrap();
            let w = frame.pose.transform_point(&p);
            let expected = tv.keys.contains(&voxel_key_of(&w, 0.1));
            assert_eq!(m == 1, expected);
            ones += usize::from(m);
        }
        assert!(ones > 0 && ones < mask.len());
    }

    #[test]
    fn occluder_in_front_is_unlabeled() {
        // The traversed block sits at x = 2 m but the depth says the surface
        // is 1 m away (an occluder), so nothing gets labeled.
        let frame = wall_frame(1.0);
        let mut tv = TraversedVoxelSet::new(0.1);
        for iy in -5..5 {
            for iz in 0..10 {
                tv.keys.insert(VoxelKey::new(20, iy, iz));
            }
        }
        assert!(render_traversability_mask(&frame, &tv).iter().all(|&m| m == 0));
        let mut no_return = wall_frame(0.0);
        no_return.depth.iter_mut().for_each(|d| *d = 0.0);
        assert!(render_traversability_mask(&no_return, &tv).iter().all(|&m| m == 0));
    }

    #[test]
    fn csv_dump() {
        let mut tv = TraversedVoxelSet::new(0.1);
        tv.keys.insert(VoxelKey::new(1, -2, 3));
        assert_eq!(tv.to_csv(), "ix,iy,iz\n1,-2,3\n");
    }
}
