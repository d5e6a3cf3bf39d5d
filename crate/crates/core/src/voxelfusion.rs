//! Semantic voxel map with recursive Bayesian class and traversability
//! estimates.
//!
//! Each frame's pixels are backprojected and bucketed by voxel. A touched
//! voxel receives one class observation (majority argmax of its pixels) and
//! one traversability observation (bin of the mean predicted value), each
//! applied through a calibrated likelihood. Voxels that stay in view without
//! receiving points for `evict_after` consecutive frames are dropped.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{project, voxel_center, voxel_key_of, Vec3, VoxelKey};
use crate::world::{Class, Frame, VOID};

/// Smallest likelihood entry before renormalization.
pub const LIKELIHOOD_FLOOR: f64 = 1e-4;
const K: usize = Class::COUNT;

fn floor_normalize(row: &mut [f64]) {
    row.iter_mut().for_each(|v| *v = v.max(LIKELIHOOD_FLOOR));
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
}

/// `L[l][z] = P(observed class z | true class l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLikelihood {
    pub m: [[f64; K]; K],
}

impl ClassLikelihood {
    /// Floors and renormalizes each row of a nonnegative matrix.
    pub fn new(mut m: [[f64; K]; K]) -> Result<Self> {
        for row in &mut m {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("class likelihood entries must be finite and non-negative"));
            }
            floor_normalize(row);
        }
        Ok(Self { m })
    }

    pub fn uniform() -> Self {
        Self { m: [[1.0 / K as f64; K]; K] }
    }
}

/// `T[τ][b] = P(observation bin b | τ)` over equal-width bins on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TravLikelihood {
    pub t: [Vec<f64>; 2],
}

impl TravLikelihood {
    pub fn new(mut t: [Vec<f64>; 2]) -> Result<Self> {
        if t[0].is_empty() || t[0].len() != t[1].len() {
            return Err(Error::invalid("traversability likelihood rows must be non-empty and equally long"));
        }
        for row in &mut t {
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("traversability likelihood entries must be finite and non-negative"));
            }
            floor_normalize(row);
        }
        Ok(Self { t })
    }

    pub fn bins(&self) -> usize {
        self.t[0].len()
    }

    pub fn bin_of(&self, value: f64) -> usize {
        trav_bin(value, self.bins())
    }
}

/// Equal-width bin of a value in [0, 1]; 1.0 lands in the last bin.
pub fn trav_bin(value: f64, bins: usize) -> usize {
    ((value.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1)
}

/// Row-normalized confusion histogram of predicted classes per reference
/// class. Void reference pixels are skipped.
pub fn calibrate_class_likelihood(pred: &[Vec<u8>], reference: &[Vec<u8>]) -> Result<ClassLikelihood> {
    if pred.len() != reference.len() {
        return Err(Error::Shape(format!("{} predictions but {} references", pred.len(), reference.len())));
    }
    let mut counts = [[0.0f64; K]; K];
    for (p, r) in pred.iter().zip(reference) {
        if p.len() != r.len() {
            return Err(Error::Shape("prediction and reference images differ in size".into()));
        }
        for (&z, &l) in p.iter().zip(r) {
            if l == VOID || z as usize >= K {
                continue;
            }
            let l = l as usize;
            if l >= K {
                return Err(Error::invalid(format!("reference label {l} is not a class")));
            }
            counts[l][z as usize] += 1.0;
        }
    }
    for (l, row) in counts.iter_mut().enumerate() {
        let n: f64 = row.iter().sum();
        if n == 0.0 {
            return Err(Error::degenerate(format!("no reference pixels of class {}", Class::ALL[l].name())));
        }
        row.iter_mut().for_each(|v| *v /= n);
    }
    ClassLikelihood::new(counts)
}

/// Row-normalized histograms of predicted traversability for mask 0 and 1.
pub fn calibrate_trav_likelihood(pred: &[Vec<f64>], masks: &[Vec<u8>], bins: usize) -> Result<TravLikelihood> {
    if bins == 0 {
        return Err(Error::config("at least one traversability bin is required"));
    }
    if pred.len() != masks.len() {
        return Err(Error::Shape(format!("{} predictions but {} masks", pred.len(), masks.len())));
    }
    let mut t = [vec![0.0; bins], vec![0.0; bins]];
    for (p, m) in pred.iter().zip(masks) {
        if p.len() != m.len() {
            return Err(Error::Shape("prediction and mask images differ in size".into()));
        }
        for (&v, &tau) in p.iter().zip(m) {
            t[usize::from(tau != 0)][trav_bin(v, bins)] += 1.0;
        }
    }
    for (tau, row) in t.iter_mut().enumerate() {
        let n: f64 = row.iter().sum();
        if n == 0.0 {
            return Err(Error::degenerate(format!("no pixels with traversability label {tau}")));
        }
        row.iter_mut().for_each(|v| *v /= n);
    }
    TravLikelihood::new(t)
}

pub fn bayes_class_update(prior: &[f64; K], z: usize, lik: &ClassLikelihood) -> [f64; K] {
    let mut post = [0.0; K];
    for l in 0..K {
        post[l] = lik.m[l][z] * prior[l];
    }
    let eta: f64 = post.iter().sum();
    post.iter_mut().for_each(|v| *v /= eta);
    post
}

pub fn bayes_trav_update(q: f64, bin: usize, lik: &TravLikelihood) -> f64 {
    let a = lik.t[1][bin] * q;
    let b = lik.t[0][bin] * (1.0 - q);
    a / (a + b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelState {
    pub class_post: [f64; K],
    pub trav_post: f64,
    pub point_sum: Vec3,
    pub count: u64,
    /// Consecutive in-view frames without points.
    pub misses: u32,
    pub last_frame: u32,
}

impl VoxelState {
    pub fn centroid(&self) -> Vec3 {
        self.point_sum / self.count as f64
    }

    pub fn map_class(&self) -> Class {
        let mut best = 0;
        for l in 1..K {
            if self.class_post[l] > self.class_post[best] {
                best = l;
            }
        }
        Class::ALL[best]
    }

    pub fn is_free(&self, theta_free: f64) -> bool {
        self.map_class() == Class::Plant && self.trav_post > theta_free
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelMapConfig {
    pub voxel_size: f64,
    pub evict_after: u32,
    pub max_range: f64,
    pub class_prior: [f64; K],
    pub trav_prior: f64,
}

impl Default for VoxelMapConfig {
    fn default() -> Self {
        Self { voxel_size: 0.1, evict_after: 10, max_range: 5.0, class_prior: [1.0 / 3.0; 3], trav_prior: 0.5 }
    }
}

impl VoxelMapConfig {
    pub fn validate(&self) -> Result<()> {
        let prior_ok =
            self.class_prior.iter().all(|p| *p > 0.0) && (self.class_prior.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if !(self.voxel_size > 0.0) || self.evict_after < 1 || !(self.max_range > 0.0) {
            return Err(Error::config("voxel size and range must be positive and the eviction limit at least 1"));
        }
        if !prior_ok || !(0.0..=1.0).contains(&self.trav_prior) {
            return Err(Error::config("priors must be valid probabilities"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameReport {
    pub frame_id: u32,
    pub points: usize,
    pub touched: usize,
    pub created: usize,
    pub evicted: Vec<VoxelKey>,
    pub live: usize,
}

#[derive(Default)]
struct Bucket {
    class_votes: [u32; K],
    trav_sum: f64,
    n: u32,
    point_sum: Vec3,
}

#[derive(Debug, Clone)]
pub struct SemanticVoxelMap {
    pub config: VoxelMapConfig,
    pub class_lik: Option<ClassLikelihood>,
    pub trav_lik: Option<TravLikelihood>,
    pub voxels: BTreeMap<VoxelKey, VoxelState>,
}

impl SemanticVoxelMap {
    pub fn new(config: VoxelMapConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, class_lik: None, trav_lik: None, voxels: BTreeMap::new() })
    }

    pub fn calibrated(config: VoxelMapConfig, class_lik: ClassLikelihood, trav_lik: TravLikelihood) -> Result<Self> {
        let mut map = Self::new(config)?;
        map.class_lik = Some(class_lik);
        map.trav_lik = Some(trav_lik);
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn clear(&mut self) {
        self.voxels.clear();
    }

    /// Fuses one frame of semantic (argmax class) and traversability
    /// predictions.
    pub fn integrate_frame(&mut self, frame: &Frame, classes: &[u8], trav: &[f64]) -> Result<FrameReport> {
        let (cl, tl) = match (&self.class_lik, &self.trav_lik) {
            (Some(c), Some(t)) => (c.clone(), t.clone()),
            _ => return Err(Error::Uncalibrated),
        };
        let n = frame.pixel_count();
        if classes.len() != n || trav.len() != n {
            return Err(Error::Shape(format!("frame {} has {n} pixels but predictions differ", frame.frame_id)));
        }
        self.integrate(frame, Some((classes, trav)), |state, b| {
            let z = majority(&b.class_votes);
            state.class_post = bayes_class_update(&state.class_post, z, &cl);
            state.trav_post = bayes_trav_update(state.trav_post, tl.bin_of(b.trav_sum / f64::from(b.n)), &tl);
        })
    }

    /// Geometry-only fusion: voxels track points and eviction but keep
    /// their priors.
    pub fn integrate_geometry(&mut self, frame: &Frame) -> Result<FrameReport> {
        self.integrate(frame, None, |_, _| {})
    }

    fn integrate<F>(&mut self, frame: &Frame, preds: Option<(&[u8], &[f64])>, mut update: F) -> Result<FrameReport>
    where
        F: FnMut(&mut VoxelState, &Bucket),
    {
        let size = self.config.voxel_size;
        let mut buckets: BTreeMap<VoxelKey, Bucket> = BTreeMap::new();
        let mut points = 0;
        for i in 0..frame.pixel_count() {
            let Some(p) = frame.world_point(i) else {
                continue;
            };
            if !(f64::from(frame.depth[i]) <= self.config.max_range) {
                continue;
            }
            points += 1;
            let b = buckets.entry(voxel_key_of(&p, size)).or_default();
            b.n += 1;
            b.point_sum += p;
            if let Some((classes, trav)) = preds {
                let z = classes[i] as usize;
                if z < K {
                    b.class_votes[z] += 1;
                }
                b.trav_sum += trav[i];
            }
        }
        let mut report = FrameReport { frame_id: frame.frame_id, points, touched: buckets.len(), ..Default::default() };
        for (key, b) in &buckets {
            let state = self.voxels.entry(*key).or_insert_with(|| {
                report.created += 1;
                VoxelState {
                    class_post: self.config.class_prior,
                    trav_post: self.config.trav_prior,
                    point_sum: Vec3::zeros(),
                    count: 0,
                    misses: 0,
                    last_frame: frame.frame_id,
                }
            });
            update(state, b);
            state.point_sum += b.point_sum;
            state.count += u64::from(b.n);
            state.misses = 0;
            state.last_frame = frame.frame_id;
        }
        let world_to_cam = frame.pose.inverse();
        let limit = self.config.evict_after;
        let range = self.config.max_range;
        for (key, state) in self.voxels.iter_mut() {
            if buckets.contains_key(key) {
                continue;
            }
            let c = world_to_cam.transform_point(&voxel_center(*key, size));
            if c.z > 0.0 && c.z <= range && project(&c, &frame.intrinsics).is_some() {
                state.misses += 1;
                if state.misses >= limit {
                    report.evicted.push(*key);
                }
            }
        }
        for key in &report.evicted {
            self.voxels.remove(key);
        }
        report.live = self.voxels.len();
        Ok(report)
    }

    /// Centroids of voxels that are not free space.
    pub fn obstacle_cloud(&self, theta_free: f64) -> Vec<Vec3> {
        self.voxels.values().filter(|s| !s.is_free(theta_free)).map(VoxelState::centroid).collect()
    }

    /// Centroids of every live voxel.
    pub fn all_centroids(&self) -> Vec<Vec3> {
        self.voxels.values().map(VoxelState::centroid).collect()
    }

    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("ix,iy,iz,p_plant,p_artificial,p_ground,q,cx,cy,cz,count,misses\n");
        for (k, s) in &self.voxels {
            let c = s.centroid();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                k.ix,
                k.iy,
                k.iz,
                s.class_post[0],
                s.class_post[1],
                s.class_post[2],
                s.trav_post,
                c.x,
                c.y,
                c.z,
                s.count,
                s.misses
            ));
        }
        out
    }
}

/// Most frequent class; ties go to the lowest index.
fn majority(votes: &[u32; K]) -> usize {
    let mut best = 0;
    for l in 1..K {
        if votes[l] > votes[best] {
            best = l;
        }
    }
    best
}

pub fn cloud_csv(points: &[Vec3]) -> String {
    let mut out = String::from("x,y,z\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.x, p.y, p.z));
    }
    out
}
