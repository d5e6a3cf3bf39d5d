//! Deterministic synthetic greenhouse.
//!
//! Plant rows run along +x at `y = k · row_spacing`. Corridor `k` lies between
//! rows `k` and `k + 1`. Each row holds rigid stems, traversable foliage blobs
//! confined to the row envelope, a low planter trough and end posts. Foliage
//! that grows out into a corridor is placed per corridor segment with
//! probability `overhang_fraction`.

mod render;
pub mod shapes;
mod trajectory;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use render::{render_frame, CameraMount, Frame};
pub use shapes::{AaBox, Cylinder, PlanarBox, Shape, Sphere};
pub use trajectory::{script_trajectory, PathSpec};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Vec3};
use crate::seed::rng_for;
use crate::travmask::RobotFootprint;

/// Semantic classes, in the index order used by every classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Class {
    Plant = 0,
    Artificial = 1,
    Ground = 2,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Plant, Class::Artificial, Class::Ground];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Class::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Plant => "plant",
            Class::Artificial => "artificial",
            Class::Ground => "ground",
        }
    }
}

/// Label code for pixels without a return.
pub const VOID: u8 = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub row_count: usize,
    pub row_length: f64,
    pub row_spacing: f64,
    /// Clear width between the envelopes of neighbouring rows.
    pub path_width: f64,
    pub overhang_fraction: f64,
    pub overhang_segment: f64,
    pub overhang_radius: f64,
    pub stem_spacing: f64,
    pub stem_radius: (f64, f64),
    pub stem_height: f64,
    pub foliage_per_meter: f64,
    pub foliage_radius: (f64, f64),
    pub feature_dim: usize,
    pub feature_sigma: f64,
    /// Distance between the traversable-foliage and stem feature means.
    pub feature_separation: f64,
    /// Pairwise distance between the plant, artificial and ground means.
    pub class_separation: f64,
    pub intrinsics: CameraIntrinsics,
    pub max_range: f64,
    /// Closer hits return no depth.
    pub min_range: f64,
    pub label_flip_rate: f64,
    pub label_void_rate: f64,
    pub robot: RobotFootprint,
    /// Height of the robot body above the ground; the footprint box starts here.
    pub ground_clearance: f64,
    pub mount: CameraMount,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            row_count: 4,
            row_length: 7.5,
            row_spacing: 1.6,
            path_width: 0.8,
            overhang_fraction: 0.5,
            overhang_segment: 0.5,
            overhang_radius: 0.3,
            stem_spacing: 0.5,
            stem_radius: (0.05, 0.08),
            stem_height: 1.6,
            foliage_per_meter: 3.0,
            foliage_radius: (0.12, 0.3),
            feature_dim: 8,
            feature_sigma: 1.0,
            feature_separation: 2.0,
            class_separation: 6.0,
            intrinsics: CameraIntrinsics { fx: 48.0, fy: 48.0, cx: 32.0, cy: 24.0, width: 64, height: 48 },
            max_range: 5.0,
            min_range: 0.3,
            label_flip_rate: 0.1,
            label_void_rate: 0.05,
            robot: RobotFootprint { length: 0.6, width: 0.4, height: 1.0 },
            ground_clearance: 0.1,
            mount: CameraMount { forward: 0.3, height: 0.6, pitch_deg: 15.0 },
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if !(0.0..=1.0).contains(&self.overhang_fraction) {
            return bad("overhang_fraction must lie in [0, 1]");
        }
        if !(self.feature_separation >= 0.0) || !(self.class_separation >= 0.0) {
            return bad("feature separations must be non-negative");
        }
        if self.feature_dim < 4 {
            return bad("feature_dim must be at least 4");
        }
        if !(self.feature_sigma > 0.0) {
            return bad("feature_sigma must be positive");
        }
        if self.row_count < 2 {
            return bad("at least two rows are needed to form a corridor");
        }
        if !(self.row_length >= 0.0) {
            return bad("row_length must be non-negative");
        }
        self.robot.validate()?;
        if self.path_width <= self.robot.width {
            return Err(Error::config(format!(
                "path width {} must exceed robot width {}",
                self.path_width, self.robot.width
            )));
        }
        if self.path_width >= self.row_spacing {
            return bad("path_width must be smaller than row_spacing");
        }
        let half_env = self.row_envelope_half_width();
        if self.stem_radius.1 + 0.05 > half_env || self.foliage_radius.1 > half_env {
            return bad("stems and foliage must fit inside the row envelope");
        }
        if !(self.stem_radius.0 > 0.0 && self.stem_radius.0 <= self.stem_radius.1) {
            return bad("invalid stem radius range");
        }
        if !(self.foliage_radius.0 > 0.0 && self.foliage_radius.0 <= self.foliage_radius.1) {
            return bad("invalid foliage radius range");
        }
        if !(self.stem_spacing > 0.0 && self.overhang_segment > 0.0 && self.overhang_radius > 0.0) {
            return bad("spacings and overhang radius must be positive");
        }
        if !(self.max_range > 0.0) || !(0.0..self.max_range).contains(&self.min_range) {
            return bad("sensor range must satisfy 0 <= min_range < max_range");
        }
        if !(self.label_flip_rate >= 0.0 && self.label_void_rate >= 0.0)
            || self.label_flip_rate + self.label_void_rate >= 1.0
        {
            return bad("label noise rates must be non-negative and sum below 1");
        }
        self.intrinsics.validate().map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }

    pub fn row_envelope_half_width(&self) -> f64 {
        (self.row_spacing - self.path_width) / 2.0
    }

    pub fn corridor_count(&self) -> usize {
        self.row_count.saturating_sub(1)
    }

    pub fn corridor_y(&self, corridor: usize) -> f64 {
        (corridor as f64 + 0.5) * self.row_spacing
    }
}

/// Class-conditional Gaussian appearance model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub dim: usize,
    pub sigma: f64,
    pub foliage: Vec<f64>,
    pub stem: Vec<f64>,
    pub artificial: Vec<f64>,
    pub ground: Vec<f64>,
    pub void: Vec<f64>,
}

impl FeatureModel {
    /// Class means sit on the first three axes at pairwise distance
    /// `class_separation`; foliage and stem straddle the plant mean along
    /// the fourth axis at distance `feature_separation`.
    pub fn new(dim: usize, sigma: f64, class_separation: f64, feature_separation: f64) -> Self {
        let axis = |i: usize, scale: f64| {
            let mut v = vec![0.0; dim];
            v[i] = scale;
            v
        };
        let s = class_separation / std::f64::consts::SQRT_2;
        let mut foliage = axis(0, s);
        let mut stem = axis(0, s);
        foliage[3] = feature_separation / 2.0;
        stem[3] = -feature_separation / 2.0;
        Self { dim, sigma, foliage, stem, artificial: axis(1, s), ground: axis(2, s), void: vec![0.0; dim] }
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self::new(cfg.feature_dim, cfg.feature_sigma, cfg.class_separation, cfg.feature_separation)
    }

    pub fn mean(&self, class: Option<Class>, traversable: bool) -> &[f64] {
        match class {
            None => &self.void,
            Some(Class::Plant) if traversable => &self.foliage,
            Some(Class::Plant) => &self.stem,
            Some(Class::Artificial) => &self.artificial,
            Some(Class::Ground) => &self.ground,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub class: Class,
    pub traversable: bool,
}

impl Primitive {
    pub fn is_rigid(&self) -> bool {
        !self.traversable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldBounds {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone)]
pub struct WorldModel {
    pub config: ScenarioConfig,
    pub features: FeatureModel,
    pub primitives: Vec<Primitive>,
    pub bounds: WorldBounds,
}

impl WorldModel {
    pub fn corridor_count(&self) -> usize {
        self.config.corridor_count()
    }

    pub fn corridor_y(&self, corridor: usize) -> Result<f64> {
        if corridor >= self.corridor_count() {
            return Err(Error::UnknownCorridor { id: corridor, count: self.corridor_count() });
        }
        Ok(self.config.corridor_y(corridor))
    }

    /// Whether any foliage blob intersects the corridor's robot-sized
    /// cross-section (robot width × robot height, centered on the corridor
    /// centerline) at longitudinal position `x`.
    pub fn corridor_blocked_at(&self, corridor: usize, x: f64) -> Result<bool> {
        let yc = self.corridor_y(corridor)?;
        let half = self.config.robot.width / 2.0;
        Ok(self.foliage_intersects_section(x, yc - half, yc + half, 0.0, self.config.robot.height))
    }

    /// Whether foliage enters the full clear path (path width × robot height)
    /// anywhere along the corridor.
    pub fn foliage_in_corridor(&self, corridor: usize) -> Result<bool> {
        let yc = self.corridor_y(corridor)?;
        let half = self.config.path_width / 2.0;
        let (y0, y1, z1) = (yc - half, yc + half, self.config.robot.height);
        Ok(self.primitives.iter().any(|p| match p.shape {
            Shape::Sphere(s) if p.traversable => {
                let dy = (y0 - s.center.y).max(0.0).max(s.center.y - y1);
                let dz = (0.0 - s.center.z).max(0.0).max(s.center.z - z1);
                let dx = (0.0 - s.center.x).max(0.0).max(s.center.x - self.config.row_length);
                dx * dx + dy * dy + dz * dz < s.radius * s.radius
            }
            _ => false,
        }))
    }

    fn foliage_intersects_section(&self, x: f64, y0: f64, y1: f64, z0: f64, z1: f64) -> bool {
        self.primitives.iter().any(|p| match p.shape {
            Shape::Sphere(s) if p.traversable => {
                let dx = x - s.center.x;
                let r2 = s.radius * s.radius - dx * dx;
                if r2 <= 0.0 {
                    return false;
                }
                let dy = (y0 - s.center.y).max(0.0).max(s.center.y - y1);
                let dz = (z0 - s.center.z).max(0.0).max(s.center.z - z1);
                dy * dy + dz * dz < r2
            }
            _ => false,
        })
    }

    /// Adds a rigid artificial wall across a corridor at longitudinal
    /// position `x` (0.2 m thick, spanning the clear path, 1.2 m tall).
    pub fn add_wall(&mut self, corridor: usize, x: f64) -> Result<()> {
        let yc = self.corridor_y(corridor)?;
        let half = self.config.path_width / 2.0;
        self.primitives.push(Primitive {
            shape: Shape::Box(AaBox { min: Vec3::new(x, yc - half, 0.0), max: Vec3::new(x + 0.2, yc + half, 1.2) }),
            class: Class::Artificial,
            traversable: false,
        });
        Ok(())
    }
}

pub fn build_world(cfg: &ScenarioConfig) -> Result<WorldModel> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, "world");
    let mut primitives = Vec::new();
    let half_env = cfg.row_envelope_half_width();
    let len = cfg.row_length;

    for row in 0..cfg.row_count {
        let yr = row as f64 * cfg.row_spacing;
        primitives.push(Primitive {
            shape: Shape::Box(AaBox {
                min: Vec3::new(0.0, yr - half_env / 2.0, 0.0),
                max: Vec3::new(len, yr + half_env / 2.0, 0.15),
            }),
            class: Class::Artificial,
            traversable: false,
        });
        for x0 in [-0.3, len + 0.1] {
            primitives.push(Primitive {
                shape: Shape::Box(AaBox { min: Vec3::new(x0, yr - 0.1, 0.0), max: Vec3::new(x0 + 0.2, yr + 0.1, 1.8) }),
                class: Class::Artificial,
                traversable: false,
            });
        }
        let mut x = cfg.stem_spacing / 2.0;
        while x < len {
            let radius = uniform(&mut rng, cfg.stem_radius);
            let jitter = rng.random_range(-0.05..=0.05);
            primitives.push(Primitive {
                shape: Shape::Cylinder(Cylinder { x, y: yr + jitter, radius, height: cfg.stem_height }),
                class: Class::Plant,
                traversable: false,
            });
            x += cfg.stem_spacing;
        }
        let blobs = (cfg.foliage_per_meter * len).round() as usize;
        for _ in 0..blobs {
            let radius = uniform(&mut rng, cfg.foliage_radius);
            let reach = half_env - radius;
            let center = Vec3::new(
                rng.random_range(0.0..=len),
                yr + rng.random_range(-reach..=reach),
                rng.random_range(0.3..=cfg.stem_height),
            );
            primitives.push(foliage(center, radius));
        }
    }

    // Overhanging foliage: one blob per selected corridor segment, leaning in
    // from either row so that only part of it intrudes into the robot band.
    let seg = cfg.overhang_segment;
    let radius = cfg.overhang_radius;
    let segments = (len / seg).floor() as usize;
    let band = cfg.robot.width / 2.0;
    let (inner, outer) = (band, band + 0.6 * radius);
    let z_hi = (cfg.robot.height - 0.2).max(0.45);
    for corridor in 0..cfg.corridor_count() {
        let yc = cfg.corridor_y(corridor);
        for k in 0..segments {
            if rng.random::<f64>() < cfg.overhang_fraction {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let center = Vec3::new(
                    (k as f64 + 0.5) * seg,
                    yc + side * rng.random_range(inner..=outer),
                    rng.random_range(0.45..=z_hi),
                );
                primitives.push(foliage(center, radius));
            }
        }
    }

    let bounds = WorldBounds {
        min: Vec3::new(-1.0, -cfg.row_spacing, 0.0),
        max: Vec3::new(len + 1.0, cfg.row_count as f64 * cfg.row_spacing, cfg.stem_height + 1.0),
    };
    Ok(WorldModel { config: cfg.clone(), features: FeatureModel::from_config(cfg), primitives, bounds })
}

fn foliage(center: Vec3, radius: f64) -> Primitive {
    Primitive { shape: Shape::Sphere(Sphere { center, radius }), class: Class::Plant, traversable: true }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}
