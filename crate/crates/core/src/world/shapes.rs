//! Analytic primitives and closed-form ray intersection.

use crate::geometry::Vec3;

/// Smallest accepted ray parameter; avoids self-hits at the origin.
pub const RAY_EPS: f64 = 1e-9;

/// Vertical cylinder standing on the ground, capped at the top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AaBox {
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Cylinder(Cylinder),
    Sphere(Sphere),
    Box(AaBox),
}

impl Shape {
    /// Nearest hit parameter `t > RAY_EPS` along `origin + t·dir`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Shape::Cylinder(c) => c.intersect(origin, dir),
            Shape::Sphere(s) => s.intersect(origin, dir),
            Shape::Box(b) => b.intersect(origin, dir),
        }
    }

    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        match self {
            Shape::Cylinder(c) => {
                let half = c.height / 2.0;
                (Vec3::new(c.x, c.y, half), (c.radius * c.radius + half * half).sqrt())
            }
            Shape::Sphere(s) => (s.center, s.radius),
            Shape::Box(b) => ((b.min + b.max) / 2.0, (b.max - b.min).norm() / 2.0),
        }
    }

    pub fn aabb(&self) -> AaBox {
        match self {
            Shape::Cylinder(c) => AaBox {
                min: Vec3::new(c.x - c.radius, c.y - c.radius, 0.0),
                max: Vec3::new(c.x + c.radius, c.y + c.radius, c.height),
            },
            Shape::Sphere(s) => {
                let r = Vec3::repeat(s.radius);
                AaBox { min: s.center - r, max: s.center + r }
            }
            Shape::Box(b) => *b,
        }
    }

    /// Whether the shape overlaps an oriented footprint rectangle (planar
    /// pose `x, y, yaw`, half extents) in the z range `[z0, z1]`.
    pub fn overlaps_footprint(&self, fp: &PlanarBox) -> bool {
        match self {
            Shape::Cylinder(c) => {
                if fp.z1 < 0.0 || fp.z0 > c.height {
                    return false;
                }
                let (lx, ly) = fp.to_local(c.x, c.y);
                let dx = (lx.abs() - fp.half_length).max(0.0);
                let dy = (ly.abs() - fp.half_width).max(0.0);
                dx * dx + dy * dy < c.radius * c.radius
            }
            Shape::Sphere(s) => {
                let dz = if s.center.z < fp.z0 {
                    fp.z0 - s.center.z
                } else if s.center.z > fp.z1 {
                    s.center.z - fp.z1
                } else {
                    0.0
                };
                let (lx, ly) = fp.to_local(s.center.x, s.center.y);
                let dx = (lx.abs() - fp.half_length).max(0.0);
                let dy = (ly.abs() - fp.half_width).max(0.0);
                dx * dx + dy * dy + dz * dz < s.radius * s.radius
            }
            Shape::Box(b) => {
                if fp.z1 <= b.min.z || fp.z0 >= b.max.z {
                    return false;
                }
                fp.overlaps_aabb_xy(b.min.x, b.min.y, b.max.x, b.max.y)
            }
        }
    }
}

/// Oriented rectangle in the xy plane extruded over `[z0, z1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarBox {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub z0: f64,
    pub z1: f64,
}

impl PlanarBox {
    fn to_local(self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let mut out = [(0.0, 0.0); 4];
        for (i, (sx, sy)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)].iter().enumerate() {
            let lx = sx * self.half_length;
            let ly = sy * self.half_width;
            out[i] = (self.x + c * lx - s * ly, self.y + s * lx + c * ly);
        }
        out
    }

    /// Separating-axis test against an axis-aligned rectangle.
    fn overlaps_aabb_xy(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
        let corners = self.corners();
        let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(cx, cy) in &corners {
            min_x = min_x.min(cx);
            max_x = max_x.max(cx);
            min_y = min_y.min(cy);
            max_y = max_y.max(cy);
        }
        if max_x <= x0 || min_x >= x1 || max_y <= y0 || min_y >= y1 {
            return false;
        }
        let rect = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
        let (s, c) = self.yaw.sin_cos();
        for (axis, half) in [((c, s), self.half_length), ((-s, c), self.half_width)] {
            let center = axis.0 * self.x + axis.1 * self.y;
            let (mut lo, mut hi) = (f64::MAX, f64::MIN);
            for &(px, py) in &rect {
                let p = axis.0 * px + axis.1 * py;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            if hi <= center - half || lo >= center + half {
                return false;
            }
        }
        true
    }
}

impl Cylinder {
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut keep = |t: f64| {
            if t > RAY_EPS && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        let ox = o.x - self.x;
        let oy = o.y - self.y;
        let a = d.x * d.x + d.y * d.y;
        if a > 0.0 {
            let b = 2.0 * (ox * d.x + oy * d.y);
            let c = ox * ox + oy * oy - self.radius * self.radius;
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                    let z = o.z + t * d.z;
                    if (0.0..=self.height).contains(&z) {
                        keep(t);
                    }
                }
            }
        }
        if d.z != 0.0 {
            let t = (self.height - o.z) / d.z;
            let px = ox + t * d.x;
            let py = oy + t * d.y;
            if px * px + py * py <= self.radius * self.radius {
                keep(t);
            }
        }
        best
    }
}

impl Sphere {
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let oc = o - self.center;
        let a = d.dot(d);
        let b = 2.0 * oc.dot(d);
        let c = oc.dot(&oc) - self.radius * self.radius;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        let t0 = (-b - sq) / (2.0 * a);
        let t1 = (-b + sq) / (2.0 * a);
        if t0 > RAY_EPS {
            Some(t0)
        } else if t1 > RAY_EPS {
            Some(t1)
        } else {
            None
        }
    }
}

impl AaBox {
    pub fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for axis in 0..3 {
            if d[axis] == 0.0 {
                if o[axis] < self.min[axis] || o[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let mut t0 = (self.min[axis] - o[axis]) * inv;
            let mut t1 = (self.max[axis] - o[axis]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
        }
        if t_near > t_far {
            return None;
        }
        if t_near > RAY_EPS {
            Some(t_near)
        } else if t_far > RAY_EPS {
            Some(t_far)
        } else {
            None
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Ground plane `z = 0`, visible from above.
pub fn intersect_ground(o: &Vec3, d: &Vec3) -> Option<f64> {
    if d.z >= 0.0 {
        return None;
    }
    let t = -o.z / d.z;
    (t > RAY_EPS).then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_hit_from_outside_and_inside() {
        let s = Sphere { center: Vec3::new(5.0, 0.0, 1.0), radius: 1.0 };
        let o = Vec3::new(0.0, 0.0, 1.0);
        let t = s.intersect(&o, &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        let inside = Vec3::new(5.0, 0.0, 1.0);
        let t = s.intersect(&inside, &Vec3::new(0.0, 2.0, 0.0)).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        assert!(s.intersect(&o, &Vec3::new(-1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn cylinder_side_and_cap() {
        let c = Cylinder { x: 3.0, y: 0.0, radius: 0.5, height: 2.0 };
        let t = c.intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        // Passes above the top.
        assert!(c.intersect(&Vec3::new(0.0, 0.0, 3.0), &Vec3::new(1.0, 0.0, 0.0)).is_none());
        // Straight down onto the cap.
        let t = c.intersect(&Vec3::new(3.1, 0.0, 5.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_slab() {
        let b = AaBox { min: Vec3::new(2.0, -1.0, 0.0), max: Vec3::new(3.0, 1.0, 1.0) };
        let t = b.intersect(&Vec3::new(0.0, 0.0, 0.5), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(b.intersect(&Vec3::new(0.0, 2.0, 0.5), &Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn ground_plane() {
        let t = intersect_ground(&Vec3::new(0.0, 0.0, 2.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(t, 2.0);
        assert!(intersect_ground(&Vec3::new(0.0, 0.0, 2.0), &Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn footprint_overlap() {
        let fp = PlanarBox { x: 0.0, y: 0.0, yaw: 0.0, half_length: 0.3, half_width: 0.2, z0: 0.1, z1: 1.1 };
        let near = Shape::Cylinder(Cylinder { x: 0.35, y: 0.0, radius: 0.1, height: 1.0 });
        let far = Shape::Cylinder(Cylinder { x: 0.45, y: 0.0, radius: 0.1, height: 1.0 });
        assert!(near.overlaps_footprint(&fp));
        assert!(!far.overlaps_footprint(&fp));
        let wall = Shape::Box(AaBox { min: Vec3::new(0.25, -2.0, 0.0), max: Vec3::new(0.5, 2.0, 1.0) });
        assert!(wall.overlaps_footprint(&fp));
        let rotated = PlanarBox { yaw: std::f64::consts::FRAC_PI_2, ..fp };
        // Rotated by 90° the footprint only reaches 0.2 along x.
        assert!(!wall.overlaps_footprint(&rotated));
        let low = Shape::Box(AaBox { min: Vec3::new(-1.0, -1.0, 0.0), max: Vec3::new(1.0, 1.0, 0.05) });
        assert!(!low.overlaps_footprint(&fp));
    }
}
