use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{wrap_angle, Cmd, RobotState};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Grid cell as (column, row); column grows with x, row with y.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostmapParams {
    pub origin: (f64, f64),
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub inflation_radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl CostmapParams {
    /// Grid covering `[min, max]` in x and y.
    pub fn covering(min: (f64, f64), max: (f64, f64), resolution: f64) -> Result<Self> {
        if !(resolution > 0.0) || !(max.0 > min.0) || !(max.1 > min.1) {
            return Err(Error::invalid("costmap extent and resolution must be positive"));
        }
        Ok(Self {
            origin: min,
            resolution,
            width: ((max.0 - min.0) / resolution).ceil() as usize,
            height: ((max.1 - min.1) / resolution).ceil() as usize,
            inflation_radius: 0.25,
            z_min: 0.05,
            z_max: 1.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap2D {
    pub origin: (f64, f64),
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub inflation_radius: f64,
    pub occupied: Vec<bool>,
    pub inflated: Vec<bool>,
}

impl Costmap2D {
    pub fn cell_of(&self, x: f64, y: f64) -> Option<Cell> {
        let cx = ((x - self.origin.0) / self.resolution).floor();
        let cy = ((y - self.origin.1) / self.resolution).floor();
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some((cx as usize, cy as usize))
    }

    pub fn center(&self, c: Cell) -> (f64, f64) {
        (self.origin.0 + (c.0 as f64 + 0.5) * self.resolution, self.origin.1 + (c.1 as f64 + 0.5) * self.resolution)
    }

    pub fn index(&self, c: Cell) -> usize {
        c.1 * self.width + c.0
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.index(c)]
    }

    pub fn is_inflated(&self, c: Cell) -> bool {
        self.inflated[self.index(c)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

pub fn costmap_2d(cloud: &[Vec3], params: &CostmapParams) -> Result<Costmap2D> {
    if !(params.resolution > 0.0) {
        return Err(Error::invalid("costmap resolution must be positive"));
    }
    if !(params.inflation_radius >= 0.0) {
        return Err(Error::invalid("inflation radius must be non-negative"));
    }
    let n = params.width * params.height;
    let mut map = Costmap2D {
        origin: params.origin,
        resolution: params.resolution,
        width: params.width,
        height: params.height,
        inflation_radius: params.inflation_radius,
        occupied: vec![false; n],
        inflated: vec![false; n],
    };
    for p in cloud {
        if p.z > params.z_min && p.z <= params.z_max {
            if let Some(c) = map.cell_of(p.x, p.y) {
                let i = map.index(c);
                map.occupied[i] = true;
            }
        }
    }
    // Stencil of offsets whose center distance is within the radius.
    let reach = (params.inflation_radius / params.resolution).ceil() as i64;
    let r_cells = params.inflation_radius / params.resolution;
    let stencil: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|dy| (-reach..=reach).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64).sqrt() <= r_cells + 1e-9)
        .collect();
    let (w, h) = (params.width as i64, params.height as i64);
    for cy in 0..h {
        for cx in 0..w {
            if !map.occupied[(cy * w + cx) as usize] {
                continue;
            }
            for &(dx, dy) in &stencil {
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && x < w && y < h {
                    map.inflated[(y * w + x) as usize] = true;
                }
            }
        }
    }
    Ok(map)
}

#[derive(Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then on index for a stable expansion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

fn octile(a: Cell, b: Cell) -> f64 {
    let dx = a.0.abs_diff(b.0) as f64;
    let dy = a.1.abs_diff(b.1) as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

/// A* over non-inflated cells, 8-connected with diagonal cost √2 (in cells).
/// The start cell is always admissible. Returns the cell path and its cost.
pub fn plan_path(map: &Costmap2D, start: Cell, goal: Cell) -> Option<(Vec<Cell>, f64)> {
    if start.0 >= map.width || start.1 >= map.height || goal.0 >= map.width || goal.1 >= map.height {
        return None;
    }
    if goal != start && map.is_inflated(goal) {
        return None;
    }
    let n = map.width * map.height;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let s = map.index(start);
    let t = map.index(goal);
    g[s] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open { f: octile(start, goal), g: 0.0, idx: s });
    while let Some(Open { g: gc, idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == t {
            break;
        }
        let (cx, cy) = ((idx % map.width) as i64, (idx / map.width) as i64);
        for (dx, dy) in NEIGHBORS {
            let (x, y) = (cx + dx, cy + dy);
            if x < 0 || y < 0 || x >= map.width as i64 || y >= map.height as i64 {
                continue;
            }
            let ni = y as usize * map.width + x as usize;
            if closed[ni] || map.inflated[ni] {
                continue;
            }
            let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            let ng = gc + step;
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = idx;
                open.push(Open { f: ng + octile((x as usize, y as usize), goal), g: ng, idx: ni });
            }
        }
    }
    if !g[t].is_finite() {
        return None;
    }
    let mut path = vec![t];
    while *path.last().unwrap() != s {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    Some((path.into_iter().map(|i| (i % map.width, i / map.width)).collect(), g[t]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerParams {
    pub v_nom: f64,
    pub heading_gain: f64,
    /// Path cells skipped ahead when picking the steering waypoint.
    pub lookahead: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self { v_nom: 0.1, heading_gain: 1.5, lookahead: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOutput {
    pub cmd: Cmd,
    pub blocked: bool,
    pub path: Vec<Cell>,
}

/// Plans from the robot cell to the sub-goal cell and steers toward a
/// waypoint a few cells down the path. Speed tapers with heading error and
/// drops to zero beyond 90°, so the robot turns in place first.
pub fn subgoal_planner(
    map: &Costmap2D,
    state: &RobotState,
    subgoal: (f64, f64),
    params: &PlannerParams,
) -> Result<PlannerOutput> {
    let goal = map.cell_of(subgoal.0, subgoal.1).ok_or_else(|| Error::invalid("sub-goal outside the costmap"))?;
    let start = map.cell_of(state.x, state.y).ok_or_else(|| Error::invalid("robot outside the costmap"))?;
    let Some((path, _)) = plan_path(map, start, goal) else {
        return Ok(PlannerOutput { cmd: Cmd::STOP, blocked: true, path: Vec::new() });
    };
    let target = if path.len() <= params.lookahead + 1 { subgoal } else { map.center(path[params.lookahead]) };
    let err = wrap_angle((target.1 - state.y).atan2(target.0 - state.x) - state.theta);
    let v = params.v_nom * err.cos().max(0.0);
    Ok(PlannerOutput { cmd: Cmd { v, omega: params.heading_gain * err }, blocked: false, path })
}
