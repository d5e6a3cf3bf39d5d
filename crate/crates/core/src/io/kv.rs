//! `key = value` configuration files.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Keys missing from a file keep their defaults, unknown or
//! repeated keys are errors. Each config type lists its fields once and the
//! same list drives both parsing and the resolved-config dump.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::navsim::{ControllerKind, MapMode, Scenario};
use crate::optim::TrainHyper;
use crate::pipeline::PipelineConfig;
use crate::voxelfusion::VoxelMapConfig;
use crate::world::ScenarioConfig;

/// A value that can be written to and read from one config line.
pub trait Field {
    fn show(&self) -> String;
    fn read(&mut self, s: &str) -> Option<()>;
}

macro_rules! scalar_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn show(&self) -> String {
                format!("{}", self)
            }
            fn read(&mut self, s: &str) -> Option<()> {
                *self = s.parse().ok()?;
                Some(())
            }
        }
    )*};
}

scalar_field!(f64, u64, u32, usize, bool);

fn parse_list(s: &str, n: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse().ok()).collect::<Option<_>>()?;
    (v.len() == n).then_some(v)
}

fn show_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}

impl Field for (f64, f64) {
    fn show(&self) -> String {
        show_list(&[self.0, self.1])
    }
    fn read(&mut self, s: &str) -> Option<()> {
        let v = parse_list(s, 2)?;
        *self = (v[0], v[1]);
        Some(())
    }
}

impl<const N: usize> Field for [f64; N] {
    fn show(&self) -> String {
        show_list(self)
    }
    fn read(&mut self, s: &str) -> Option<()> {
        self.copy_from_slice(&parse_list(s, N)?);
        Some(())
    }
}

impl Field for Option<f64> {
    fn show(&self) -> String {
        self.map_or_else(|| "none".to_string(), |v| format!("{v}"))
    }
    fn read(&mut self, s: &str) -> Option<()> {
        *self = if s == "none" { None } else { Some(s.parse().ok()?) };
        Some(())
    }
}

/// Way-points as `x,y;x,y;...`; empty for none.
impl Field for Vec<(f64, f64)> {
    fn show(&self) -> String {
        self.iter().map(|p| p.show()).collect::<Vec<_>>().join(";")
    }
    fn read(&mut self, s: &str) -> Option<()> {
        let mut out = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let mut p = (0.0, 0.0);
            p.read(part)?;
            out.push(p);
        }
        *self = out;
        Some(())
    }
}

impl Field for MapMode {
    fn show(&self) -> String {
        self.name().into()
    }
    fn read(&mut self, s: &str) -> Option<()> {
        *self = MapMode::parse(s)?;
        Some(())
    }
}

impl Field for ControllerKind {
    fn show(&self) -> String {
        self.name().into()
    }
    fn read(&mut self, s: &str) -> Option<()> {
        *self = ControllerKind::parse(s)?;
        Some(())
    }
}

pub trait Visitor {
    fn field(&mut self, key: &str, value: &mut dyn Field) -> Result<()>;
}

/// Parsed but not yet interpreted file: key → (value, line number).
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    pub path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl KvFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, format!("line {}: expected key = value", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::parse(path, format!("line {}: empty key", n + 1)));
            }
            if entries.insert(key.to_string(), (v.trim().to_string(), n + 1)).is_some() {
                return Err(Error::config(format!("{}: key `{key}` repeated on line {}", path.display(), n + 1)));
            }
        }
        Ok(Self { path: path.to_path_buf(), entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = super::read_input(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(path, "not UTF-8"))?;
        Self::parse(&text, path)
    }

    /// Applies every entry through `visit`, then rejects whatever is left.
    pub fn apply(mut self, visit: impl FnOnce(&mut dyn Visitor) -> Result<()>) -> Result<()> {
        visit(&mut self)?;
        if let Some((k, (_, line))) = self.entries.iter().next() {
            return Err(Error::config(format!("{}: unknown key `{k}` on line {line}", self.path.display())));
        }
        Ok(())
    }
}

impl Visitor for KvFile {
    fn field(&mut self, key: &str, value: &mut dyn Field) -> Result<()> {
        if let Some((v, line)) = self.entries.remove(key) {
            value.read(&v).ok_or_else(|| {
                Error::config(format!("{}: bad value `{v}` for `{key}` on line {line}", self.path.display()))
            })?;
        }
        Ok(())
    }
}

/// Collects `key = value` lines in visiting order.
#[derive(Default)]
struct Dump(String);

impl Visitor for Dump {
    fn field(&mut self, key: &str, value: &mut dyn Field) -> Result<()> {
        self.0.push_str(key);
        self.0.push_str(" = ");
        self.0.push_str(&value.show());
        self.0.push('\n');
        Ok(())
    }
}

fn hyper_fields(prefix: &str, h: &mut TrainHyper, v: &mut dyn Visitor) -> Result<()> {
    v.field(&format!("{prefix}.learning_rate"), &mut h.learning_rate)?;
    v.field(&format!("{prefix}.epochs"), &mut h.epochs)?;
    v.field(&format!("{prefix}.batch_size"), &mut h.batch_size)?;
    v.field(&format!("{prefix}.l2"), &mut h.l2)?;
    v.field(&format!("{prefix}.momentum"), &mut h.momentum)?;
    v.field(&format!("{prefix}.samples_per_epoch"), &mut h.samples_per_epoch)
}

fn voxel_fields(c: &mut VoxelMapConfig, v: &mut dyn Visitor) -> Result<()> {
    v.field("voxel.size", &mut c.voxel_size)?;
    v.field("voxel.evict_after", &mut c.evict_after)?;
    v.field("voxel.max_range", &mut c.max_range)?;
    v.field("voxel.class_prior", &mut c.class_prior)?;
    v.field("voxel.trav_prior", &mut c.trav_prior)
}

/// World generation and sensor fields; the world seed is listed separately
/// because the pipeline derives it.
fn world_fields(c: &mut ScenarioConfig, v: &mut dyn Visitor) -> Result<()> {
    v.field("world.row_count", &mut c.row_count)?;
    v.field("world.row_length", &mut c.row_length)?;
    v.field("world.row_spacing", &mut c.row_spacing)?;
    v.field("world.path_width", &mut c.path_width)?;
    v.field("world.overhang_fraction", &mut c.overhang_fraction)?;
    v.field("world.overhang_segment", &mut c.overhang_segment)?;
    v.field("world.overhang_radius", &mut c.overhang_radius)?;
    v.field("world.stem_spacing", &mut c.stem_spacing)?;
    v.field("world.stem_radius", &mut c.stem_radius)?;
    v.field("world.stem_height", &mut c.stem_height)?;
    v.field("world.foliage_per_meter", &mut c.foliage_per_meter)?;
    v.field("world.foliage_radius", &mut c.foliage_radius)?;
    v.field("world.feature_dim", &mut c.feature_dim)?;
    v.field("world.feature_sigma", &mut c.feature_sigma)?;
    v.field("world.feature_separation", &mut c.feature_separation)?;
    v.field("world.class_separation", &mut c.class_separation)?;
    v.field("world.label_flip_rate", &mut c.label_flip_rate)?;
    v.field("world.label_void_rate", &mut c.label_void_rate)?;
    v.field("camera.fx", &mut c.intrinsics.fx)?;
    v.field("camera.fy", &mut c.intrinsics.fy)?;
    v.field("camera.cx", &mut c.intrinsics.cx)?;
    v.field("camera.cy", &mut c.intrinsics.cy)?;
    v.field("camera.width", &mut c.intrinsics.width)?;
    v.field("camera.height", &mut c.intrinsics.height)?;
    v.field("camera.max_range", &mut c.max_range)?;
    v.field("camera.min_range", &mut c.min_range)?;
    v.field("camera.mount_forward", &mut c.mount.forward)?;
    v.field("camera.mount_height", &mut c.mount.height)?;
    v.field("camera.mount_pitch_deg", &mut c.mount.pitch_deg)?;
    v.field("robot.length", &mut c.robot.length)?;
    v.field("robot.width", &mut c.robot.width)?;
    v.field("robot.height", &mut c.robot.height)?;
    v.field("robot.ground_clearance", &mut c.ground_clearance)
}

pub fn pipeline_fields(c: &mut PipelineConfig, v: &mut dyn Visitor) -> Result<()> {
    v.field("seed", &mut c.root_seed)?;
    world_fields(&mut c.scenario, v)?;
    hyper_fields("ssm", &mut c.ssm_hyper, v)?;
    hyper_fields("tem", &mut c.tem_hyper, v)?;
    hyper_fields("seg4", &mut c.seg_hyper, v)?;
    voxel_fields(&mut c.voxel, v)?;
    v.field("trav_bins", &mut c.trav_bins)?;
    v.field("theta_free", &mut c.theta_free)?;
    v.field("threshold_steps", &mut c.threshold_steps)?;
    v.field("c_holdout", &mut c.c_holdout)?;
    v.field("pass.ssm_spacing", &mut c.ssm_spacing)?;
    v.field("pass.calib_spacing", &mut c.calib_spacing)?;
    v.field("pass.test_spacing", &mut c.test_spacing)?;
    v.field("pass.test_offset", &mut c.test_offset)?;
    v.field("pass.tem_spacing", &mut c.tem_spacing)
}

pub fn scenario_fields(s: &mut Scenario, v: &mut dyn Visitor) -> Result<()> {
    v.field("world.seed", &mut s.world.seed)?;
    world_fields(&mut s.world, v)?;
    v.field("corridor", &mut s.corridor)?;
    v.field("start_x", &mut s.start_x)?;
    v.field("goal_x", &mut s.goal_x)?;
    v.field("subgoals", &mut s.subgoals)?;
    v.field("controller", &mut s.controller)?;
    v.field("wall_x", &mut s.wall_x)?;
    v.field("dt", &mut s.dt)?;
    v.field("max_time", &mut s.max_time)?;
    v.field("stuck_time", &mut s.stuck_time)?;
    v.field("progress_epsilon", &mut s.progress_epsilon)?;
    v.field("goal_tolerance", &mut s.goal_tolerance)?;
    v.field("allow_reset", &mut s.allow_reset)?;
    v.field("theta_free", &mut s.theta_free)?;
    v.field("limits.v_max", &mut s.limits.v_max)?;
    v.field("limits.omega_max", &mut s.limits.omega_max)?;
    v.field("stop.v_nom", &mut s.forward.v_nom)?;
    v.field("stop.depth", &mut s.forward.depth)?;
    v.field("stop.width", &mut s.forward.width)?;
    v.field("stop.height", &mut s.forward.height)?;
    v.field("stop.z_min", &mut s.forward.z_min)?;
    v.field("planner.v_nom", &mut s.planner.v_nom)?;
    v.field("planner.heading_gain", &mut s.planner.heading_gain)?;
    v.field("planner.lookahead", &mut s.planner.lookahead)?;
    v.field("costmap.inflation_radius", &mut s.inflation_radius)?;
    v.field("costmap.resolution", &mut s.costmap_resolution)?;
    voxel_fields(&mut s.voxel, v)
}

/// Resolved config text: every key, in a fixed order.
pub fn dump<T: Clone>(value: &T, fields: fn(&mut T, &mut dyn Visitor) -> Result<()>) -> String {
    let mut copy = value.clone();
    let mut d = Dump::default();
    // Dumping never fails.
    let _ = fields(&mut copy, &mut d);
    d.0
}

/// Parses `text` over `base`, rejecting unknown keys.
pub fn parse_over<T>(
    base: T,
    text: &str,
    path: &Path,
    fields: fn(&mut T, &mut dyn Visitor) -> Result<()>,
) -> Result<T> {
    let mut value = base;
    KvFile::parse(text, path)?.apply(|v| fields(&mut value, v))?;
    Ok(value)
}

pub fn load_pipeline_config(path: &Path) -> Result<PipelineConfig> {
    let kv = KvFile::load(path)?;
    let mut cfg = PipelineConfig::default();
    kv.apply(|v| pipeline_fields(&mut cfg, v))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn pipeline_config_text(cfg: &PipelineConfig) -> String {
    dump(cfg, pipeline_fields)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let kv = KvFile::load(path)?;
    let mut s = Scenario::default();
    kv.apply(|v| scenario_fields(&mut s, v))?;
    s.validate()?;
    Ok(s)
}

pub fn scenario_text(s: &Scenario) -> String {
    dump(s, scenario_fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("run.cfg")
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = pipeline_config_text(&cfg);
        assert_eq!(parse_over(PipelineConfig::default(), &text, p(), pipeline_fields).unwrap(), cfg);
        let sc = Scenario { subgoals: vec![(1.0, 2.4), (3.5, 2.5)], wall_x: Some(5.0), ..Scenario::default() };
        let text = scenario_text(&sc);
        assert_eq!(parse_over(Scenario::default(), &text, p(), scenario_fields).unwrap(), sc);
    }

    #[test]
    fn overrides_and_comments() {
        let text = "# comment\n\nseed = 7\n tem.epochs=12 \nvoxel.class_prior = 0.5,0.25,0.25\n";
        let cfg = parse_over(PipelineConfig::default(), text, p(), pipeline_fields).unwrap();
        assert_eq!(cfg.root_seed, 7);
        assert_eq!(cfg.tem_hyper.epochs, 12);
        assert_eq!(cfg.voxel.class_prior, [0.5, 0.25, 0.25]);
        assert_eq!(cfg.ssm_hyper, TrainHyper::default());
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = parse_over(PipelineConfig::default(), "sed = 3\n", p(), pipeline_fields).unwrap_err();
        assert!(matches!(&unknown, Error::Config(m) if m.contains("unknown key `sed`")));
        let bad = parse_over(PipelineConfig::default(), "seed = x\n", p(), pipeline_fields).unwrap_err();
        assert!(matches!(&bad, Error::Config(m) if m.contains("bad value")));
        assert!(matches!(
            parse_over(PipelineConfig::default(), "seed 3\n", p(), pipeline_fields),
            Err(Error::Parse { .. })
        ));
        assert!(parse_over(PipelineConfig::default(), "seed = 1\nseed = 2\n", p(), pipeline_fields).is_err());
        assert!(parse_over(PipelineConfig::default(), "voxel.class_prior = 1,2\n", p(), pipeline_fields).is_err());
        assert!(parse_over(Scenario::default(), "controller = fast\n", p(), scenario_fields).is_err());
    }

    #[test]
    fn float_formatting_is_exact() {
        let cfg = PipelineConfig { theta_free: 0.1 + 0.2, ..PipelineConfig::default() };
        let back = parse_over(PipelineConfig::default(), &pipeline_config_text(&cfg), p(), pipeline_fields).unwrap();
        assert_eq!(back.theta_free.to_bits(), cfg.theta_free.to_bits());
    }
}
