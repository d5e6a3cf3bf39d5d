//! End-to-end experiment: dataset generation, two-stage training,
//! likelihood calibration and evaluation, all driven by one root seed.
//!
//! Two worlds are generated. The first supplies the semantic training
//! frames, calibration frames and the test frames; the second is driven
//! through once per corridor to collect frames with traversability masks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::metrics::{sweep_curve, sweep_curves, threshold_grid, Confusion, Curve, CurveTable, SummaryRow};
use crate::optim::TrainHyper;
use crate::pixelnet::{
    corrupt_labels, predict_ssm, predict_trav, train_seg_with_trav_class, train_ssm, train_tem, PseudoLabelNoise,
    SoftmaxClassifier, SEG4_TRAV_PLANT,
};
use crate::pu::PuClassifier;
use crate::seed::{derive_seed, rng_for};
use crate::travmask::{build_mask_dataset, MaskDataset};
use crate::voxelfusion::{
    calibrate_class_likelihood, calibrate_trav_likelihood, ClassLikelihood, TravLikelihood, VoxelMapConfig,
};
use crate::world::{build_world, render_frame, script_trajectory, Frame, PathSpec, ScenarioConfig, WorldModel};

/// Frame id offsets keep ids (and the seeds derived from them) unique per split.
pub const SPLITS: [(&str, u32); 4] = [("ssm", 0), ("calib", 10_000), ("test", 20_000), ("tem", 30_000)];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub root_seed: u64,
    pub scenario: ScenarioConfig,
    pub ssm_hyper: TrainHyper,
    pub tem_hyper: TrainHyper,
    pub seg_hyper: TrainHyper,
    pub voxel: VoxelMapConfig,
    pub trav_bins: usize,
    pub theta_free: f64,
    pub threshold_steps: usize,
    /// Fraction of traversal frames held out for the label-frequency
    /// estimate; 0 uses the training positives.
    pub c_holdout: f64,
    pub ssm_spacing: f64,
    pub calib_spacing: f64,
    pub test_spacing: f64,
    pub test_offset: f64,
    pub tem_spacing: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            root_seed: 1,
            scenario: ScenarioConfig::default(),
            ssm_hyper: TrainHyper::default(),
            tem_hyper: TrainHyper::default(),
            seg_hyper: TrainHyper::default(),
            voxel: VoxelMapConfig::default(),
            trav_bins: 10,
            theta_free: 0.75,
            threshold_steps: 100,
            c_holdout: 0.0,
            ssm_spacing: 0.5,
            calib_spacing: 1.0,
            test_spacing: 0.5,
            test_offset: 0.1,
            tem_spacing: 0.25,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        for h in [&self.ssm_hyper, &self.tem_hyper, &self.seg_hyper] {
            h.validate()?;
        }
        self.voxel.validate()?;
        self.noise().validate()?;
        if self.trav_bins == 0 || self.threshold_steps == 0 {
            return Err(Error::config("bin and threshold counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.theta_free) {
            return Err(Error::config("free-space threshold must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.c_holdout) {
            return Err(Error::config("held-out fraction must lie in [0, 1)"));
        }
        let spacings = [self.ssm_spacing, self.calib_spacing, self.test_spacing, self.tem_spacing];
        if spacings.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::config("pass spacings must be positive"));
        }
        Ok(())
    }

    pub fn noise(&self) -> PseudoLabelNoise {
        PseudoLabelNoise { flip_rate: self.scenario.label_flip_rate, void_rate: self.scenario.label_void_rate }
    }

    /// Scenario of world `name` ("a" or "b"), seeded from the root seed.
    pub fn world_config(&self, name: &str) -> ScenarioConfig {
        ScenarioConfig { seed: derive_seed(self.root_seed, &format!("world-{name}")), ..self.scenario.clone() }
    }

    pub fn thresholds(&self) -> Vec<f64> {
        threshold_grid(self.threshold_steps)
    }
}

/// Frames of one pass set plus the robot poses they were taken from.
#[derive(Debug, Clone)]
pub struct Split {
    pub frames: Vec<Frame>,
    pub robot_poses: Vec<Pose>,
}

/// Renders frames from robot poses; each frame draws its noise from its own
/// seed so rendering order does not matter.
pub fn render_poses(world: &WorldModel, robot_poses: &[Pose], first_id: u32, root_seed: u64) -> Split {
    let cfg = &world.config;
    let frames = robot_poses
        .par_iter()
        .enumerate()
        .map(|(i, rp)| {
            let id = first_id + i as u32;
            let mut rng = rng_for(root_seed, &format!("render-{id}"));
            render_frame(world, &cfg.mount.camera_pose(rp), &cfg.intrinsics, id, &mut rng)
        })
        .collect();
    Split { frames, robot_poses: robot_poses.to_vec() }
}

pub fn corridor_passes(world: &WorldModel, spacing: f64, offset: f64, start: f64, reverse: bool) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    for c in 0..world.corridor_count() {
        let mut spec = PathSpec::full_corridor(world, c, spacing);
        spec.lateral_offset = offset;
        spec.reverse = reverse;
        if reverse {
            spec.start = world.config.row_length - start;
        } else {
            spec.start = start;
        }
        spec.length = (world.config.row_length - start).max(0.0);
        poses.extend(script_trajectory(world, &spec)?);
    }
    Ok(poses)
}

pub fn pseudo_labels(frames: &[Frame], noise: &PseudoLabelNoise, root_seed: u64) -> Result<Vec<Vec<u8>>> {
    frames
        .iter()
        .map(|f| corrupt_labels(&f.gt_class, noise, derive_seed(root_seed, &format!("pseudo-{}", f.frame_id))))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub world_a: WorldModel,
    pub world_b: WorldModel,
    pub ssm: Split,
    pub calib: Split,
    pub test: Split,
    pub tem: Split,
}

impl Datasets {
    pub fn split(&self, name: &str) -> Option<&Split> {
        match name {
            "ssm" => Some(&self.ssm),
            "calib" => Some(&self.calib),
            "test" => Some(&self.test),
            "tem" => Some(&self.tem),
            _ => None,
        }
    }
}

pub fn generate(cfg: &PipelineConfig) -> Result<Datasets> {
    cfg.validate()?;
    let world_a = build_world(&cfg.world_config("a"))?;
    let world_b = build_world(&cfg.world_config("b"))?;
    let seed = cfg.root_seed;
    let ssm = render_poses(&world_a, &corridor_passes(&world_a, cfg.ssm_spacing, 0.0, 0.0, false)?, SPLITS[0].1, seed);
    let calib =
        render_poses(&world_a, &corridor_passes(&world_a, cfg.calib_spacing, 0.0, 0.0, true)?, SPLITS[1].1, seed);
    let test_poses = corridor_passes(&world_a, cfg.test_spacing, cfg.test_offset, cfg.test_spacing / 2.0, false)?;
    let test = render_poses(&world_a, &test_poses, SPLITS[2].1, seed);
    let tem = render_poses(&world_b, &corridor_passes(&world_b, cfg.tem_spacing, 0.0, 0.0, false)?, SPLITS[3].1, seed);
    Ok(Datasets { world_a, world_b, ssm, calib, test, tem })
}

pub fn traversal_masks(cfg: &PipelineConfig, tem: &Split) -> Result<MaskDataset> {
    build_mask_dataset(&tem.frames, &tem.robot_poses, &cfg.scenario.robot, cfg.voxel.voxel_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub ssm: SoftmaxClassifier,
    pub tem: PuClassifier,
    pub seg4: SoftmaxClassifier,
}

pub fn train_models(cfg: &PipelineConfig, data: &Datasets, masks: &MaskDataset) -> Result<Models> {
    let seed = cfg.root_seed;
    let noise = cfg.noise();
    let ssm_pseudo = pseudo_labels(&data.ssm.frames, &noise, seed)?;
    let ssm = train_ssm(&data.ssm.frames, &ssm_pseudo, &cfg.ssm_hyper, derive_seed(seed, "train-ssm"))?;
    let tem =
        train_tem(&data.tem.frames, &masks.masks, &ssm, &cfg.tem_hyper, derive_seed(seed, "train-tem"), cfg.c_holdout)?;
    let tem_pseudo = pseudo_labels(&data.tem.frames, &noise, seed)?;
    let seg4 = train_seg_with_trav_class(
        &data.tem.frames,
        &tem_pseudo,
        &masks.masks,
        &cfg.seg_hyper,
        derive_seed(seed, "train-seg4"),
    )?;
    Ok(Models { ssm, tem, seg4 })
}

/// Class likelihood from the calibration frames' pseudo-labels; traversability
/// likelihood from the traversal frames and their masks.
pub fn calibrate(
    cfg: &PipelineConfig,
    data: &Datasets,
    masks: &MaskDataset,
    models: &Models,
) -> Result<(ClassLikelihood, TravLikelihood)> {
    let pseudo = pseudo_labels(&data.calib.frames, &cfg.noise(), cfg.root_seed)?;
    calibrate_from(cfg, &data.calib.frames, &pseudo, &data.tem.frames, &masks.masks, &models.ssm, &models.tem)
}

pub fn calibrate_from(
    cfg: &PipelineConfig,
    calib: &[Frame],
    calib_pseudo: &[Vec<u8>],
    tem: &[Frame],
    tem_masks: &[Vec<u8>],
    ssm: &SoftmaxClassifier,
    tem_model: &PuClassifier,
) -> Result<(ClassLikelihood, TravLikelihood)> {
    let pred: Vec<Vec<u8>> = calib.par_iter().map(|f| predict_ssm(f, ssm).1).collect();
    let class_lik = calibrate_class_likelihood(&pred, calib_pseudo)?;
    let trav: Vec<Vec<f64>> = tem.par_iter().map(|f| predict_trav(f, ssm, tem_model)).collect();
    let trav_lik = calibrate_trav_likelihood(&trav, tem_masks, cfg.trav_bins)?;
    Ok((class_lik, trav_lik))
}

/// Per-pixel predictions of every model on a set of frames.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub trav: Vec<Vec<f64>>,
    pub classes: Vec<Vec<u8>>,
    /// Four-class baseline: traversable-plant probability and argmax label.
    pub seg4_trav: Vec<Vec<f64>>,
    pub seg4_classes: Vec<Vec<u8>>,
}

pub fn predict_all(frames: &[Frame], models: &Models) -> Predictions {
    let per_frame: Vec<_> = frames
        .par_iter()
        .map(|f| {
            let trav = predict_trav(f, &models.ssm, &models.tem);
            let (_, classes) = predict_ssm(f, &models.ssm);
            let (p4, c4) = predict_ssm(f, &models.seg4);
            let t4 = p4.chunks_exact(4).map(|p| p[SEG4_TRAV_PLANT as usize]).collect();
            (trav, classes, t4, c4)
        })
        .collect();
    let mut out = Predictions { trav: vec![], classes: vec![], seg4_trav: vec![], seg4_classes: vec![] };
    for (t, c, t4, c4) in per_frame {
        out.trav.push(t);
        out.classes.push(c);
        out.seg4_trav.push(t4);
        out.seg4_classes.push(c4);
    }
    out
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub table: CurveTable,
    pub seg4: Curve,
    /// Baseline judged by its argmax label instead of a threshold sweep.
    pub seg4_argmax: Confusion,
    pub rows: Vec<SummaryRow>,
}

pub fn evaluate(cfg: &PipelineConfig, frames: &[Frame], pred: &Predictions) -> Result<Evaluation> {
    let gt: Vec<Vec<u8>> = frames.iter().map(|f| f.gt_trav.clone()).collect();
    let th = cfg.thresholds();
    let table = sweep_curves(&pred.trav, &pred.classes, &gt, &th)?;
    let seg4 = sweep_curve(&pred.seg4_trav, &gt, None, &th)?;
    let mut seg4_argmax = Confusion::default();
    for (c4, g) in pred.seg4_classes.iter().zip(&gt) {
        let m: Vec<u8> = c4.iter().map(|&c| u8::from(c == SEG4_TRAV_PLANT)).collect();
        seg4_argmax.add(&crate::metrics::confusion(&m, g)?);
    }
    let rows = vec![
        SummaryRow::from_curve("raw", &table.raw),
        SummaryRow::from_curve("refined", &table.refined),
        SummaryRow::from_curve("segmentation", &seg4),
        SummaryRow { variant: "segmentation-argmax".into(), threshold: None, confusion: seg4_argmax },
    ];
    Ok(Evaluation { table, seg4, seg4_argmax, rows })
}

/// Everything an in-memory run produces.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub data: Datasets,
    pub masks: MaskDataset,
    pub models: Models,
    pub class_lik: ClassLikelihood,
    pub trav_lik: TravLikelihood,
    pub eval: Evaluation,
}

pub fn run_experiment(cfg: &PipelineConfig) -> Result<ExperimentResult> {
    let data = generate(cfg)?;
    let masks = traversal_masks(cfg, &data.tem)?;
    let models = train_models(cfg, &data, &masks)?;
    let (class_lik, trav_lik) = calibrate(cfg, &data, &masks, &models)?;
    let pred = predict_all(&data.test.frames, &models);
    let eval = evaluate(cfg, &data.test.frames, &pred)?;
    Ok(ExperimentResult { data, masks, models, class_lik, trav_lik, eval })
}
