//! File-based pipeline stages. Each stage reads its inputs from disk, writes
//! its outputs into one directory, and leaves `<stage>.cfg` (the resolved
//! configuration) and `<stage>.manifest` (hashes of everything it read) next
//! to them. The command-line driver is a thin wrapper over these functions.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{
    atomic_write, class_likelihood_csv, parse_class_likelihood, parse_pu_classifier, parse_softmax,
    parse_trav_likelihood, pipeline_config_text, pu_classifier_csv, read_csv_model, read_input, read_masks,
    read_predictions, read_split, scenario_text, softmax_csv, trav_likelihood_csv, write_masks, write_predictions,
    write_split, Manifest, SplitOnDisk,
};
use crate::metrics::{append_curve_rows, summary_csv};
use crate::navsim::{run_episode_with_map, EpisodeModels, MapMode, Scenario};
use crate::pipeline::{
    calibrate_from, evaluate, generate, predict_all, pseudo_labels, traversal_masks, Models, PipelineConfig, Split,
    SPLITS,
};
use crate::pixelnet::{train_seg_with_trav_class, train_ssm, train_tem};
use crate::seed::derive_seed;
use crate::world::ScenarioConfig;

pub const SSM_CSV: &str = "ssm.csv";
pub const TEM_CSV: &str = "tem.csv";
pub const SEG4_CSV: &str = "seg4.csv";
pub const CLASS_LIK_CSV: &str = "class_likelihood.csv";
pub const TRAV_LIK_CSV: &str = "trav_likelihood.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    Ssm,
    Tem,
    Seg4,
}

impl TrainTarget {
    pub fn name(self) -> &'static str {
        match self {
            TrainTarget::Ssm => "ssm",
            TrainTarget::Tem => "tem",
            TrainTarget::Seg4 => "seg4",
        }
    }
}

fn finish(out: &Path, stage: &str, config: &str, mut manifest: Manifest) -> Result<()> {
    manifest.add_bytes("config", config.as_bytes());
    atomic_write(&out.join(format!("{stage}.cfg")), config.as_bytes())?;
    atomic_write(&out.join(format!("{stage}.manifest")), manifest.to_text().as_bytes())
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::MissingInput(dir.to_path_buf()))
    }
}

fn load_split(cfg: &PipelineConfig, data: &Path, name: &str, manifest: &mut Manifest) -> Result<SplitOnDisk> {
    let dir = data.join(name);
    require_dir(&dir)?;
    manifest.add_tree(&format!("data/{name}"), &dir)?;
    read_split(&dir, &cfg.scenario.intrinsics, cfg.scenario.feature_dim)
}

fn need_pseudo(s: SplitOnDisk, data: &Path, name: &str) -> Result<(Split, Vec<Vec<u8>>)> {
    match s.pseudo {
        Some(p) => Ok((s.split, p)),
        None => Err(Error::MissingInput(data.join(name).join("frames").join("*.pseudo.rast"))),
    }
}

fn load_masks(masks: &Path, frames: &[crate::world::Frame], manifest: &mut Manifest) -> Result<Vec<Vec<u8>>> {
    require_dir(masks)?;
    manifest.add_tree("masks", masks)?;
    read_masks(masks, frames)
}

fn model<T>(dir: &Path, file: &str, parse: fn(&str, &Path) -> Result<T>, manifest: &mut Manifest) -> Result<T> {
    let path = dir.join(file);
    manifest.add_file(format!("models/{file}"), &path)?;
    read_csv_model(&path, parse)
}

/// Generates both worlds and writes every split with its pseudo-labels.
pub fn world(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let data = generate(cfg)?;
    let text = pipeline_config_text(cfg);
    for (name, _) in SPLITS {
        let split = data.split(name).expect("known split");
        let pseudo = pseudo_labels(&split.frames, &cfg.noise(), cfg.root_seed)?;
        let dir = out.join(name);
        write_split(&dir, split, Some(&pseudo))?;
        atomic_write(&dir.join("scenario.cfg"), text.as_bytes())?;
    }
    finish(out, "world", &text, Manifest::default())
}

/// Sweeps the traversal trajectory and renders one mask per traversal frame.
pub fn masks(cfg: &PipelineConfig, data: &Path, out: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    let tem = load_split(cfg, data, "tem", &mut manifest)?.split;
    let ds = traversal_masks(cfg, &tem)?;
    write_masks(out, &tem.frames, &ds.masks)?;
    atomic_write(&out.join("swept.csv"), ds.swept.to_csv().as_bytes())?;
    let stats = format!(
        "labeled_pixels,gt_traversable_pixels,coverage\n{},{},{}\n",
        ds.labeled_pixels,
        ds.gt_traversable_pixels,
        ds.coverage()
    );
    atomic_write(&out.join("coverage.csv"), stats.as_bytes())?;
    finish(out, "masks", &pipeline_config_text(cfg), manifest)
}

/// Trains one model into `models`. The traversability model needs the
/// semantic model already present there.
pub fn train(cfg: &PipelineConfig, target: TrainTarget, data: &Path, masks: &Path, models: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    let seed = cfg.root_seed;
    let (file, csv) = match target {
        TrainTarget::Ssm => {
            let (split, pseudo) = need_pseudo(load_split(cfg, data, "ssm", &mut manifest)?, data, "ssm")?;
            let m = train_ssm(&split.frames, &pseudo, &cfg.ssm_hyper, derive_seed(seed, "train-ssm"))?;
            (SSM_CSV, softmax_csv(&m))
        }
        TrainTarget::Tem => {
            let split = load_split(cfg, data, "tem", &mut manifest)?.split;
            let m = load_masks(masks, &split.frames, &mut manifest)?;
            let ssm = model(models, SSM_CSV, parse_softmax, &mut manifest)?;
            let tem =
                train_tem(&split.frames, &m, &ssm, &cfg.tem_hyper, derive_seed(seed, "train-tem"), cfg.c_holdout)?;
            (TEM_CSV, pu_classifier_csv(&tem))
        }
        TrainTarget::Seg4 => {
            let (split, pseudo) = need_pseudo(load_split(cfg, data, "tem", &mut manifest)?, data, "tem")?;
            let m = load_masks(masks, &split.frames, &mut manifest)?;
            let seg =
                train_seg_with_trav_class(&split.frames, &pseudo, &m, &cfg.seg_hyper, derive_seed(seed, "train-seg4"))?;
            (SEG4_CSV, softmax_csv(&seg))
        }
    };
    atomic_write(&models.join(file), csv.as_bytes())?;
    finish(models, &format!("train-{}", target.name()), &pipeline_config_text(cfg), manifest)
}

/// Fits both sensor likelihoods and writes them next to the models.
pub fn calibrate(cfg: &PipelineConfig, data: &Path, masks: &Path, models: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    let (calib, pseudo) = need_pseudo(load_split(cfg, data, "calib", &mut manifest)?, data, "calib")?;
    let tem = load_split(cfg, data, "tem", &mut manifest)?.split;
    let m = load_masks(masks, &tem.frames, &mut manifest)?;
    let ssm = model(models, SSM_CSV, parse_softmax, &mut manifest)?;
    let tem_model = model(models, TEM_CSV, parse_pu_classifier, &mut manifest)?;
    let (class_lik, trav_lik) = calibrate_from(cfg, &calib.frames, &pseudo, &tem.frames, &m, &ssm, &tem_model)?;
    atomic_write(&models.join(CLASS_LIK_CSV), class_likelihood_csv(&class_lik).as_bytes())?;
    atomic_write(&models.join(TRAV_LIK_CSV), trav_likelihood_csv(&trav_lik).as_bytes())?;
    finish(models, "calibrate", &pipeline_config_text(cfg), manifest)
}

pub fn load_models(dir: &Path, manifest: &mut Manifest) -> Result<Models> {
    Ok(Models {
        ssm: model(dir, SSM_CSV, parse_softmax, manifest)?,
        tem: model(dir, TEM_CSV, parse_pu_classifier, manifest)?,
        seg4: model(dir, SEG4_CSV, parse_softmax, manifest)?,
    })
}

pub fn load_episode_models(dir: &Path, manifest: &mut Manifest) -> Result<EpisodeModels> {
    Ok(EpisodeModels {
        ssm: model(dir, SSM_CSV, parse_softmax, manifest)?,
        tem: model(dir, TEM_CSV, parse_pu_classifier, manifest)?,
        class_lik: model(dir, CLASS_LIK_CSV, parse_class_likelihood, manifest)?,
        trav_lik: model(dir, TRAV_LIK_CSV, parse_trav_likelihood, manifest)?,
    })
}

/// Where `eval` gets its per-pixel predictions.
#[derive(Debug, Clone)]
pub enum PredictionSource {
    /// Run the models in this directory over the test split; the predictions
    /// are written to `<out>/predictions`.
    Models(PathBuf),
    /// Read prediction rasters written earlier.
    Rasters(PathBuf),
}

/// Scores predictions on the test split: `summary.csv` holds the best
/// threshold per variant, `curves.csv` the full sweeps.
pub fn eval(cfg: &PipelineConfig, data: &Path, source: &PredictionSource, out: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    let test = load_split(cfg, data, "test", &mut manifest)?.split;
    let pred = match source {
        PredictionSource::Models(dir) => {
            let models = load_models(dir, &mut manifest)?;
            let pred = predict_all(&test.frames, &models);
            write_predictions(&out.join("predictions"), &test.frames, &pred)?;
            // Score what was written so both sources see single-precision values.
            read_predictions(&out.join("predictions"), &test.frames)?
        }
        PredictionSource::Rasters(dir) => {
            require_dir(dir)?;
            manifest.add_tree("predictions", dir)?;
            read_predictions(dir, &test.frames)?
        }
    };
    let ev = evaluate(cfg, &test.frames, &pred)?;
    atomic_write(&out.join("summary.csv"), summary_csv(&ev.rows).as_bytes())?;
    let mut curves = ev.table.to_csv();
    append_curve_rows(&mut curves, "segmentation", &ev.seg4);
    atomic_write(&out.join("curves.csv"), curves.as_bytes())?;
    finish(out, "eval", &pipeline_config_text(cfg), manifest)
}

/// Runs one navigation episode and writes `trace.csv`, `episode.csv` and
/// the final voxel map as `map.csv`.
pub fn simulate(scenario: &Scenario, mode: MapMode, models: Option<&Path>, out: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    let loaded = match (mode, models) {
        (MapMode::Proposed, None) => return Err(Error::Uncalibrated),
        (_, Some(dir)) => Some(load_episode_models(dir, &mut manifest)?),
        (MapMode::Baseline, None) => None,
    };
    let world = scenario.build_world()?;
    let (res, map) = run_episode_with_map(&world, scenario, loaded.as_ref(), mode)?;
    atomic_write(&out.join("trace.csv"), res.trace_csv().as_bytes())?;
    let s = &res.final_state;
    let row = format!(
        "mode,outcome,distance,sim_time,stop_events,resets,final_x,final_y,final_theta\n{},{},{},{},{},{},{},{},{}\n",
        mode.name(),
        res.outcome.name(),
        res.distance,
        res.sim_time,
        res.stop_events,
        res.resets,
        s.x,
        s.y,
        s.theta
    );
    atomic_write(&out.join("episode.csv"), row.as_bytes())?;
    atomic_write(&out.join("map.csv"), map.snapshot_csv().as_bytes())?;
    finish(out, "simulate", &scenario_text(scenario), manifest)
}

fn find_named(dir: &Path, name: &str, found: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            find_named(&p, name, found)?;
        } else if p.file_name().is_some_and(|n| n == name) {
            found.push(p);
        }
    }
    Ok(())
}

/// Concatenates CSVs with the same header, prefixing a `source` column.
fn aggregate(inputs: &[PathBuf], name: &str, manifest: &mut Manifest) -> Result<Option<String>> {
    let mut out: Option<String> = None;
    let mut header = String::new();
    for root in inputs {
        let mut files = Vec::new();
        find_named(root, name, &mut files)?;
        files.sort();
        let root_label = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for f in files {
            let rel = f.parent().and_then(|p| p.strip_prefix(root).ok()).unwrap_or(Path::new(""));
            let source = if rel.as_os_str().is_empty() {
                root_label.clone()
            } else {
                format!("{root_label}/{}", rel.to_string_lossy().replace('\\', "/"))
            };
            let text = String::from_utf8(read_input(&f)?).map_err(|_| Error::parse(&f, "not UTF-8"))?;
            manifest.add_bytes(format!("{source}/{name}"), text.as_bytes());
            let mut lines = text.lines();
            let h = lines.next().unwrap_or_default();
            let acc = out.get_or_insert_with(|| {
                header = h.to_string();
                format!("source,{h}\n")
            });
            if h != header {
                return Err(Error::parse(&f, format!("header `{h}` differs from `{header}`")));
            }
            for l in lines.filter(|l| !l.is_empty()) {
                acc.push_str(&format!("{source},{l}\n"));
            }
        }
    }
    Ok(out)
}

/// Collects every `summary.csv` and `episode.csv` under the input trees into
/// `summary.csv` and `episodes.csv`.
pub fn report(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut manifest = Manifest::default();
    for dir in inputs {
        require_dir(dir)?;
    }
    let summary = aggregate(inputs, "summary.csv", &mut manifest)?;
    let episodes = aggregate(inputs, "episode.csv", &mut manifest)?;
    if summary.is_none() && episodes.is_none() {
        return Err(Error::invalid("no summary.csv or episode.csv under the report inputs"));
    }
    if let Some(s) = summary {
        atomic_write(&out.join("summary.csv"), s.as_bytes())?;
    }
    if let Some(e) = episodes {
        atomic_write(&out.join("episodes.csv"), e.as_bytes())?;
    }
    let listed: String = inputs
        .iter()
        .map(|p| format!("input = {}\n", p.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()))
        .collect();
    finish(out, "report", &listed, manifest)
}

/// The two navigation scenarios of a full run, built on the pipeline's world
/// parameters with their own seed.
pub fn nav_scenarios(cfg: &PipelineConfig) -> Vec<(&'static str, Scenario)> {
    let seed = derive_seed(cfg.root_seed, "world-nav");
    let base = |world: ScenarioConfig| {
        let d = Scenario::default();
        Scenario {
            corridor: d.corridor.min(world.corridor_count().saturating_sub(1)),
            goal_x: world.row_length,
            theta_free: cfg.theta_free,
            forward: crate::navsim::ForwardStopParams::for_robot(&world.robot),
            voxel: crate::voxelfusion::VoxelMapConfig { max_range: world.max_range, ..cfg.voxel },
            world,
            ..d
        }
    };
    let overhung = base(ScenarioConfig { seed, ..cfg.scenario.clone() });
    let walled_world = ScenarioConfig { seed, overhang_fraction: 0.0, ..cfg.scenario.clone() };
    let wall_x = walled_world.row_length / 2.0 + 1.25;
    let walled = Scenario { wall_x: Some(wall_x), ..base(walled_world) };
    vec![("overhung", overhung), ("walled", walled)]
}

/// Every stage in order into one tree: `data`, `masks`, `models`, `eval`,
/// `sim/<scenario>-<mode>` and `report`.
pub fn run(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let (data, mask_dir, models) = (out.join("data"), out.join("masks"), out.join("models"));
    world(cfg, &data)?;
    masks(cfg, &data, &mask_dir)?;
    for t in [TrainTarget::Ssm, TrainTarget::Tem, TrainTarget::Seg4] {
        train(cfg, t, &data, &mask_dir, &models)?;
    }
    calibrate(cfg, &data, &mask_dir, &models)?;
    eval(cfg, &data, &PredictionSource::Models(models.clone()), &out.join("eval"))?;
    for (name, sc) in nav_scenarios(cfg) {
        for mode in [MapMode::Baseline, MapMode::Proposed] {
            let m = (mode == MapMode::Proposed).then_some(models.as_path());
            simulate(&sc, mode, m, &out.join("sim").join(format!("{name}-{}", mode.name())))?;
        }
    }
    report(&[out.join("eval"), out.join("sim")], &out.join("report"))?;
    finish(out, "run", &pipeline_config_text(cfg), Manifest::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.scenario.row_count = 2;
        cfg.scenario.row_length = 2.0;
        for h in [&mut cfg.ssm_hyper, &mut cfg.tem_hyper, &mut cfg.seg_hyper] {
            h.epochs = 3;
            h.samples_per_epoch = 2048;
        }
        cfg
    }

    #[test]
    fn staged_run_matches_in_memory_models() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let (data, m, models) = (dir.path().join("d"), dir.path().join("m"), dir.path().join("k"));
        world(&cfg, &data).unwrap();
        masks(&cfg, &data, &m).unwrap();
        train(&cfg, TrainTarget::Ssm, &data, &m, &models).unwrap();
        train(&cfg, TrainTarget::Tem, &data, &m, &models).unwrap();
        let exp_data = generate(&cfg).unwrap();
        let mds = traversal_masks(&cfg, &exp_data.tem).unwrap();
        let mem = crate::pipeline::train_models(&cfg, &exp_data, &mds).unwrap();
        let ssm = fs::read_to_string(models.join(SSM_CSV)).unwrap();
        assert_eq!(ssm, softmax_csv(&mem.ssm));
        let tem = fs::read_to_string(models.join(TEM_CSV)).unwrap();
        assert_eq!(tem, pu_classifier_csv(&mem.tem));
        assert!(models.join("train-tem.manifest").exists());
        let man = fs::read_to_string(models.join("train-tem.manifest")).unwrap();
        assert!(man.contains("  models/ssm.csv\n") && man.contains("  config\n"));
    }

    #[test]
    fn missing_stage_inputs() {
        let cfg = tiny();
        let dir = tempfile::tempdir().unwrap();
        let err = masks(&cfg, &dir.path().join("nope"), &dir.path().join("o")).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
        let err = simulate(&Scenario::default(), MapMode::Proposed, None, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Uncalibrated));
        assert!(report(&[dir.path().to_path_buf()], &dir.path().join("r")).is_err());
    }

    #[test]
    fn nav_scenarios_follow_pipeline_world() {
        let cfg = tiny();
        let sc = nav_scenarios(&cfg);
        assert_eq!(sc[0].1.goal_x, 2.0);
        assert_eq!(sc[1].1.wall_x, Some(2.25));
        assert_eq!(sc[1].1.world.overhang_fraction, 0.0);
        assert_eq!(sc[0].1.world.seed, sc[1].1.world.seed);
        assert_eq!(sc[0].1.corridor, 0);
        assert!(sc.iter().all(|(_, s)| s.validate().is_ok()));
    }
}
