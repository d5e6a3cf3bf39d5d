//! Dataset trees and model files.
//!
//! A split directory holds `poses.csv` (robot and camera pose per frame,
//! as row-major rotation entries plus translation) and
//! `frames/NNNNNN.{feat,depth,class,trav}.rast`, with an optional
//! `.pseudo.rast` of noisy labels. Masks and predictions live in sibling
//! trees keyed by the same frame stems.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;

use super::raster::{read_raster, write_raster, Raster};
use super::read_text;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose, Vec3};
use crate::pipeline::{Predictions, Split};
use crate::pixelnet::SoftmaxClassifier;
use crate::pu::{LabelModel, PuClassifier};
use crate::voxelfusion::{ClassLikelihood, TravLikelihood};
use crate::world::Frame;

pub fn frame_stem(id: u32) -> String {
    format!("{id:06}")
}

const POSE_COLS: [&str; 12] = ["r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "tx", "ty", "tz"];

fn pose_fields(p: &Pose) -> [f64; 12] {
    let r = p.rotation();
    let t = p.translation();
    [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)], t.x, t.y, t.z]
}

fn pose_from(v: &[f64]) -> Result<Pose> {
    let r = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
    Pose::new(r, Vec3::new(v[9], v[10], v[11]))
}

pub fn poses_csv(split: &Split) -> String {
    let mut s = String::from("frame_id");
    for who in ["robot", "camera"] {
        for c in POSE_COLS {
            let _ = write!(s, ",{who}_{c}");
        }
    }
    s.push('\n');
    for (f, rp) in split.frames.iter().zip(&split.robot_poses) {
        let _ = write!(s, "{}", f.frame_id);
        for v in pose_fields(rp).iter().chain(&pose_fields(&f.pose)) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Numeric CSV body after a header that must match `header` exactly.
fn csv_rows(text: &str, path: &Path, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let got = lines.next().ok_or_else(|| Error::parse(path, "empty file"))?;
    if got.trim_end() != header {
        return Err(Error::parse(path, format!("unexpected header `{got}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let row: Vec<f64> = l
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, format!("line {}: not a number", n + 2)))?;
            if row.len() != width {
                return Err(Error::parse(path, format!("line {}: {} columns, expected {width}", n + 2, row.len())));
            }
            Ok(row)
        })
        .collect()
}

fn header_of(text: &str) -> &str {
    text.lines().next().unwrap_or("").trim_end()
}

fn stem_path(dir: &Path, id: u32, kind: &str) -> std::path::PathBuf {
    dir.join(format!("{}.{kind}.rast", frame_stem(id)))
}

pub fn write_split(dir: &Path, split: &Split, pseudo: Option<&[Vec<u8>]>) -> Result<()> {
    super::atomic_write(&dir.join("poses.csv"), poses_csv(split).as_bytes())?;
    let frames = dir.join("frames");
    for (i, f) in split.frames.iter().enumerate() {
        let (w, h) = (f.width(), f.height());
        write_raster(
            &stem_path(&frames, f.frame_id, "feat"),
            &Raster::from_f32(w, h, f.feature_dim, f.features.clone())?,
        )?;
        write_raster(&stem_path(&frames, f.frame_id, "depth"), &Raster::from_f32(w, h, 1, f.depth.clone())?)?;
        write_raster(&stem_path(&frames, f.frame_id, "class"), &Raster::from_u8(w, h, 1, f.gt_class.clone())?)?;
        write_raster(&stem_path(&frames, f.frame_id, "trav"), &Raster::from_u8(w, h, 1, f.gt_trav.clone())?)?;
        if let Some(p) = pseudo {
            write_raster(&stem_path(&frames, f.frame_id, "pseudo"), &Raster::from_u8(w, h, 1, p[i].clone())?)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SplitOnDisk {
    pub split: Split,
    pub pseudo: Option<Vec<Vec<u8>>>,
}

fn expect_shape(r: &Raster, path: &Path, intr: &CameraIntrinsics, channels: usize) -> Result<()> {
    if r.width as usize != intr.width || r.height as usize != intr.height || r.channels as usize != channels {
        return Err(Error::Shape(format!(
            "{}: {}x{}x{} raster, expected {}x{}x{channels}",
            path.display(),
            r.width,
            r.height,
            r.channels,
            intr.width,
            intr.height
        )));
    }
    Ok(())
}

fn load_f32(path: &Path, intr: &CameraIntrinsics, channels: usize) -> Result<Vec<f32>> {
    let r = read_raster(path)?;
    expect_shape(&r, path, intr, channels)?;
    r.as_f32().map(<[f32]>::to_vec).ok_or_else(|| Error::Shape(format!("{}: expected float data", path.display())))
}

fn load_u8(path: &Path, intr: &CameraIntrinsics) -> Result<Vec<u8>> {
    let r = read_raster(path)?;
    expect_shape(&r, path, intr, 1)?;
    r.as_u8().map(<[u8]>::to_vec).ok_or_else(|| Error::Shape(format!("{}: expected byte data", path.display())))
}

/// Loads a split written by [`write_split`]. Pseudo-labels are loaded when
/// every frame has them.
pub fn read_split(dir: &Path, intr: &CameraIntrinsics, feature_dim: usize) -> Result<SplitOnDisk> {
    let poses_path = dir.join("poses.csv");
    let text = read_text(&poses_path)?;
    let header = header_of(&text).to_string();
    let rows = csv_rows(&text, &poses_path, &header, 25)?;
    let frames_dir = dir.join("frames");
    let mut split = Split { frames: Vec::new(), robot_poses: Vec::new() };
    let mut pseudo = Vec::new();
    for row in rows {
        if row[0] < 0.0 || row[0] > f64::from(u32::MAX) || row[0].fract() != 0.0 {
            return Err(Error::parse(&poses_path, format!("bad frame id {}", row[0])));
        }
        let id = row[0] as u32;
        let robot = pose_from(&row[1..13])?;
        let camera = pose_from(&row[13..25])?;
        let features = load_f32(&stem_path(&frames_dir, id, "feat"), intr, feature_dim)?;
        let depth = load_f32(&stem_path(&frames_dir, id, "depth"), intr, 1)?;
        let gt_class = load_u8(&stem_path(&frames_dir, id, "class"), intr)?;
        let gt_trav = load_u8(&stem_path(&frames_dir, id, "trav"), intr)?;
        let pp = stem_path(&frames_dir, id, "pseudo");
        if pp.exists() {
            pseudo.push(load_u8(&pp, intr)?);
        }
        let frame =
            Frame { frame_id: id, intrinsics: *intr, feature_dim, features, depth, pose: camera, gt_class, gt_trav };
        frame.check_invariants().map_err(|r| Error::Raster { path: frames_dir.join(frame_stem(id)), reason: r })?;
        split.frames.push(frame);
        split.robot_poses.push(robot);
    }
    let pseudo = (pseudo.len() == split.frames.len() && !pseudo.is_empty()).then_some(pseudo);
    Ok(SplitOnDisk { split, pseudo })
}

pub fn write_masks(dir: &Path, frames: &[Frame], masks: &[Vec<u8>]) -> Result<()> {
    for (f, m) in frames.iter().zip(masks) {
        write_raster(&stem_path(dir, f.frame_id, "mask"), &Raster::from_u8(f.width(), f.height(), 1, m.clone())?)?;
    }
    Ok(())
}

pub fn read_masks(dir: &Path, frames: &[Frame]) -> Result<Vec<Vec<u8>>> {
    frames.iter().map(|f| load_u8(&stem_path(dir, f.frame_id, "mask"), &f.intrinsics)).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Per-frame prediction rasters: `ptrav` and `seg4trav` as floats, `pclass`
/// and `seg4class` as labels. Probabilities are stored in single precision.
pub fn write_predictions(dir: &Path, frames: &[Frame], pred: &Predictions) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        let (w, h) = (f.width(), f.height());
        write_raster(&stem_path(dir, f.frame_id, "ptrav"), &Raster::from_f32(w, h, 1, to_f32(&pred.trav[i]))?)?;
        write_raster(&stem_path(dir, f.frame_id, "pclass"), &Raster::from_u8(w, h, 1, pred.classes[i].clone())?)?;
        write_raster(&stem_path(dir, f.frame_id, "seg4trav"), &Raster::from_f32(w, h, 1, to_f32(&pred.seg4_trav[i]))?)?;
        write_raster(
            &stem_path(dir, f.frame_id, "seg4class"),
            &Raster::from_u8(w, h, 1, pred.seg4_classes[i].clone())?,
        )?;
    }
    Ok(())
}

pub fn read_predictions(dir: &Path, frames: &[Frame]) -> Result<Predictions> {
    let mut out = Predictions { trav: vec![], classes: vec![], seg4_trav: vec![], seg4_classes: vec![] };
    for f in frames {
        let intr = &f.intrinsics;
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
        out.trav.push(widen(load_f32(&stem_path(dir, f.frame_id, "ptrav"), intr, 1)?));
        out.classes.push(load_u8(&stem_path(dir, f.frame_id, "pclass"), intr)?);
        out.seg4_trav.push(widen(load_f32(&stem_path(dir, f.frame_id, "seg4trav"), intr, 1)?));
        out.seg4_classes.push(load_u8(&stem_path(dir, f.frame_id, "seg4class"), intr)?);
    }
    Ok(out)
}

fn weight_header(lead: &str, dim: usize) -> String {
    let mut s = String::from(lead);
    for j in 0..dim {
        let _ = write!(s, ",w{j}");
    }
    s
}

/// One row per class: `class,bias,w0..w{D-1}`.
pub fn softmax_csv(m: &SoftmaxClassifier) -> String {
    let mut s = weight_header("class,bias", m.dim);
    s.push('\n');
    for c in 0..m.classes {
        let _ = write!(s, "{},{}", c, m.bias[c]);
        for w in &m.weights[c * m.dim..(c + 1) * m.dim] {
            let _ = write!(s, ",{w}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_softmax(text: &str, path: &Path) -> Result<SoftmaxClassifier> {
    let header = header_of(text);
    let dim = header.split(',').count().saturating_sub(2);
    if dim == 0 || header != weight_header("class,bias", dim) {
        return Err(Error::parse(path, format!("unexpected header `{header}`")));
    }
    let rows = csv_rows(text, path, header, dim + 2)?;
    if rows.is_empty() {
        return Err(Error::parse(path, "no classes"));
    }
    let mut m = SoftmaxClassifier::zeros(rows.len(), dim);
    for (c, r) in rows.iter().enumerate() {
        if r[0] != c as f64 {
            return Err(Error::parse(path, format!("class rows out of order at {c}")));
        }
        m.bias[c] = r[1];
        m.weights[c * dim..(c + 1) * dim].copy_from_slice(&r[2..]);
    }
    Ok(m)
}

/// Single row: `c,bias,w0..w{D-1}`.
pub fn pu_classifier_csv(m: &PuClassifier) -> String {
    let mut s = weight_header("c,bias", m.label_model.weights.len());
    let _ = write!(s, "\n{},{}", m.c, m.label_model.bias);
    for w in &m.label_model.weights {
        let _ = write!(s, ",{w}");
    }
    s.push('\n');
    s
}

pub fn parse_pu_classifier(text: &str, path: &Path) -> Result<PuClassifier> {
    let header = header_of(text);
    let dim = header.split(',').count().saturating_sub(2);
    if dim == 0 || header != weight_header("c,bias", dim) {
        return Err(Error::parse(path, format!("unexpected header `{header}`")));
    }
    let rows = csv_rows(text, path, header, dim + 2)?;
    let [r] = rows.as_slice() else {
        return Err(Error::parse(path, "expected exactly one row"));
    };
    PuClassifier::new(LabelModel { weights: r[2..].to_vec(), bias: r[1] }, r[0])
}

const CLASS_LIK_HEADER: &str = "true_class,p_plant,p_artificial,p_ground";

pub fn class_likelihood_csv(l: &ClassLikelihood) -> String {
    let mut s = format!("{CLASS_LIK_HEADER}\n");
    for (i, row) in l.m.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", row[0], row[1], row[2]);
    }
    s
}

fn check_stochastic(row: &[f64], path: &Path) -> Result<()> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|v| !(v.is_finite() && *v > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::parse(path, "likelihood rows must be positive and sum to 1"));
    }
    Ok(())
}

/// Loads stored values as-is (no re-flooring) so a reload is bit-identical.
pub fn parse_class_likelihood(text: &str, path: &Path) -> Result<ClassLikelihood> {
    let rows = csv_rows(text, path, CLASS_LIK_HEADER, 4)?;
    if rows.len() != 3 || rows.iter().enumerate().any(|(i, r)| r[0] != i as f64) {
        return Err(Error::parse(path, "expected rows for classes 0, 1, 2"));
    }
    let mut m = [[0.0; 3]; 3];
    for (i, r) in rows.iter().enumerate() {
        check_stochastic(&r[1..], path)?;
        m[i].copy_from_slice(&r[1..]);
    }
    Ok(ClassLikelihood { m })
}

fn trav_header(bins: usize) -> String {
    let mut s = String::from("traversable");
    for b in 0..bins {
        let _ = write!(s, ",b{b}");
    }
    s
}

pub fn trav_likelihood_csv(l: &TravLikelihood) -> String {
    let mut s = trav_header(l.bins());
    s.push('\n');
    for (tau, row) in l.t.iter().enumerate() {
        let _ = write!(s, "{tau}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_trav_likelihood(text: &str, path: &Path) -> Result<TravLikelihood> {
    let header = header_of(text);
    let bins = header.split(',').count().saturating_sub(1);
    if bins == 0 || header != trav_header(bins) {
        return Err(Error::parse(path, format!("unexpected header `{header}`")));
    }
    let rows = csv_rows(text, path, header, bins + 1)?;
    if rows.len() != 2 || rows[0][0] != 0.0 || rows[1][0] != 1.0 {
        return Err(Error::parse(path, "expected rows for states 0 and 1"));
    }
    for r in &rows {
        check_stochastic(&r[1..], path)?;
    }
    Ok(TravLikelihood { t: [rows[0][1..].to_vec(), rows[1][1..].to_vec()] })
}

/// Reads `path` and parses it with one of the model parsers.
pub fn read_csv_model<T>(path: &Path, parse: fn(&str, &Path) -> Result<T>) -> Result<T> {
    parse(&read_text(path)?, path)
}
