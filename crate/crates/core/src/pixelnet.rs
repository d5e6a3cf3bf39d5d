//! Per-pixel classifiers: a softmax semantic classifier trained on noisy
//! pseudo-labels, the traversability head (PU logistic over local features
//! built from the frozen semantic classifier), and a four-class baseline
//! that treats "traversable plant" as an ordinary segmentation class.

use rand::Rng;

use crate::error::{Error, Result};
use crate::optim::{minimize, Standardizer, TrainHyper};
use crate::pu::{estimate_c, fit_label_model, PuClassifier};
use crate::seed::rng_for;
use crate::world::{Class, Frame, VOID};

/// Class indices of the four-class baseline.
pub const SEG4_TRAV_PLANT: u8 = 0;
pub const SEG4_OTHER_PLANT: u8 = 1;
pub const SEG4_ARTIFICIAL: u8 = 2;
pub const SEG4_GROUND: u8 = 3;

/// Linear softmax classifier, weights stored class-major (`K × D`).
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self { classes, dim, weights: vec![0.0; classes * dim], bias: vec![0.0; classes] }
    }

    pub fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.weights[k * self.dim..(k + 1) * self.dim];
            *o = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias[k];
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        self.logits_into(x, &mut out);
        out
    }

    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        total += *v;
    }
    z.iter_mut().for_each(|v| *v /= total);
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over the non-void rows listed, plus `l2/2 · ||W||²`.
/// Returns the loss and gradients for weights and biases.
pub fn softmax_loss_grad(
    model: &SoftmaxClassifier,
    x: &[f64],
    labels: &[u8],
    rows: &[usize],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (k, d) = (model.classes, model.dim);
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut p = vec![0.0; k];
    let mut loss = 0.0;
    let mut used = 0usize;
    for &i in rows {
        let y = labels[i];
        if y == VOID {
            continue;
        }
        used += 1;
        let xi = &x[i * d..(i + 1) * d];
        model.logits_into(xi, &mut p);
        let m = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + p.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        loss += lse - p[y as usize];
        for (c, pc) in p.iter_mut().enumerate() {
            let err = (*pc - lse).exp() - f64::from(u8::from(c == y as usize));
            gb[c] += err;
            for (g, v) in gw[c * d..(c + 1) * d].iter_mut().zip(xi) {
                *g += err * v;
            }
        }
    }
    let n = used.max(1) as f64;
    gb.iter_mut().for_each(|g| *g /= n);
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    let reg = model.weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    (loss / n + reg, gw, gb)
}

/// Gradient for packed parameters `[W ‖ b]` over non-void rows, accumulated
/// into a zeroed buffer. Skips the loss for speed.
#[allow(clippy::too_many_arguments)]
fn softmax_grad_into(
    params: &[f64],
    classes: usize,
    x: &[f64],
    labels: &[u8],
    rows: &[usize],
    l2: f64,
    p: &mut [f64],
    g: &mut [f64],
) {
    let kd = params.len() - classes;
    let d = kd / classes;
    let (w, b) = params.split_at(kd);
    let mut used = 0usize;
    for &i in rows {
        let y = labels[i];
        if y == VOID {
            continue;
        }
        used += 1;
        let xi = &x[i * d..(i + 1) * d];
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = w[c * d..(c + 1) * d].iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b[c];
        }
        softmax_in_place(p);
        p[y as usize] -= 1.0;
        for (c, &err) in p.iter().enumerate() {
            g[kd + c] += err;
            for (gj, v) in g[c * d..(c + 1) * d].iter_mut().zip(xi) {
                *gj += err * v;
            }
        }
    }
    let n = used.max(1) as f64;
    for (gj, wj) in g[..kd].iter_mut().zip(w) {
        *gj = *gj / n + l2 * wj;
    }
    g[kd..].iter_mut().for_each(|v| *v /= n);
}

/// Trains a softmax classifier on standardized inputs; void-labeled rows
/// are ignored.
pub fn train_softmax(
    x: &[f64],
    dim: usize,
    labels: &[u8],
    classes: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<SoftmaxClassifier> {
    hyper.validate()?;
    if x.len() != labels.len() * dim || dim == 0 {
        return Err(Error::Shape(format!("{} values for {} labels of dimension {dim}", x.len(), labels.len())));
    }
    let mut counts = vec![0usize; classes];
    for &y in labels {
        if y != VOID {
            let slot = counts
                .get_mut(y as usize)
                .ok_or_else(|| Error::invalid(format!("label {y} outside {classes} classes")))?;
            *slot += 1;
        }
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::degenerate(format!("class {missing} has no labeled pixels")));
    }
    let st = Standardizer::fit(x, dim);
    let z = st.apply(x);
    let labeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != VOID).collect();
    let zl: Vec<f64> = labeled.iter().flat_map(|&i| z[i * dim..(i + 1) * dim].iter().copied()).collect();
    let yl: Vec<u8> = labeled.iter().map(|&i| labels[i]).collect();
    let kd = classes * dim;
    let mut params = vec![0.0; kd + classes];
    let mut scratch = vec![0.0; classes];
    minimize(&mut params, yl.len(), hyper, seed, "softmax", |p, rows, g| {
        softmax_grad_into(p, classes, &zl, &yl, rows, hyper.l2, &mut scratch, g);
    });
    let mut model = SoftmaxClassifier::zeros(classes, dim);
    for c in 0..classes {
        let (w, b) = st.unfold(&params[c * dim..(c + 1) * dim], params[kd + c]);
        model.weights[c * dim..(c + 1) * dim].copy_from_slice(&w);
        model.bias[c] = b;
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoLabelNoise {
    pub flip_rate: f64,
    pub void_rate: f64,
}

impl PseudoLabelNoise {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.flip_rate)
            && (0.0..1.0).contains(&self.void_rate)
            && self.flip_rate + self.void_rate < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config("pseudo-label rates must lie in [0, 1) and sum below 1"))
        }
    }
}

/// Simulated pseudo-labels: each non-void pixel independently becomes void
/// with probability `void_rate`, otherwise switches to a uniformly chosen
/// other class with probability `flip_rate`.
pub fn corrupt_labels(gt: &[u8], noise: &PseudoLabelNoise, seed: u64) -> Result<Vec<u8>> {
    noise.validate()?;
    let mut rng = rng_for(seed, "pseudo-labels");
    let k = Class::COUNT as u8;
    Ok(gt
        .iter()
        .map(|&y| {
            if y == VOID {
                return VOID;
            }
            if rng.random::<f64>() < noise.void_rate {
                VOID
            } else if rng.random::<f64>() < noise.flip_rate / (1.0 - noise.void_rate) {
                let shift = rng.random_range(1..k);
                (y + shift) % k
            } else {
                y
            }
        })
        .collect())
}

/// Raw frame features as `f64` rows.
pub fn frame_features(frame: &Frame) -> Vec<f64> {
    frame.features.iter().map(|&v| f64::from(v)).collect()
}

pub fn train_ssm(frames: &[Frame], pseudo: &[Vec<u8>], hyper: &TrainHyper, seed: u64) -> Result<SoftmaxClassifier> {
    let (x, dim, y) = stack_labeled(frames, pseudo)?;
    train_softmax(&x, dim, &y, Class::COUNT, hyper, seed)
}

/// Features and labels of all non-void pixels across frames.
fn stack_labeled(frames: &[Frame], labels: &[Vec<u8>]) -> Result<(Vec<f64>, usize, Vec<u8>)> {
    let dim = frames.first().ok_or_else(|| Error::invalid("no training frames"))?.feature_dim;
    if frames.len() != labels.len() {
        return Err(Error::Shape(format!("{} frames but {} label images", frames.len(), labels.len())));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (f, l) in frames.iter().zip(labels) {
        if f.feature_dim != dim || l.len() != f.pixel_count() {
            return Err(Error::Shape(format!("frame {} does not match its labels", f.frame_id)));
        }
        for (i, &lab) in l.iter().enumerate() {
            if lab != VOID {
                x.extend(f.pixel_features(i).iter().map(|&v| f64::from(v)));
                y.push(lab);
            }
        }
    }
    Ok((x, dim, y))
}

/// Per-pixel class probabilities (`H·W × 3`, row-major) and argmax labels.
pub fn predict_ssm(frame: &Frame, ssm: &SoftmaxClassifier) -> (Vec<f64>, Vec<u8>) {
    let n = frame.pixel_count();
    let mut probs = Vec::with_capacity(n * ssm.classes);
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![0.0; frame.feature_dim];
    for i in 0..n {
        for (d, v) in x.iter_mut().zip(frame.pixel_features(i)) {
            *d = f64::from(*v);
        }
        let p = ssm.proba(&x);
        labels.push(argmax(&p) as u8);
        probs.extend_from_slice(&p);
    }
    (probs, labels)
}

/// Traversability-head inputs for every pixel of a frame:
/// `[raw F ‖ semantic logits ‖ 3×3 mean of raw F]`, with edge replication.
/// The neighborhood mean only pools pixels that have a depth return and the
/// same semantic argmax as the center, so object boundaries do not bleed
/// into it. A pixel with no such neighbor uses its own features.
pub fn tem_inputs(frame: &Frame, ssm: &SoftmaxClassifier) -> Vec<f64> {
    let (w, h, f) = (frame.width(), frame.height(), frame.feature_dim);
    let k = ssm.classes;
    let d = 2 * f + k;
    let raw = frame_features(frame);
    let mut out = vec![0.0; w * h * d];
    let mut label = vec![0usize; w * h];
    for i in 0..w * h {
        let row = &mut out[i * d..(i + 1) * d];
        let xi = &raw[i * f..(i + 1) * f];
        row[..f].copy_from_slice(xi);
        ssm.logits_into(xi, &mut row[f..f + k]);
        label[i] = argmax(&row[f..f + k]);
    }
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let mean = &mut out[i * d + f + k..(i + 1) * d];
            let mut n = 0usize;
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    let vv = (v as i64 + dv).clamp(0, h as i64 - 1) as usize;
                    let uu = (u as i64 + du).clamp(0, w as i64 - 1) as usize;
                    let j = vv * w + uu;
                    if frame.depth[j] <= 0.0 || label[j] != label[i] {
                        continue;
                    }
                    n += 1;
                    for (m, x) in mean.iter_mut().zip(&raw[j * f..(j + 1) * f]) {
                        *m += x;
                    }
                }
            }
            if n == 0 {
                mean.copy_from_slice(&raw[i * f..(i + 1) * f]);
            } else {
                mean.iter_mut().for_each(|m| *m /= n as f64);
            }
        }
    }
    out
}

/// Fits the traversability head with masks as PU labels. The label
/// frequency comes from the labeled training pixels unless a held-out
/// fraction of frames is requested, in which case the last frames are kept
/// out of fitting and used to estimate it.
pub fn train_tem(
    frames: &[Frame],
    masks: &[Vec<u8>],
    ssm: &SoftmaxClassifier,
    hyper: &TrainHyper,
    seed: u64,
    holdout_fraction: f64,
) -> Result<PuClassifier> {
    if frames.is_empty() {
        return Err(Error::invalid("no training frames"));
    }
    if frames.len() != masks.len() {
        return Err(Error::Shape(format!("{} frames but {} masks", frames.len(), masks.len())));
    }
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::config("held-out fraction must lie in [0, 1)"));
    }
    if masks.iter().flatten().all(|&m| m == 0) {
        return Err(Error::degenerate("traversability masks have no positive pixels"));
    }
    let held = ((frames.len() as f64) * holdout_fraction).round() as usize;
    let held = held.min(frames.len() - 1);
    let split = frames.len() - held;
    let dim = 2 * frames[0].feature_dim + ssm.classes;
    let (x, s) = stack_tem(&frames[..split], &masks[..split], ssm)?;
    let model = fit_label_model(&x, dim, &s, hyper, seed)?;
    let c = if held == 0 {
        estimate_c(&model, &positives(&x, dim, &s))?
    } else {
        let (hx, hs) = stack_tem(&frames[split..], &masks[split..], ssm)?;
        estimate_c(&model, &positives(&hx, dim, &hs))?
    };
    PuClassifier::new(model, c)
}

fn stack_tem(frames: &[Frame], masks: &[Vec<u8>], ssm: &SoftmaxClassifier) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut x = Vec::new();
    let mut s = Vec::new();
    for (f, m) in frames.iter().zip(masks) {
        if m.len() != f.pixel_count() || f.feature_dim != frames[0].feature_dim {
            return Err(Error::Shape(format!("frame {} does not match its mask", f.frame_id)));
        }
        x.extend(tem_inputs(f, ssm));
        s.extend(m.iter().map(|&v| u8::from(v != 0)));
    }
    Ok((x, s))
}

fn positives(x: &[f64], dim: usize, s: &[u8]) -> Vec<f64> {
    s.iter().enumerate().filter(|(_, &v)| v == 1).flat_map(|(i, _)| x[i * dim..(i + 1) * dim].iter().copied()).collect()
}

/// Corrected traversability probability per pixel.
pub fn predict_trav(frame: &Frame, ssm: &SoftmaxClassifier, tem: &PuClassifier) -> Vec<f64> {
    let d = 2 * frame.feature_dim + ssm.classes;
    tem_inputs(frame, ssm).chunks_exact(d).map(|r| tem.predict(r)).collect()
}

/// Four-class labels: plant pseudo-labels split by the traversability mask.
pub fn seg4_labels(pseudo: &[u8], mask: &[u8]) -> Vec<u8> {
    pseudo
        .iter()
        .zip(mask)
        .map(|(&y, &m)| match Class::from_index(y as usize) {
            Some(Class::Plant) if m != 0 => SEG4_TRAV_PLANT,
            Some(Class::Plant) => SEG4_OTHER_PLANT,
            Some(Class::Artificial) => SEG4_ARTIFICIAL,
            Some(Class::Ground) => SEG4_GROUND,
            None => VOID,
        })
        .collect()
}

pub fn train_seg_with_trav_class(
    frames: &[Frame],
    pseudo: &[Vec<u8>],
    masks: &[Vec<u8>],
    hyper: &TrainHyper,
    seed: u64,
) -> Result<SoftmaxClassifier> {
    if pseudo.len() != masks.len() {
        return Err(Error::Shape(format!("{} label images but {} masks", pseudo.len(), masks.len())));
    }
    let labels: Vec<Vec<u8>> = pseudo.iter().zip(masks).map(|(p, m)| seg4_labels(p, m)).collect();
    let (x, dim, y) = stack_labeled(frames, &labels)?;
    train_softmax(&x, dim, &y, 4, hyper, seed)
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, StandardNormal};

    use super::*;
    use crate::geometry::{CameraIntrinsics, Pose};

    fn blob_data(seed: u64, n: usize, sep: f64) -> (Vec<f64>, Vec<u8>) {
        let mut rng = rng_for(seed, "blobs");
        let mut x = Vec::with_capacity(n * 2);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = (i % 3) as u8;
            let ang = f64::from(c) * 2.0 * std::f64::consts::PI / 3.0;
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.extend_from_slice(&[sep * ang.cos() + a, sep * ang.sin() + b]);
            y.push(c);
        }
        (x, y)
    }

    fn accuracy(m: &SoftmaxClassifier, x: &[f64], y: &[u8]) -> f64 {
        let hits = x.chunks(m.dim).zip(y).filter(|(r, &t)| argmax(&m.proba(r)) == t as usize).count();
        hits as f64 / y.len() as f64
    }

    const FAST: TrainHyper =
        TrainHyper { learning_rate: 0.05, epochs: 40, batch_size: 256, l2: 1e-4, momentum: 0.9, samples_per_epoch: 0 };

    #[test]
    fn softmax_gradient_matches_central_differences() {
        let (x, mut y) = blob_data(1, 30, 1.0);
        y[4] = VOID;
        let rows: Vec<usize> = (0..30).collect();
        let mut rng = rng_for(2, "init");
        let mut m = SoftmaxClassifier::zeros(3, 2);
        m.weights.iter_mut().chain(m.bias.iter_mut()).for_each(|v| *v = StandardNormal.sample(&mut rng));
        let (_, gw, gb) = softmax_loss_grad(&m, &x, &y, &rows, 0.01);
        let h = 1e-5;
        for j in 0..9 {
            let eval = |delta: f64| {
                let mut m2 = m.clone();
                if j < 6 {
                    m2.weights[j] += delta;
                } else {
                    m2.bias[j - 6] += delta;
                }
                softmax_loss_grad(&m2, &x, &y, &rows, 0.01).0
            };
            let num = (eval(h) - eval(-h)) / (2.0 * h);
            let ana = if j < 6 { gw[j] } else { gb[j - 6] };
            assert!((num - ana).abs() <= 1e-4 * ana.abs().max(1e-3), "param {j}: {num} vs {ana}");
        }
    }

    #[test]
    fn packed_gradient_matches_reference() {
        let (x, mut y) = blob_data(6, 24, 1.5);
        y[3] = VOID;
        let rows: Vec<usize> = (0..24).collect();
        let mut rng = rng_for(7, "init");
        let mut m = SoftmaxClassifier::zeros(3, 2);
        m.weights.iter_mut().chain(m.bias.iter_mut()).for_each(|v| *v = StandardNormal.sample(&mut rng));
        let (_, gw, gb) = softmax_loss_grad(&m, &x, &y, &rows, 0.02);
        let packed: Vec<f64> = m.weights.iter().chain(&m.bias).copied().collect();
        let mut g = vec![0.0; 9];
        softmax_grad_into(&packed, 3, &x, &y, &rows, 0.02, &mut [0.0; 3], &mut g);
        for j in 0..6 {
            assert!((g[j] - gw[j]).abs() < 1e-12);
        }
        for c in 0..3 {
            assert!((g[6 + c] - gb[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_classes_are_learned() {
        let (x, y) = blob_data(3, 3000, 8.0);
        let m = train_softmax(&x, 2, &y, 3, &FAST, 1).unwrap();
        let (hx, hy) = blob_data(4, 3000, 8.0);
        assert!(accuracy(&m, &hx, &hy) >= 0.99);
    }

    #[test]
    fn symmetric_label_noise_is_tolerated() {
        for seed in 0..5 {
            let (x, y) = blob_data(10 + seed, 6000, 8.0);
            let noisy = corrupt_labels(&y, &PseudoLabelNoise { flip_rate: 0.3, void_rate: 0.0 }, seed).unwrap();
            let m = train_softmax(&x, 2, &noisy, 3, &FAST, seed).unwrap();
            let (hx, hy) = blob_data(100 + seed, 3000, 8.0);
            assert!(accuracy(&m, &hx, &hy) >= 0.95);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (x, y) = blob_data(5, 600, 2.0);
        let m = train_softmax(&x, 2, &y, 3, &FAST, 1).unwrap();
        for r in x.chunks(2) {
            assert!((m.proba(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_class_is_degenerate() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        assert!(matches!(train_softmax(&x, 1, &[0, 1, 0, VOID], 3, &FAST, 0), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn corrupt_labels_rates() {
        assert_eq!(
            corrupt_labels(&[0, 1, 2, VOID], &PseudoLabelNoise { flip_rate: 0.0, void_rate: 0.0 }, 1).unwrap(),
            vec![0, 1, 2, VOID]
        );
        let n = 1_000_000;
        let gt: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
        let noisy = corrupt_labels(&gt, &PseudoLabelNoise { flip_rate: 0.1, void_rate: 0.2 }, 9).unwrap();
        let void = noisy.iter().filter(|&&v| v == VOID).count() as f64 / n as f64;
        let flip = noisy.iter().zip(&gt).filter(|(a, b)| **a != VOID && a != b).count() as f64 / n as f64;
        assert!((void - 0.2).abs() <= 0.003, "void {void}");
        assert!((flip - 0.1).abs() <= 0.003, "flip {flip}");
        let all_void = corrupt_labels(&[VOID; 50], &PseudoLabelNoise { flip_rate: 0.5, void_rate: 0.4 }, 2).unwrap();
        assert!(all_void.iter().all(|&v| v == VOID));
        assert!(corrupt_labels(&gt[..3], &PseudoLabelNoise { flip_rate: 0.6, void_rate: 0.4 }, 0).is_err());
    }

    fn tiny_frame(w: usize, h: usize, f: usize) -> Frame {
        let intr = CameraIntrinsics::new(10.0, 10.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap();
        let n = w * h;
        Frame {
            frame_id: 0,
            intrinsics: intr,
            feature_dim: f,
            features: (0..n * f).map(|i| i as f32).collect(),
            depth: vec![1.0; n],
            pose: Pose::identity(),
            gt_class: vec![2; n],
            gt_trav: vec![0; n],
        }
    }

    #[test]
    fn tem_input_layout_and_borders() {
        let ssm = SoftmaxClassifier::zeros(3, 2);
        let one = tiny_frame(1, 1, 2);
        let t = tem_inputs(&one, &ssm);
        assert_eq!(t.len(), 2 * 2 + 3);
        // A single pixel replicates itself into the whole neighbourhood.
        assert!((t[5] - 0.0).abs() < 1e-12 && (t[6] - 1.0).abs() < 1e-12);

        let f3 = tiny_frame(3, 3, 1);
        let t = tem_inputs(&f3, &ssm);
        let d = 5;
        // Center pixel: plain mean of 0..9.
        assert!((t[4 * d + 4] - 4.0).abs() < 1e-12);
        // Corner (0,0) with replication: rows {0,0,1} x cols {0,0,1}.
        let corner = (4.0 * 0.0 + 2.0 * 1.0 + 2.0 * 3.0 + 4.0) / 9.0;
        assert!((t[4] - corner).abs() < 1e-12);

        // Void neighbours drop out of the mean; an isolated pixel keeps its own value.
        let mut holes = tiny_frame(3, 3, 1);
        for j in [0, 1, 2, 3, 5, 6, 7, 8] {
            holes.depth[j] = 0.0;
        }
        let t = tem_inputs(&holes, &ssm);
        assert!((t[4 * d + 4] - 4.0).abs() < 1e-12);
        holes.depth[4] = 0.0;
        holes.depth[8] = 1.0;
        let t = tem_inputs(&holes, &ssm);
        assert!((t[4 * d + 4] - 8.0).abs() < 1e-12);
        assert!((t[4] - 0.0).abs() < 1e-12);

        // Neighbours with a different semantic argmax are left out too.
        let mut split = SoftmaxClassifier::zeros(3, 1);
        split.weights = vec![0.0, 1.0, -1.0];
        let t = tem_inputs(&f3, &split);
        assert!((t[4 * d + 4] - 4.5).abs() < 1e-12);
        assert!((t[4] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn seg4_relabeling() {
        assert_eq!(
            seg4_labels(&[0, 0, 1, 2, VOID], &[1, 0, 1, 1, 1]),
            vec![SEG4_TRAV_PLANT, SEG4_OTHER_PLANT, SEG4_ARTIFICIAL, SEG4_GROUND, VOID]
        );
    }

    #[test]
    fn tem_requires_positive_masks() {
        let ssm = SoftmaxClassifier::zeros(3, 2);
        let f = tiny_frame(3, 3, 2);
        let r = train_tem(&[f], &[vec![0; 9]], &ssm, &FAST, 0, 0.0);
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }
}
