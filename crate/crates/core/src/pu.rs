//! Positive-unlabeled learning with the selected-completely-at-random
//! assumption.
//!
//! A logistic model `g(x) ≈ P(s=1 | x)` is fit to labeled-vs-unlabeled data.
//! The label frequency `c = P(s=1 | y=1)` is estimated as the mean of `g`
//! over labeled positives, and `g / c` (clipped to 1) is
//! the corrected positive-class posterior.

use crate::error::{Error, Result};
use crate::optim::{minimize, Standardizer, TrainHyper};

const PROB_EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic model over raw (unstandardized) inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LabelModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// `g(x)`, kept strictly inside (0, 1).
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x)).clamp(PROB_EPS, 1.0 - PROB_EPS)
    }

    pub fn predict_many(&self, x: &[f64]) -> Vec<f64> {
        x.chunks_exact(self.dim()).map(|r| self.predict(r)).collect()
    }
}

/// Label model plus the estimated label frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PuClassifier {
    pub label_model: LabelModel,
    pub c: f64,
}

impl PuClassifier {
    pub fn new(label_model: LabelModel, c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::invalid(format!("label frequency {c} outside (0, 1]")));
        }
        Ok(Self { label_model, c })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        (self.label_model.predict(x) / self.c).min(1.0)
    }
}

/// Mean binary cross-entropy plus `l2/2 · ||w||²` over the given rows, with
/// its gradient. Returns `(loss, grad_w, grad_b)`.
pub fn logistic_loss_grad(model: &LabelModel, x: &[f64], s: &[u8], rows: &[usize], l2: f64) -> (f64, Vec<f64>, f64) {
    let d = model.dim();
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    let mut loss = 0.0;
    for &i in rows {
        let xi = &x[i * d..(i + 1) * d];
        let z = model.logit(xi);
        let y = f64::from(s[i]);
        loss += softplus(z) - y * z;
        let err = sigmoid(z) - y;
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += err * v;
        }
        gb += err;
    }
    let n = rows.len().max(1) as f64;
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    (loss / n + reg, gw, gb / n)
}

/// Gradient of the same objective for packed parameters `[w ‖ b]`,
/// accumulated into a zeroed buffer. Skips the loss for speed.
fn logistic_grad_into(params: &[f64], x: &[f64], s: &[u8], rows: &[usize], l2: f64, g: &mut [f64]) {
    let d = params.len() - 1;
    let (w, b) = (&params[..d], params[d]);
    for &i in rows {
        let xi = &x[i * d..(i + 1) * d];
        let z = w.iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b;
        let err = sigmoid(z) - f64::from(s[i]);
        for (gj, v) in g[..d].iter_mut().zip(xi) {
            *gj += err * v;
        }
        g[d] += err;
    }
    let n = rows.len().max(1) as f64;
    for (gj, wj) in g[..d].iter_mut().zip(w) {
        *gj = *gj / n + l2 * wj;
    }
    g[d] /= n;
}

fn check_xy(x: &[f64], dim: usize, n: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    if x.len() != n * dim {
        return Err(Error::Shape(format!("{} values for {n} rows of dimension {dim}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    Ok(())
}

/// Fits `g` by minimizing the regularized cross-entropy on standardized
/// inputs; the result is expressed in raw coordinates.
pub fn fit_label_model(x: &[f64], dim: usize, s: &[u8], hyper: &TrainHyper, seed: u64) -> Result<LabelModel> {
    hyper.validate()?;
    if s.is_empty() {
        return Err(Error::invalid("no training samples"));
    }
    check_xy(x, dim, s.len())?;
    if s.iter().any(|&v| v > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    let positives = s.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == s.len() {
        return Err(Error::degenerate("both labeled and unlabeled samples are required"));
    }
    let st = Standardizer::fit(x, dim);
    let z = st.apply(x);
    let mut params = vec![0.0; dim + 1];
    minimize(&mut params, s.len(), hyper, seed, "label-model", |p, rows, g| {
        logistic_grad_into(p, &z, s, rows, hyper.l2, g);
    });
    let (weights, bias) = st.unfold(&params[..dim], params[dim]);
    Ok(LabelModel { weights, bias })
}

/// Mean of `g` over labeled positives.
pub fn estimate_c(model: &LabelModel, labeled: &[f64]) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::degenerate("no labeled positives to estimate the label frequency"));
    }
    check_xy(labeled, model.dim(), labeled.len() / model.dim().max(1))?;
    let g = model.predict_many(labeled);
    Ok(g.iter().sum::<f64>() / g.len() as f64)
}

/// `min(g / c, 1)`.
pub fn correct(g: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::invalid(format!("label frequency {c} outside (0, 1]")));
    }
    Ok((g / c).min(1.0))
}
