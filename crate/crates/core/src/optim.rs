//! Mini-batch gradient descent with heavy-ball momentum and per-feature
//! standardization, shared by the logistic and softmax trainers.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub momentum: f64,
    /// Samples drawn (without replacement) per epoch; 0 uses every sample.
    pub samples_per_epoch: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 200, batch_size: 4096, l2: 1e-4, momentum: 0.9, samples_per_epoch: 32_768 }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::config("epochs and batch size must be at least 1"));
        }
        if !(self.l2 >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("l2 must be non-negative and momentum in [0, 1)"));
        }
        Ok(())
    }
}

/// Column means and (population) standard deviations of a row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[f64], dim: usize) -> Self {
        let n = (x.len() / dim).max(1) as f64;
        let mut mean = vec![0.0; dim];
        for row in x.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in x.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var.iter().map(|s| (s / n).sqrt()).map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let dim = self.mean.len();
        let mut out = Vec::with_capacity(x.len());
        for row in x.chunks_exact(dim) {
            for ((v, m), s) in row.iter().zip(&self.mean).zip(&self.scale) {
                out.push((v - m) / s);
            }
        }
        out
    }

    /// Maps a linear function `w·z + b` of standardized inputs back to raw
    /// inputs.
    pub fn unfold(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = w.iter().zip(&self.scale).map(|(w, s)| w / s).collect();
        let shift: f64 = raw.iter().zip(&self.mean).map(|(w, m)| w * m).sum();
        (raw, b - shift)
    }
}

/// Runs the descent loop. `grad` receives the parameters and a batch of row
/// indices and writes the batch objective gradient into its output buffer.
pub fn minimize<F>(params: &mut [f64], n: usize, hyper: &TrainHyper, seed: u64, label: &str, mut grad: F)
where
    F: FnMut(&[f64], &[usize], &mut [f64]),
{
    let mut rng = rng_for(seed, label);
    let mut order: Vec<usize> = (0..n).collect();
    let mut velocity = vec![0.0; params.len()];
    let mut g = vec![0.0; params.len()];
    let per_epoch = if hyper.samples_per_epoch == 0 { n } else { hyper.samples_per_epoch.min(n) };
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for batch in order[..per_epoch].chunks(hyper.batch_size) {
            g.iter_mut().for_each(|v| *v = 0.0);
            grad(params, batch, &mut g);
            for ((p, v), gi) in params.iter_mut().zip(velocity.iter_mut()).zip(&g) {
                *v = hyper.momentum * *v + gi;
                *p -= hyper.learning_rate * *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizer_unfold_is_exact_reparametrization() {
        let x = vec![1.0, 10.0, 3.0, 14.0, 5.0, 9.0];
        let st = Standardizer::fit(&x, 2);
        let z = st.apply(&x);
        let (w, b) = (vec![0.7, -1.3], 0.25);
        let (rw, rb) = st.unfold(&w, b);
        for (row, zrow) in x.chunks(2).zip(z.chunks(2)) {
            let lhs = w[0] * zrow[0] + w[1] * zrow[1] + b;
            let rhs = rw[0] * row[0] + rw[1] * row[1] + rb;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_keeps_unit_scale() {
        let st = Standardizer::fit(&[2.0, 2.0, 2.0], 1);
        assert_eq!(st.scale, vec![1.0]);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![5.0, -3.0];
        let hyper = TrainHyper { learning_rate: 0.1, epochs: 1000, batch_size: 4, ..Default::default() };
        minimize(&mut p, 4, &hyper, 1, "quad", |p, _, g| {
            g[0] = p[0] - 1.0;
            g[1] = p[1] + 2.0;
        });
        assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] + 2.0).abs() < 1e-9);
    }
}
