//! Pixel-level evaluation of traversability predictions.

use crate::error::{Error, Result};
use crate::world::Class;

/// `value > θ`.
pub fn binarize(values: &[f64], theta: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("threshold {theta} outside [0, 1]")));
    }
    Ok(values.iter().map(|&v| u8::from(v > theta)).collect())
}

/// Keeps positives only where the semantic prediction is plant.
pub fn refine(mask: &[u8], classes: &[u8]) -> Result<Vec<u8>> {
    if mask.len() != classes.len() {
        return Err(Error::Shape(format!("mask has {} pixels, class image {}", mask.len(), classes.len())));
    }
    Ok(mask.iter().zip(classes).map(|(&m, &c)| u8::from(m != 0 && c == Class::Plant as u8)).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    fn count(&mut self, pred: bool, gt: bool) {
        match (pred, gt) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        Metrics {
            iou: ratio(self.tp, self.tp + self.fp + self.fn_),
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
        }
    }
}

pub fn confusion(pred: &[u8], gt: &[u8]) -> Result<Confusion> {
    if pred.len() != gt.len() {
        return Err(Error::Shape(format!("prediction has {} pixels, ground truth {}", pred.len(), gt.len())));
    }
    let mut c = Confusion::default();
    for (&p, &g) in pred.iter().zip(gt) {
        c.count(p != 0, g != 0);
    }
    Ok(c)
}

/// Ratios in [0, 1]; `None` when the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub iou: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn fmt_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

pub fn fmt_percent(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Pooled confusion per threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub confusion: Vec<Confusion>,
}

impl Curve {
    /// Threshold with the highest IoU (first one on ties) and its confusion.
    pub fn best(&self) -> Option<(f64, Confusion)> {
        let mut best: Option<(f64, f64, Confusion)> = None;
        for (t, c) in self.thresholds.iter().zip(&self.confusion) {
            if let Some(iou) = c.metrics().iou {
                if best.is_none_or(|(_, b, _)| iou > b) {
                    best = Some((*t, iou, *c));
                }
            }
        }
        best.map(|(t, _, c)| (t, c))
    }

    pub fn best_iou(&self) -> Option<f64> {
        self.best().and_then(|(_, c)| c.metrics().iou)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub raw: Curve,
    pub refined: Curve,
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,threshold,precision,recall,iou,accuracy,tp,fp,fn,tn\n");
        for (name, curve) in [("raw", &self.raw), ("refined", &self.refined)] {
            append_curve_rows(&mut out, name, curve);
        }
        out
    }
}

pub fn append_curve_rows(out: &mut String, name: &str, curve: &Curve) {
    for (t, c) in curve.thresholds.iter().zip(&curve.confusion) {
        let m = c.metrics();
        out.push_str(&format!(
            "{name},{t},{},{},{},{},{},{},{},{}\n",
            fmt_metric(m.precision),
            fmt_metric(m.recall),
            fmt_metric(m.iou),
            fmt_metric(m.accuracy),
            c.tp,
            c.fp,
            c.fn_,
            c.tn
        ));
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::invalid("threshold list is empty"));
    }
    if thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("thresholds must be strictly increasing within [0, 1]"));
    }
    Ok(())
}

/// `n + 1` evenly spaced thresholds on [0, 1].
pub fn threshold_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Pooled confusion of `value > θ` against the ground truth, optionally
/// gated per pixel.
pub fn sweep_curve(values: &[Vec<f64>], gt: &[Vec<u8>], gate: Option<&[Vec<u8>]>, thresholds: &[f64]) -> Result<Curve> {
    check_thresholds(thresholds)?;
    if values.len() != gt.len() || gate.is_some_and(|g| g.len() != gt.len()) {
        return Err(Error::Shape("image lists differ in length".into()));
    }
    let mut confusion = vec![Confusion::default(); thresholds.len()];
    for (i, (v, g)) in values.iter().zip(gt).enumerate() {
        if v.len() != g.len() || gate.is_some_and(|gate| gate[i].len() != g.len()) {
            return Err(Error::Shape(format!("image {i} sizes differ")));
        }
        for (ti, &t) in thresholds.iter().enumerate() {
            let c = &mut confusion[ti];
            for (p, (&x, &y)) in v.iter().zip(g).enumerate() {
                let keep = gate.is_none_or(|gate| gate[i][p] != 0);
                c.count(keep && x > t, y != 0);
            }
        }
    }
    Ok(Curve { thresholds: thresholds.to_vec(), confusion })
}

/// Raw and plant-refined curves over a set of images.
pub fn sweep_curves(trav: &[Vec<f64>], classes: &[Vec<u8>], gt: &[Vec<u8>], thresholds: &[f64]) -> Result<CurveTable> {
    let plant: Vec<Vec<u8>> =
        classes.iter().map(|c| c.iter().map(|&z| u8::from(z == Class::Plant as u8)).collect()).collect();
    Ok(CurveTable {
        raw: sweep_curve(trav, gt, None, thresholds)?,
        refined: sweep_curve(trav, gt, Some(&plant), thresholds)?,
    })
}

/// One summary line: a variant evaluated at its best-IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub threshold: Option<f64>,
    pub confusion: Confusion,
}

impl SummaryRow {
    pub fn from_curve(variant: &str, curve: &Curve) -> Self {
        match curve.best() {
            Some((t, c)) => Self { variant: variant.to_string(), threshold: Some(t), confusion: c },
            None => Self { variant: variant.to_string(), threshold: None, confusion: Confusion::default() },
        }
    }
}

/// Percent-formatted summary table.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("variant,threshold,iou_pct,accuracy_pct,precision_pct,recall_pct\n");
    for r in rows {
        let m = r.confusion.metrics();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.variant,
            fmt_metric(r.threshold),
            fmt_percent(m.iou),
            fmt_percent(m.accuracy),
            fmt_percent(m.precision),
            fmt_percent(m.recall)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(&[0.0, 0.1, 1.0], 0.0).unwrap(), vec![0, 1, 1]);
        assert_eq!(binarize(&[0.0, 0.5, 1.0], 1.0).unwrap(), vec![0, 0, 0]);
        assert_eq!(binarize(&[0.5, 0.8], 0.75).unwrap(), vec![0, 1]);
        assert!(binarize(&[0.5], 1.5).is_err());
    }

    #[test]
    fn refine_examples() {
        assert_eq!(refine(&[1, 0, 1], &[0, 0, 0]).unwrap(), vec![1, 0, 1]);
        assert_eq!(refine(&[1, 0, 1], &[2, 2, 2]).unwrap(), vec![0, 0, 0]);
        assert!(refine(&[1], &[0, 0]).is_err());
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 1, fn_: 1, tn: 1 });
        let m = c.metrics();
        assert!((m.iou.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((m.accuracy, m.precision, m.recall), (Some(0.5), Some(0.5), Some(0.5)));
        let all = confusion(&[1; 4], &[1; 4]).unwrap().metrics();
        assert_eq!((all.iou, all.accuracy, all.precision, all.recall), (Some(1.0), Some(1.0), Some(1.0), Some(1.0)));
        let none = confusion(&[0; 4], &[1, 0, 0, 1]).unwrap().metrics();
        assert_eq!(none.recall, Some(0.0));
        assert_eq!(none.precision, None);
        assert_eq!(fmt_metric(none.precision), "undefined");
    }

    #[test]
    fn sweep_matches_direct_calls() {
        let v = vec![vec![0.0, 0.3, 0.5, 0.9, 1.0]];
        let g = vec![vec![0, 1, 1, 1, 0]];
        let cls = vec![vec![0, 0, 2, 0, 1]];
        let th = [0.0, 0.5, 1.0];
        let table = sweep_curves(&v, &cls, &g, &th).unwrap();
        for (i, &t) in th.iter().enumerate() {
            let raw = binarize(&v[0], t).unwrap();
            assert_eq!(table.raw.confusion[i], confusion(&raw, &g[0]).unwrap());
            let refined = refine(&raw, &cls[0]).unwrap();
            assert_eq!(table.refined.confusion[i], confusion(&refined, &g[0]).unwrap());
        }
        assert!(sweep_curves(&v, &cls, &g, &[0.5, 0.5]).is_err());
        assert!(sweep_curves(&v, &cls, &g, &[]).is_err());
    }

    proptest! {
        #[test]
        fn curve_invariants(
            images in proptest::collection::vec(proptest::collection::vec((0.0f64..=1.0, 0u8..2, 0u8..3), 1..40), 1..4)
        ) {
            let v: Vec<Vec<f64>> = images.iter().map(|im| im.iter().map(|p| p.0).collect()).collect();
            let g: Vec<Vec<u8>> = images.iter().map(|im| im.iter().map(|p| p.1).collect()).collect();
            let c: Vec<Vec<u8>> = images.iter().map(|im| im.iter().map(|p| p.2).collect()).collect();
            let th = threshold_grid(20);
            let table = sweep_curves(&v, &c, &g, &th).unwrap();
            for (raw, refined) in table.raw.confusion.iter().zip(&table.refined.confusion) {
                prop_assert!(refined.fp <= raw.fp && refined.tp <= raw.tp);
            }
            for w in table.raw.confusion.windows(2) {
                prop_assert!(w[1].tp <= w[0].tp);
            }
            // Pooled confusion equals the sum of per-image confusions.
            let mut sum = Confusion::default();
            for (vi, gi) in v.iter().zip(&g) {
                sum.add(&confusion(&binarize(vi, th[7]).unwrap(), gi).unwrap());
            }
            prop_assert_eq!(sum, table.raw.confusion[7]);
        }
    }

    #[test]
    fn best_threshold_prefers_first_maximum() {
        let curve = Curve {
            thresholds: vec![0.0, 0.5, 1.0],
            confusion: vec![
                Confusion { tp: 1, fp: 1, fn_: 0, tn: 0 },
                Confusion { tp: 1, fp: 0, fn_: 0, tn: 1 },
                Confusion { tp: 0, fp: 0, fn_: 1, tn: 1 },
            ],
        };
        assert_eq!(curve.best().unwrap().0, 0.5);
        let csv = summary_csv(&[SummaryRow::from_curve("raw", &curve)]);
        assert!(csv.ends_with("raw,0.5,100.00,100.00,100.00,100.00\n"));
    }
}
