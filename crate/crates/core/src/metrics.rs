//! Navigation metrics (Success, SPL, SoftSPL, DTS) and map-quality metrics
//! (accuracy, IoU, F1) with normal-approximation confidence half-widths.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction and ground truth differ in shape ({pred} vs {gt})")]
    ShapeMismatch { pred: usize, gt: usize },
    #[error("label {label} outside the {classes} evaluated classes")]
    LabelOutOfRange { label: u8, classes: usize },
}

/// Outcome of one navigation episode. Distances are in cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub stop_called: bool,
    /// Successful forward moves.
    pub path_length: u32,
    pub shortest_geodesic: u32,
    pub initial_distance: u32,
    /// `None` when no target instance is reachable from the final cell,
    /// which valid episodes rule out.
    pub final_distance: Option<u32>,
    pub steps: u32,
    pub collisions: u32,
}

/// Success rule: stopped within `success_radius` of a target within the
/// step budget.
pub fn success(result: &EpisodeResult, success_radius: u32, max_steps: u32) -> bool {
    result.stop_called && result.steps <= max_steps && result.final_distance.is_some_and(|d| d <= success_radius)
}

/// Per-episode SPL term, `None` when the shortest geodesic is zero.
pub fn spl_term(r: &EpisodeResult) -> Option<f64> {
    if r.shortest_geodesic == 0 {
        return None;
    }
    let s = if r.success { 1.0 } else { 0.0 };
    let l = r.shortest_geodesic as f64;
    Some(s * l / (r.path_length as f64).max(l))
}

/// Per-episode SoftSPL term, `None` when the initial distance is zero.
pub fn soft_spl_term(r: &EpisodeResult) -> Option<f64> {
    if r.initial_distance == 0 {
        return None;
    }
    let d0 = r.initial_distance as f64;
    // unreachable end: no credited progress
    let dt = r.final_distance.map_or(d0, |d| d as f64);
    Some((1.0 - dt / d0).max(0.0) * d0 / (r.path_length as f64).max(d0))
}

/// Distance to target at termination in cells.
pub fn dts(r: &EpisodeResult) -> Option<u32> {
    r.final_distance
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
    /// Episodes left out because the metric is undefined for them.
    pub excluded: usize,
}

impl Estimate {
    pub fn of(values: &[f64], excluded: usize) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, half_width: 0.0, n, excluded };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let half_width = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            1.96 * math::sqrt(var / n as f64)
        } else {
            0.0
        };
        Self { mean, half_width, n, excluded }
    }

    fn from_terms(terms: impl Iterator<Item = Option<f64>>) -> Self {
        let mut values = Vec::new();
        let mut excluded = 0;
        for t in terms {
            match t {
                Some(v) => values.push(v),
                None => excluded += 1,
            }
        }
        Self::of(&values, excluded)
    }
}

pub fn spl(results: &[EpisodeResult]) -> Estimate {
    Estimate::from_terms(results.iter().map(spl_term))
}

pub fn soft_spl(results: &[EpisodeResult]) -> Estimate {
    Estimate::from_terms(results.iter().map(soft_spl_term))
}

pub fn success_rate(results: &[EpisodeResult]) -> Estimate {
    Estimate::from_terms(results.iter().map(|r| Some(if r.success { 1.0 } else { 0.0 })))
}

/// Mean DTS in cells; episodes with an unreachable end are excluded.
pub fn mean_dts(results: &[EpisodeResult]) -> Estimate {
    Estimate::from_terms(results.iter().map(|r| r.final_distance.map(f64::from)))
}

/// Aggregate navigation table row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavSummary {
    pub episodes: usize,
    pub success: Estimate,
    pub spl: Estimate,
    pub soft_spl: Estimate,
    /// Cells.
    pub dts: Estimate,
}

pub fn summarize(results: &[EpisodeResult]) -> NavSummary {
    NavSummary {
        episodes: results.len(),
        success: success_rate(results),
        spl: spl(results),
        soft_spl: soft_spl(results),
        dts: mean_dts(results),
    }
}

/// Per-class confusion counts accumulated over many crops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: usize,
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub correct: u64,
    pub total: u64,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            tp: vec![0; classes],
            fp: vec![0; classes],
            fn_: vec![0; classes],
            correct: 0,
            total: 0,
        }
    }

    /// Adds one prediction/ground-truth pair of label maps. Ground-truth
    /// cells labelled `ignore` are skipped.
    pub fn add(&mut self, pred: &[u8], gt: &[u8], ignore: Option<u8>) -> Result<(), MetricsError> {
        if pred.len() != gt.len() {
            return Err(MetricsError::ShapeMismatch { pred: pred.len(), gt: gt.len() });
        }
        for (&p, &g) in pred.iter().zip(gt) {
            for l in [p, g] {
                if l as usize >= self.classes {
                    return Err(MetricsError::LabelOutOfRange { label: l, classes: self.classes });
                }
            }
            if Some(g) == ignore {
                continue;
            }
            self.total += 1;
            if p == g {
                self.correct += 1;
                self.tp[g as usize] += 1;
            } else {
                self.fp[p as usize] += 1;
                self.fn_[g as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) {
        for k in 0..self.classes {
            self.tp[k] += other.tp[k];
            self.fp[k] += other.fp[k];
            self.fn_[k] += other.fn_[k];
        }
        self.correct += other.correct;
        self.total += other.total;
    }

    /// Per-class and mean metrics over `eval_classes`. Means run over the
    /// evaluated classes present in the ground truth.
    pub fn metrics(&self, eval_classes: &[u8]) -> MapMetrics {
        let per_class: Vec<ClassMetrics> = eval_classes
            .iter()
            .map(|&c| {
                let k = c as usize;
                let (tp, fp, fn_) = (self.tp[k] as f64, self.fp[k] as f64, self.fn_[k] as f64);
                let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
                ClassMetrics {
                    class: c,
                    present: self.tp[k] + self.fn_[k] > 0,
                    accuracy: ratio(tp, tp + fn_),
                    iou: ratio(tp, tp + fp + fn_),
                    f1: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
                }
            })
            .collect();
        let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.present).collect();
        let mean = |f: fn(&ClassMetrics) -> f64| {
            if present.is_empty() {
                0.0
            } else {
                present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64
            }
        };
        MapMetrics {
            mean_accuracy: mean(|m| m.accuracy),
            mean_iou: mean(|m| m.iou),
            mean_f1: mean(|m| m.f1),
            overall_accuracy: if self.total > 0 { self.correct as f64 / self.total as f64 } else { 0.0 },
            per_class,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    /// Whether the class occurs in the ground truth.
    pub present: bool,
    pub accuracy: f64,
    pub iou: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub mean_accuracy: f64,
    pub mean_iou: f64,
    pub mean_f1: f64,
    pub overall_accuracy: f64,
}

/// Confusion-based metrics over a set of predicted and ground-truth crops.
pub fn map_metrics(pred: &[Vec<u8>], gt: &[Vec<u8>], classes: usize, eval_classes: &[u8]) -> Result<MapMetrics, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::ShapeMismatch { pred: pred.len(), gt: gt.len() });
    }
    let mut conf = Confusion::new(classes);
    for (p, g) in pred.iter().zip(gt) {
        conf.add(p, g, None)?;
    }
    Ok(conf.metrics(eval_classes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ep(success: bool, p: u32, l: u32, d0: u32, dt: u32, steps: u32) -> EpisodeResult {
        EpisodeResult {
            success,
            stop_called: success || dt == 0,
            path_length: p,
            shortest_geodesic: l,
            initial_distance: d0,
            final_distance: Some(dt),
            steps,
            collisions: 0,
        }
    }

    #[test]
    fn fixture_table() {
        // (episode, success, SPL, SoftSPL, DTS), computed by hand
        let eps = [
            ep(true, 10, 10, 10, 0, 14),  // optimal: 1, 1
            ep(true, 20, 10, 10, 2, 30),  // 10/20 = 0.5; (1 - 0.2)·10/20 = 0.4
            ep(false, 20, 10, 10, 5, 500), // 0; 0.5·10/20 = 0.25
            ep(false, 0, 8, 8, 8, 500),   // no movement: 0, 0
            ep(false, 30, 12, 12, 20, 500), // moved away: 0, 0
        ];
        let spl_t = [1.0, 0.5, 0.0, 0.0, 0.0];
        let soft_t = [1.0, 0.4, 0.25, 0.0, 0.0];
        let dts_t = [0, 2, 5, 8, 20];
        for (i, e) in eps.iter().enumerate() {
            assert_eq!(spl_term(e), Some(spl_t[i]));
            assert_eq!(soft_spl_term(e), Some(soft_t[i]));
            assert_eq!(dts(e), Some(dts_t[i]));
        }
        let s = summarize(&eps);
        assert_eq!(s.success.mean, 0.4);
        assert_eq!(s.spl.mean, 0.3);
        assert_eq!(s.soft_spl.mean, (1.0 + 0.4 + 0.25) / 5.0);
        assert_eq!(s.dts.mean, 7.0);
        assert!(s.spl.mean <= s.success.mean);
        // half-width of the success column: sd = sqrt(0.3), n = 5
        assert!((s.success.half_width - 1.96 * (0.3f64 / 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn success_rule() {
        let mut e = ep(true, 5, 5, 5, 0, 10);
        assert!(success(&e, 10, 500));
        e.final_distance = Some(11);
        assert!(!success(&e, 10, 500));
        e.final_distance = Some(10);
        assert!(success(&e, 10, 500));
        e.stop_called = false;
        assert!(!success(&e, 10, 500));
        e.stop_called = true;
        e.steps = 501;
        assert!(!success(&e, 10, 500));
    }

    #[test]
    fn degenerate_episodes_are_excluded() {
        let eps = [ep(true, 0, 0, 0, 0, 1), ep(true, 4, 4, 4, 0, 4)];
        let s = spl(&eps);
        assert_eq!((s.mean, s.n, s.excluded), (1.0, 1, 1));
        assert_eq!(soft_spl(&eps).excluded, 1);
    }

    #[test]
    fn map_metric_examples() {
        let gt = vec![vec![3u8, 3, 3, 3, 1, 1, 1, 1]];
        let m = map_metrics(&gt, &gt, 9, &[1, 3]).unwrap();
        for c in &m.per_class {
            assert_eq!((c.accuracy, c.iou, c.f1), (1.0, 1.0, 1.0));
        }
        // half of class 3 predicted, the rest predicted unknown
        let pred = vec![vec![3u8, 3, 0, 0, 1, 1, 1, 1]];
        let m = map_metrics(&pred, &gt, 9, &[3]).unwrap();
        assert_eq!(m.per_class[0].iou, 0.5);
        assert!((m.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        let unknown = vec![vec![0u8; 8]];
        let m = map_metrics(&unknown, &gt, 9, &[1, 3]).unwrap();
        assert!(m.per_class.iter().all(|c| c.accuracy == 0.0));
        // absent class excluded from the mean
        let m = map_metrics(&gt, &gt, 9, &[1, 3, 5]).unwrap();
        assert!(!m.per_class[2].present);
        assert_eq!(m.mean_iou, 1.0);
        assert!(map_metrics(&gt, &[vec![1u8; 3]], 9, &[1]).is_err());
    }

    proptest! {
        #[test]
        fn f1_bounds_iou(pred in proptest::collection::vec(0u8..5, 40), gt in proptest::collection::vec(0u8..5, 40)) {
            let m = map_metrics(&[pred], &[gt], 5, &[0, 1, 2, 3, 4]).unwrap();
            for c in &m.per_class {
                prop_assert!(c.f1 >= c.iou);
                prop_assert!((0.0..=1.0).contains(&c.iou));
            }
        }
    }
}
