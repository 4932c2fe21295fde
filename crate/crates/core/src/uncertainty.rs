//! Ensemble statistics used as acquisition fields: per-class mean and
//! population variance, predictive entropy and BALD.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::grid::Tensor3;
use crate::math;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least one prediction")]
    Empty,
    #[error("prediction {index} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        index: usize,
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
}

/// Per-cell, per-class mean `μ` and population variance `σ²` over members.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBeliefStats {
    pub mean: Tensor3,
    pub variance: Tensor3,
    pub member_count: usize,
}

fn check_shapes(predictions: &[Tensor3]) -> Result<(usize, usize, usize), StatsError> {
    let first = predictions.first().ok_or(StatsError::Empty)?;
    let shape = (first.channels, first.height, first.width);
    for (index, p) in predictions.iter().enumerate() {
        let got = (p.channels, p.height, p.width);
        if got != shape {
            return Err(StatsError::ShapeMismatch { index, expected: shape, got });
        }
    }
    Ok(shape)
}

/// Mean and population variance (divide by `N`) per cell and class.
///
/// The variance is computed from deviations about the mean, so identical
/// members give exactly zero.
pub fn ensemble_stats(predictions: &[Tensor3]) -> Result<ClassBeliefStats, StatsError> {
    let (c, h, w) = check_shapes(predictions)?;
    let n = predictions.len() as f64;
    let len = c * h * w;
    let mut mean = vec![0.0; len];
    for p in predictions {
        for (m, x) in mean.iter_mut().zip(&p.data) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    // identical members must give an exact zero, so use the first member
    // as the mean when all members agree bitwise
    for (j, m) in mean.iter_mut().enumerate() {
        let x0 = predictions[0].data[j];
        if predictions.iter().all(|p| p.data[j] == x0) {
            *m = x0;
        }
    }
    let mut variance = vec![0.0; len];
    for p in predictions {
        for ((v, x), m) in variance.iter_mut().zip(&p.data).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    for v in &mut variance {
        *v /= n;
    }
    Ok(ClassBeliefStats {
        mean: Tensor3::from_vec(c, h, w, mean),
        variance: Tensor3::from_vec(c, h, w, variance),
        member_count: predictions.len(),
    })
}

/// Shannon entropy in nats of each cell's distribution, `0 ln 0 = 0`.
pub fn entropy_map(mean: &Tensor3) -> Vec<f64> {
    let plane = mean.plane();
    (0..plane)
        .map(|i| -(0..mean.channels).map(|c| math::xlogx(mean.data[c * plane + i])).sum::<f64>())
        .collect()
}

/// BALD mutual information `H(mean) − mean_i H(member_i)` per cell, clamped
/// at zero.
pub fn bald_map(predictions: &[Tensor3]) -> Result<Vec<f64>, StatsError> {
    let stats = ensemble_stats(predictions)?;
    let mut out = entropy_map(&stats.mean);
    let n = predictions.len() as f64;
    for p in predictions {
        for (o, h) in out.iter_mut().zip(entropy_map(p)) {
            *o -= h / n;
        }
    }
    let plane = predictions[0].plane();
    let channels = predictions[0].channels;
    for (i, o) in out.iter_mut().enumerate() {
        let agree = (0..channels).all(|c| {
            let x0 = predictions[0].data[c * plane + i];
            predictions.iter().all(|p| p.data[c * plane + i] == x0)
        });
        if agree || *o < 0.0 {
            *o = 0.0;
        }
    }
    Ok(out)
}

/// Per-cell average of the variance across all semantic classes.
pub fn mean_class_variance(stats: &ClassBeliefStats) -> Vec<f64> {
    let v = &stats.variance;
    let plane = v.plane();
    (0..plane)
        .map(|i| (0..v.channels).map(|c| v.data[c * plane + i]).sum::<f64>() / v.channels as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell(values: &[f64]) -> Tensor3 {
        Tensor3::from_vec(values.len(), 1, 1, values.to_vec())
    }

    fn normalized(raw: Vec<f64>, k: usize, cells: usize) -> Tensor3 {
        let mut t = Tensor3::from_vec(k, 1, cells, raw);
        for i in 0..cells {
            let s: f64 = (0..k).map(|c| t.data[c * cells + i]).sum();
            for c in 0..k {
                t.data[c * cells + i] /= s;
            }
        }
        t
    }

    #[test]
    fn two_member_hand_example() {
        let s = ensemble_stats(&[cell(&[0.2, 0.8]), cell(&[0.4, 0.6])]).unwrap();
        assert!((s.mean.data[0] - 0.3).abs() < 1e-15);
        assert!((s.variance.data[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn identical_members_have_zero_variance_and_bald() {
        let p = cell(&[0.1, 0.2, 0.7]);
        let preds = vec![p.clone(), p.clone(), p];
        let s = ensemble_stats(&preds).unwrap();
        assert!(s.variance.data.iter().all(|&v| v == 0.0));
        assert!(bald_map(&preds).unwrap().iter().all(|&b| b == 0.0));
        // entropies that do not divide evenly by the member count
        let q = cell(&[0.013, 0.087, 0.11, 0.19, 0.05, 0.21, 0.07, 0.23, 0.04]);
        assert!(bald_map(&vec![q; 5]).unwrap().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn entropy_examples() {
        let uniform = cell(&[1.0 / 9.0; 9]);
        assert!((entropy_map(&uniform)[0] - math::ln(9.0)).abs() < 1e-12);
        assert_eq!(entropy_map(&cell(&[0.0, 1.0, 0.0]))[0], 0.0);
        let half = cell(&[0.5, 0.5, 0.0, 0.0]);
        assert!((entropy_map(&half)[0] - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn disagreeing_one_hot_members_give_ln2() {
        let b = bald_map(&[cell(&[1.0, 0.0, 0.0]), cell(&[0.0, 1.0, 0.0])]).unwrap();
        assert!((b[0] - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn mean_class_variance_averages_over_classes() {
        let s = ClassBeliefStats {
            mean: cell(&[0.25; 4]),
            variance: cell(&[0.0, 0.2, 0.0, 0.0]),
            member_count: 2,
        };
        assert!((mean_class_variance(&s)[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let r = ensemble_stats(&[cell(&[0.5, 0.5]), cell(&[0.2, 0.3, 0.5])]);
        assert!(matches!(r, Err(StatsError::ShapeMismatch { index: 1, .. })));
        assert_eq!(ensemble_stats(&[]), Err(StatsError::Empty));
    }

    proptest! {
        #[test]
        fn variance_identity_and_bounds(raw in proptest::collection::vec(0.01f64..1.0, 4 * 5 * 6), perm in 0usize..24) {
            let (k, cells, n) = (5, 6, 4);
            let preds: Vec<Tensor3> = raw
                .chunks(k * cells)
                .map(|c| normalized(c.to_vec(), k, cells))
                .collect();
            let s = ensemble_stats(&preds).unwrap();
            for j in 0..k * cells {
                let ex2: f64 = preds.iter().map(|p| p.data[j] * p.data[j]).sum::<f64>() / n as f64;
                let ex = preds.iter().map(|p| p.data[j]).sum::<f64>() / n as f64;
                prop_assert!((s.variance.data[j] - (ex2 - ex * ex)).abs() < 1e-12);
                prop_assert!(s.variance.data[j] >= 0.0);
            }
            prop_assert!(s.mean.max_normalization_error() < 1e-12);
            let h = entropy_map(&s.mean);
            let b = bald_map(&preds).unwrap();
            for i in 0..cells {
                prop_assert!(b[i] <= h[i] + 1e-15);
                prop_assert!(h[i] <= math::ln(k as f64) + 1e-12);
            }
            // permutation invariance
            let mut order: Vec<usize> = (0..n).collect();
            let mut p = perm;
            for i in (1..n).rev() {
                order.swap(i, p % (i + 1));
                p /= i + 1;
            }
            let permuted: Vec<Tensor3> = order.iter().map(|&i| preds[i].clone()).collect();
            let s2 = ensemble_stats(&permuted).unwrap();
            for j in 0..k * cells {
                prop_assert!((s.variance.data[j] - s2.variance.data[j]).abs() < 1e-15);
            }
            let b2 = bald_map(&permuted).unwrap();
            for i in 0..cells {
                prop_assert!((b[i] - b2[i]).abs() < 1e-12);
            }
            let mv = mean_class_variance(&s);
            let mv2 = mean_class_variance(&s2);
            for i in 0..cells {
                prop_assert!((mv[i] - mv2[i]).abs() < 1e-15);
            }
        }
    }
}
