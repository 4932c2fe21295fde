use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Ensemble, PredictorError, TrainingSample, TwoStagePredictor};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight λ of the semantic loss in `L_occ + λ·L_sem`.
    pub semantic_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 8,
            epochs: 1,
            semantic_weight: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
        }
    }
}

/// One optimizer step of one member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub member: usize,
    pub l_occ: f64,
    pub l_sem: f64,
    pub l_total: f64,
}

/// Adam moments for both parameter vectors of one member.
#[derive(Debug, Clone)]
pub struct Adam {
    m: [Vec<f64>; 2],
    v: [Vec<f64>; 2],
    t: i32,
}

impl Adam {
    pub fn new(predictor: &TwoStagePredictor) -> Self {
        let (no, ns) = (predictor.params.theta_o.len(), predictor.params.theta_s.len());
        Self {
            m: [vec![0.0; no], vec![0.0; ns]],
            v: [vec![0.0; no], vec![0.0; ns]],
            t: 0,
        }
    }

    pub fn step(&mut self, predictor: &mut TwoStagePredictor, grads: [&[f64]; 2], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - libm::pow(cfg.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(cfg.beta2, self.t as f64);
        let params = [&mut predictor.params.theta_o, &mut predictor.params.theta_s];
        for (k, theta) in params.into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], grads[k]);
            for j in 0..theta.len() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                theta[j] -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + cfg.epsilon);
            }
        }
    }
}

/// Trains one member on `dataset` with its own shuffling order.
pub fn train_member(
    member: &mut TwoStagePredictor,
    member_index: usize,
    dataset: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<Vec<LossRecord>, PredictorError> {
    if dataset.is_empty() {
        return Err(PredictorError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed ^ (member_index as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    let mut adam = Adam::new(member);
    let batch = cfg.batch_size.max(1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut log = Vec::new();
    let mut step = 0;
    let mut grad_o = vec![0.0; member.params.theta_o.len()];
    let mut grad_s = vec![0.0; member.params.theta_s.len()];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch_id, chunk) in order.chunks(batch).enumerate() {
            grad_o.fill(0.0);
            grad_s.fill(0.0);
            let scale = 1.0 / chunk.len() as f64;
            let (mut l_occ, mut l_sem) = (0.0, 0.0);
            for &i in chunk {
                let l = member.accumulate_gradient(&dataset[i], cfg.semantic_weight, scale, &mut grad_o, &mut grad_s)?;
                l_occ += l.occupancy * scale;
                l_sem += l.semantic * scale;
            }
            let total = l_occ + cfg.semantic_weight * l_sem;
            if !total.is_finite() {
                return Err(PredictorError::NonFinite {
                    step,
                    member: member_index,
                    batch: batch_id,
                });
            }
            adam.step(member, [&grad_o, &grad_s], cfg);
            log.push(LossRecord {
                step,
                member: member_index,
                l_occ,
                l_sem,
                l_total: total,
            });
            step += 1;
        }
    }
    Ok(log)
}

/// Trains every member independently on the same dataset.
pub fn train(ensemble: &mut Ensemble, dataset: &[TrainingSample], cfg: &TrainConfig) -> Result<Vec<LossRecord>, PredictorError> {
    let mut log = Vec::new();
    for (i, member) in ensemble.members.iter_mut().enumerate() {
        log.extend(train_member(member, i, dataset, cfg)?);
    }
    Ok(log)
}
