//! Two-stage semantic map predictor and its ensemble.
//!
//! The occupancy stage maps an egocentric occupancy observation `p_t` to a
//! per-cell distribution over occupancy classes `p̂_t`. The semantic stage
//! takes `p̂_t ⊕ ŝ_t` (channel concatenation with the observed semantics) and
//! predicts the full semantic crop `m̂_t`. Both stages are trained jointly,
//! so the semantic loss also shapes the occupancy parameters.

mod checkpoint;
mod layers;
mod net;
mod train;

pub use checkpoint::{decode_ensemble, encode_ensemble, CHECKPOINT_VERSION};
pub use train::{train, train_member, Adam, LossRecord, TrainConfig};

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Tensor3;
use crate::math;
use net::StageNet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("input shape {got:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        got: (usize, usize, usize),
    },
    #[error("non-finite loss at step {step} (member {member}, batch {batch})")]
    NonFinite { step: usize, member: usize, batch: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("ensemble needs at least one member")]
    EmptyEnsemble,
    #[error("bad checkpoint: {0}")]
    Checkpoint(&'static str),
}

/// Architecture shared by all ensemble members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub crop_size: usize,
    /// Channel width of the first encoder block; deeper blocks use twice this.
    pub base_channels: usize,
    pub occupancy_classes: usize,
    pub semantic_classes: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            crop_size: 33,
            base_channels: 8,
            occupancy_classes: 3,
            semantic_classes: 9,
        }
    }
}

impl ArchConfig {
    fn occupancy_net(&self) -> StageNet {
        StageNet::new(self.occupancy_classes, self.occupancy_classes, self.base_channels, self.crop_size)
    }

    fn semantic_net(&self) -> StageNet {
        StageNet::new(
            self.occupancy_classes + self.semantic_classes,
            self.semantic_classes,
            self.base_channels,
            self.crop_size,
        )
    }

    pub fn occupancy_param_count(&self) -> usize {
        self.occupancy_net().param_count()
    }

    pub fn semantic_param_count(&self) -> usize {
        self.semantic_net().param_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorParameters {
    pub theta_o: Vec<f64>,
    pub theta_s: Vec<f64>,
    pub init_seed: u64,
}

/// One supervised example: observation crops and ground-truth crops, all
/// as per-cell class labels in the same egocentric frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub size: usize,
    pub input_occupancy: Vec<u8>,
    pub input_semantics: Vec<u8>,
    pub target_occupancy: Vec<u8>,
    pub target_semantics: Vec<u8>,
}

/// Occupancy and semantic distributions predicted by one member.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberPrediction {
    pub occupancy: Tensor3,
    pub semantics: Tensor3,
}

/// Per-cell losses (mean cross-entropy in nats) of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleLoss {
    pub occupancy: f64,
    pub semantic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStagePredictor {
    pub arch: ArchConfig,
    pub params: PredictorParameters,
}

fn softmax_cells(logits: &[f64], channels: usize, plane: usize) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    let mut buf = vec![0.0; channels];
    for i in 0..plane {
        for c in 0..channels {
            buf[c] = logits[c * plane + i];
        }
        math::softmax_in_place(&mut buf);
        for c in 0..channels {
            out[c * plane + i] = buf[c];
        }
    }
    out
}

/// Mean per-cell cross-entropy and its gradient w.r.t. the logits, scaled by
/// `weight`.
fn cross_entropy(probs: &[f64], targets: &[u8], channels: usize, weight: f64) -> (f64, Vec<f64>) {
    let plane = targets.len();
    let scale = weight / plane as f64;
    let mut grad: Vec<f64> = probs.iter().map(|p| p * scale).collect();
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let idx = t as usize * plane + i;
        loss -= math::ln(probs[idx].max(1e-300));
        grad[idx] -= scale;
    }
    debug_assert!(targets.iter().all(|&t| (t as usize) < channels));
    (loss / plane as f64, grad)
}

impl TwoStagePredictor {
    pub fn new(arch: ArchConfig, init_seed: u64) -> Self {
        let theta_o = arch.occupancy_net().init(init_seed.wrapping_mul(2).wrapping_add(1));
        let theta_s = arch.semantic_net().init(init_seed.wrapping_mul(2).wrapping_add(2));
        Self {
            arch,
            params: PredictorParameters {
                theta_o,
                theta_s,
                init_seed,
            },
        }
    }

    fn check(&self, t: &Tensor3, channels: usize) -> Result<(), PredictorError> {
        let n = self.arch.crop_size;
        if (t.channels, t.height, t.width) != (channels, n, n) {
            return Err(PredictorError::ShapeMismatch {
                expected: (channels, n, n),
                got: (t.channels, t.height, t.width),
            });
        }
        Ok(())
    }

    /// `p̂_t = f^o(p_t)`.
    pub fn predict_occupancy(&self, occupancy: &Tensor3) -> Result<Tensor3, PredictorError> {
        self.check(occupancy, self.arch.occupancy_classes)?;
        let net = self.arch.occupancy_net();
        let (logits, _) = net.forward(&self.params.theta_o, &occupancy.data);
        let n = self.arch.crop_size;
        let probs = softmax_cells(&logits, net.out_ch, n * n);
        Ok(Tensor3::from_vec(net.out_ch, n, n, probs))
    }

    /// `m̂_t = f^s(p̂_t ⊕ ŝ_t)`.
    pub fn predict_semantics(&self, occupancy_pred: &Tensor3, semantics: &Tensor3) -> Result<Tensor3, PredictorError> {
        self.check(occupancy_pred, self.arch.occupancy_classes)?;
        self.check(semantics, self.arch.semantic_classes)?;
        let net = self.arch.semantic_net();
        let input = occupancy_pred.concat(semantics);
        let (logits, _) = net.forward(&self.params.theta_s, &input.data);
        let n = self.arch.crop_size;
        let probs = softmax_cells(&logits, net.out_ch, n * n);
        Ok(Tensor3::from_vec(net.out_ch, n, n, probs))
    }

    pub fn predict(&self, occupancy: &Tensor3, semantics: &Tensor3) -> Result<MemberPrediction, PredictorError> {
        let occ = self.predict_occupancy(occupancy)?;
        let sem = self.predict_semantics(&occ, semantics)?;
        Ok(MemberPrediction {
            occupancy: occ,
            semantics: sem,
        })
    }

    fn sample_tensors(&self, sample: &TrainingSample) -> Result<(Tensor3, Tensor3), PredictorError> {
        let n = self.arch.crop_size;
        if sample.size != n || sample.input_occupancy.len() != n * n {
            return Err(PredictorError::ShapeMismatch {
                expected: (self.arch.occupancy_classes, n, n),
                got: (self.arch.occupancy_classes, sample.size, sample.size),
            });
        }
        Ok((
            Tensor3::one_hot(&sample.input_occupancy, self.arch.occupancy_classes, n, n),
            Tensor3::one_hot(&sample.input_semantics, self.arch.semantic_classes, n, n),
        ))
    }

    /// Loss of one sample under the current parameters.
    pub fn loss(&self, sample: &TrainingSample) -> Result<SampleLoss, PredictorError> {
        self.loss_with(&self.params.theta_o, &self.params.theta_s, sample)
    }

    pub(crate) fn loss_with(&self, theta_o: &[f64], theta_s: &[f64], sample: &TrainingSample) -> Result<SampleLoss, PredictorError> {
        let (occ_in, sem_in) = self.sample_tensors(sample)?;
        let n = self.arch.crop_size;
        let (onet, snet) = (self.arch.occupancy_net(), self.arch.semantic_net());
        let (lo, _) = onet.forward(theta_o, &occ_in.data);
        let p_hat = softmax_cells(&lo, onet.out_ch, n * n);
        let (l_occ, _) = cross_entropy(&p_hat, &sample.target_occupancy, onet.out_ch, 1.0);
        let mut s_in = p_hat;
        s_in.extend_from_slice(&sem_in.data);
        let (ls, _) = snet.forward(theta_s, &s_in);
        let m_hat = softmax_cells(&ls, snet.out_ch, n * n);
        let (l_sem, _) = cross_entropy(&m_hat, &sample.target_semantics, snet.out_ch, 1.0);
        Ok(SampleLoss {
            occupancy: l_occ,
            semantic: l_sem,
        })
    }

    /// Loss `L_occ + λ·L_sem` of one sample, accumulating its gradient into
    /// `grad_o`/`grad_s` scaled by `scale`. The semantic loss is
    /// backpropagated through the occupancy softmax into `θ^o`.
    pub fn accumulate_gradient(
        &self,
        sample: &TrainingSample,
        semantic_weight: f64,
        scale: f64,
        grad_o: &mut [f64],
        grad_s: &mut [f64],
    ) -> Result<SampleLoss, PredictorError> {
        let (occ_in, sem_in) = self.sample_tensors(sample)?;
        let n = self.arch.crop_size;
        let plane = n * n;
        let (onet, snet) = (self.arch.occupancy_net(), self.arch.semantic_net());
        let (theta_o, theta_s) = (&self.params.theta_o, &self.params.theta_s);

        let (lo, cache_o) = onet.forward(theta_o, &occ_in.data);
        let p_hat = softmax_cells(&lo, onet.out_ch, plane);
        let (l_occ, mut g_lo) = cross_entropy(&p_hat, &sample.target_occupancy, onet.out_ch, scale);

        let mut s_in = p_hat.clone();
        s_in.extend_from_slice(&sem_in.data);
        let (ls, cache_s) = snet.forward(theta_s, &s_in);
        let m_hat = softmax_cells(&ls, snet.out_ch, plane);
        let (l_sem, g_ls) = cross_entropy(&m_hat, &sample.target_semantics, snet.out_ch, scale * semantic_weight);

        let g_in = snet
            .backward(theta_s, &cache_s, &g_ls, grad_s, true)
            .expect("input gradient requested");
        // softmax Jacobian: dz_k = p_k (g_k - Σ_j p_j g_j)
        let oc = onet.out_ch;
        for i in 0..plane {
            let dot: f64 = (0..oc).map(|c| p_hat[c * plane + i] * g_in[c * plane + i]).sum();
            for c in 0..oc {
                let idx = c * plane + i;
                g_lo[idx] += p_hat[idx] * (g_in[idx] - dot);
            }
        }
        onet.backward(theta_o, &cache_o, &g_lo, grad_o, false);
        Ok(SampleLoss {
            occupancy: l_occ,
            semantic: l_sem,
        })
    }
}

/// `N` independently initialised predictors sharing one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub arch: ArchConfig,
    pub members: Vec<TwoStagePredictor>,
}

impl Ensemble {
    /// Members get distinct init seeds derived from `seed`.
    pub fn new(arch: ArchConfig, size: usize, seed: u64) -> Self {
        let members = (0..size as u64)
            .map(|i| TwoStagePredictor::new(arch, seed.wrapping_mul(1_000_003).wrapping_add(i)))
            .collect();
        Self { arch, members }
    }

    pub fn from_members(members: Vec<TwoStagePredictor>) -> Result<Self, PredictorError> {
        let arch = members.first().ok_or(PredictorError::EmptyEnsemble)?.arch;
        Ok(Self { arch, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Both stages of every member, in member order.
    pub fn predict_all(&self, occupancy: &Tensor3, semantics: &Tensor3) -> Result<Vec<MemberPrediction>, PredictorError> {
        self.members.iter().map(|m| m.predict(occupancy, semantics)).collect()
    }

    /// Semantic predictions `m̂_t` of every member, in member order.
    pub fn ensemble_predict(&self, occupancy: &Tensor3, semantics: &Tensor3) -> Result<Vec<Tensor3>, PredictorError> {
        Ok(self
            .predict_all(occupancy, semantics)?
            .into_iter()
            .map(|p| p.semantics)
            .collect())
    }
}

#[cfg(test)]
mod tests;
