//! Experiment loops shared by the CLI and the tests: data collection,
//! navigation episodes and map-prediction evaluation.

mod collect;
mod episode;
mod evalmap;

pub use collect::{collect_active, collect_offline, ActiveConfig, ActiveStats};
pub use episode::{
    run_episode, AgentKind, Ablations, EpisodeOutcome, GoalReason, GoalRecord, TrajectoryRecord,
};
pub use evalmap::{eval_map, MapEvalConfig, MapEvalReport, MethodMetrics};

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use thiserror::Error;

use crate::belief::{egocentric_to_geocentric, BeliefError, GlobalBeliefMap};
use crate::grid::Tensor3;
use crate::predictor::{Ensemble, PredictorError, TrainingSample};
use crate::uncertainty::{bald_map, entropy_map, ensemble_stats, StatsError};
use crate::world::{ground_truth_crop, observe, GridWorld, LocalObservation, ObsConfig, Pose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no worlds given")]
    NoWorlds,
    #[error("world has no free cells")]
    NoFreeCells,
}

/// Turns ensemble predictions into map evidence.
///
/// A prediction already contains the class prior the model learned, so
/// fusing raw predictions of the same cell from many views counts that prior
/// once per view. With prior correction enabled, the first view of a cell
/// contributes its prediction and every later view contributes the ratio of
/// its prediction to the model's prediction for an empty observation at the
/// same crop position, which is the recursive form of Bayes' rule for
/// conditionally independent views.
#[derive(Debug, Clone)]
pub struct Perceiver<'a> {
    pub ensemble: &'a Ensemble,
    pub prior_correction: bool,
    blind_occupancy: Tensor3,
    blind_semantics: Tensor3,
}

impl<'a> Perceiver<'a> {
    pub fn new(ensemble: &'a Ensemble, prior_correction: bool) -> Result<Self, HarnessError> {
        let arch = &ensemble.arch;
        let size = arch.crop_size;
        let unknown_occ = Tensor3::one_hot(&vec![0; size * size], arch.occupancy_classes, size, size);
        let unknown_sem = Tensor3::one_hot(&vec![0; size * size], arch.semantic_classes, size, size);
        let preds = ensemble.predict_all(&unknown_occ, &unknown_sem)?;
        let occ: Vec<Tensor3> = preds.iter().map(|p| p.occupancy.clone()).collect();
        let sem: Vec<Tensor3> = preds.into_iter().map(|p| p.semantics).collect();
        Ok(Self {
            ensemble,
            prior_correction,
            blind_occupancy: ensemble_stats(&occ)?.mean,
            blind_semantics: ensemble_stats(&sem)?.mean,
        })
    }

    /// Per-cell evidence for `map`: the prediction itself for cells not yet
    /// covered, the prior-corrected ratio otherwise.
    fn evidence(&self, map: &GlobalBeliefMap, prediction: &Tensor3, blind: &Tensor3, pose: Pose) -> Tensor3 {
        let mut out = prediction.clone();
        if !self.prior_correction {
            return out;
        }
        let plane = out.plane();
        let k = out.channels;
        for p in egocentric_to_geocentric(out.height, pose, map.height(), map.width()) {
            if !map.is_observed(p.map_index) {
                continue;
            }
            let i = p.crop_index;
            let mut z = 0.0;
            for c in 0..k {
                let r = prediction.data[c * plane + i] / blind.data[c * plane + i].max(1e-12);
                out.data[c * plane + i] = r;
                z += r;
            }
            for c in 0..k {
                out.data[c * plane + i] /= z;
            }
        }
        out
    }

    /// One perception step: predict from `obs` with every ensemble member and
    /// fuse the mean beliefs, the per-class variance and the entropy/BALD
    /// fields into `map`.
    pub fn perceive(&self, map: &mut GlobalBeliefMap, obs: &LocalObservation) -> Result<(), HarnessError> {
        let arch = &self.ensemble.arch;
        let occ = obs.occupancy_tensor(arch.occupancy_classes);
        let sem = obs.semantic_tensor(arch.semantic_classes);
        let preds = self.ensemble.predict_all(&occ, &sem)?;
        let occs: Vec<Tensor3> = preds.iter().map(|p| p.occupancy.clone()).collect();
        let sems: Vec<Tensor3> = preds.into_iter().map(|p| p.semantics).collect();
        let occ_mean = ensemble_stats(&occs)?.mean;
        let stats = ensemble_stats(&sems)?;
        let pose = obs.pose_at_capture;
        // evidence depends on coverage before this view, so compute both first
        let occ_evidence = self.evidence(map, &occ_mean, &self.blind_occupancy, pose);
        let sem_evidence = self.evidence(map, &stats.mean, &self.blind_semantics, pose);
        map.register_occupancy(&occ_evidence, pose)?;
        map.register(&sem_evidence, pose)?;
        map.register_uncertainty(&stats.variance, pose)?;
        map.register_acquisition(obs.size, &entropy_map(&stats.mean), &bald_map(&sems)?, pose);
        map.mark_sensed(obs);
        Ok(())
    }
}

/// Observation at `pose` paired with the ground-truth egocentric crops.
pub fn training_sample(obs: &LocalObservation, world: &GridWorld) -> TrainingSample {
    let (target_occupancy, target_semantics) = ground_truth_crop(world, obs.pose_at_capture, obs.size);
    TrainingSample {
        size: obs.size,
        input_occupancy: obs.occupancy.clone(),
        input_semantics: obs.semantics.clone(),
        target_occupancy,
        target_semantics,
    }
}

pub(crate) fn observe_sample<R: Rng + ?Sized>(world: &GridWorld, pose: Pose, cfg: &ObsConfig, rng: &mut R) -> (LocalObservation, TrainingSample) {
    let obs = observe(world, pose, cfg, rng);
    let sample = training_sample(&obs, world);
    (obs, sample)
}
