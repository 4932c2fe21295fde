//! Geocentric belief map. Egocentric predicted crops are placed by the
//! agent pose and fused per cell with Bayes' rule; ensemble uncertainty is
//! stored last-write-wins.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::grid::{Cell, Tensor3};
use crate::math;
use crate::world::{egocentric_offset, ClassCatalog, LocalObservation, Pose, OCC_FREE, OCC_OCCUPIED, OCC_UNKNOWN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("crop cell {cell} sums to {sum}, expected 1")]
    NotNormalized { cell: usize, sum: f64 },
    #[error("crop has {got} channels, map expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("crop must be square and odd-sized, got {0}x{1}")]
    BadCrop(usize, usize),
}

/// One crop cell landing on one map cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub crop_index: usize,
    pub map_index: usize,
}

/// Maps an odd `size`×`size` egocentric crop onto a `height`×`width` map:
/// rotated so crop-up follows the heading and centred on the pose. Cells
/// falling outside the map are dropped.
pub fn egocentric_to_geocentric(size: usize, pose: Pose, height: usize, width: usize) -> Vec<Placement> {
    let half = (size / 2) as isize;
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (dr, dc) = egocentric_offset(pose.heading, i as isize - half, j as isize - half);
            if let Some(cell) = pose.cell.offset(dr, dc, height, width) {
                out.push(Placement {
                    crop_index: i * size + j,
                    map_index: cell.row * width + cell.col,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBeliefMap {
    height: usize,
    width: usize,
    semantic_classes: usize,
    /// Normalised log-probabilities, cell-major (`cell * K + k`).
    log_semantic: Vec<f64>,
    log_occupancy: Vec<f64>,
    /// Per-class ensemble variance, cell-major.
    uncertainty: Vec<f64>,
    entropy: Vec<f64>,
    bald: Vec<f64>,
    observed: Vec<bool>,
    /// Cells revealed by a raw observation (not by a prediction).
    sensed: Vec<bool>,
}

const OCC_K: usize = 3;

fn normalize_log(slot: &mut [f64]) {
    let z = math::log_sum_exp(slot);
    for v in slot {
        *v -= z;
    }
}

impl GlobalBeliefMap {
    /// Uniform prior over every class, zero uncertainty, nothing observed.
    pub fn new(height: usize, width: usize, catalog: &ClassCatalog) -> Self {
        let k = catalog.semantic_len();
        let cells = height * width;
        Self {
            height,
            width,
            semantic_classes: k,
            log_semantic: vec![-math::ln(k as f64); cells * k],
            log_occupancy: vec![-math::ln(OCC_K as f64); cells * OCC_K],
            uncertainty: vec![0.0; cells * k],
            entropy: vec![0.0; cells],
            bald: vec![0.0; cells],
            observed: vec![false; cells],
            sensed: vec![false; cells],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn semantic_classes(&self) -> usize {
        self.semantic_classes
    }

    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Posterior `P(class)` at flat cell index `index`.
    #[inline]
    pub fn probability(&self, index: usize, class: usize) -> f64 {
        math::exp(self.log_semantic[index * self.semantic_classes + class])
    }

    pub fn semantic_belief(&self, index: usize) -> Vec<f64> {
        (0..self.semantic_classes).map(|k| self.probability(index, k)).collect()
    }

    #[inline]
    pub fn occupancy_probability(&self, index: usize, class: u8) -> f64 {
        math::exp(self.log_occupancy[index * OCC_K + class as usize])
    }

    pub fn occupancy_belief(&self, index: usize) -> [f64; 3] {
        [
            self.occupancy_probability(index, OCC_UNKNOWN),
            self.occupancy_probability(index, OCC_OCCUPIED),
            self.occupancy_probability(index, OCC_FREE),
        ]
    }

    #[inline]
    pub fn variance(&self, index: usize, class: usize) -> f64 {
        self.uncertainty[index * self.semantic_classes + class]
    }

    /// Mean of the registered per-class variance.
    pub fn mean_class_variance(&self, index: usize) -> f64 {
        let k = self.semantic_classes;
        self.uncertainty[index * k..(index + 1) * k].iter().sum::<f64>() / k as f64
    }

    pub fn registered_entropy(&self, index: usize) -> f64 {
        self.entropy[index]
    }

    pub fn registered_bald(&self, index: usize) -> f64 {
        self.bald[index]
    }

    pub fn is_observed(&self, index: usize) -> bool {
        self.observed[index]
    }

    pub fn is_sensed(&self, index: usize) -> bool {
        self.sensed[index]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Per-cell argmax of the semantic belief; ties go to the lower class.
    pub fn argmax_labels(&self) -> Vec<u8> {
        let k = self.semantic_classes;
        self.log_semantic
            .chunks_exact(k)
            .map(|c| {
                let mut best = 0;
                for j in 1..k {
                    if c[j] > c[best] {
                        best = j;
                    }
                }
                best as u8
            })
            .collect()
    }

    fn check_crop(crop: &Tensor3, channels: usize) -> Result<(), BeliefError> {
        if crop.channels != channels {
            return Err(BeliefError::ChannelMismatch {
                expected: channels,
                got: crop.channels,
            });
        }
        if crop.height != crop.width || crop.height.is_multiple_of(2) {
            return Err(BeliefError::BadCrop(crop.height, crop.width));
        }
        Ok(())
    }

    fn check_normalized(crop: &Tensor3) -> Result<(), BeliefError> {
        let plane = crop.plane();
        for i in 0..plane {
            let sum: f64 = (0..crop.channels).map(|c| crop.data[c * plane + i]).sum();
            if !((sum - 1.0).abs() <= 1e-6) {
                return Err(BeliefError::NotNormalized { cell: i, sum });
            }
        }
        Ok(())
    }

    fn fuse(logs: &mut [f64], channels: usize, crop: &Tensor3, pose: Pose, height: usize, width: usize) {
        let plane = crop.plane();
        let mut evidence = vec![0.0; channels];
        for p in egocentric_to_geocentric(crop.height, pose, height, width) {
            let slot = &mut logs[p.map_index * channels..(p.map_index + 1) * channels];
            let mut any = false;
            for k in 0..channels {
                evidence[k] = math::ln(crop.data[k * plane + p.crop_index]);
                let v = slot[k] + evidence[k];
                any |= v > f64::NEG_INFINITY;
                slot[k] = v;
            }
            if !any {
                // disjoint support: trust the fresh evidence
                slot.copy_from_slice(&evidence);
            }
            normalize_log(slot);
        }
    }

    /// Bayes update of the semantic belief: `posterior_k ∝ prior_k · crop_k`
    /// on every covered cell.
    pub fn register(&mut self, crop: &Tensor3, pose: Pose) -> Result<(), BeliefError> {
        Self::check_crop(crop, self.semantic_classes)?;
        Self::check_normalized(crop)?;
        Self::fuse(&mut self.log_semantic, self.semantic_classes, crop, pose, self.height, self.width);
        for p in egocentric_to_geocentric(crop.height, pose, self.height, self.width) {
            self.observed[p.map_index] = true;
        }
        Ok(())
    }

    /// Same Bayes rule for the occupancy belief.
    pub fn register_occupancy(&mut self, crop: &Tensor3, pose: Pose) -> Result<(), BeliefError> {
        Self::check_crop(crop, OCC_K)?;
        Self::check_normalized(crop)?;
        Self::fuse(&mut self.log_occupancy, OCC_K, crop, pose, self.height, self.width);
        Ok(())
    }

    /// Overwrites the per-class variance of covered cells.
    pub fn register_uncertainty(&mut self, variance: &Tensor3, pose: Pose) -> Result<(), BeliefError> {
        Self::check_crop(variance, self.semantic_classes)?;
        let k = self.semantic_classes;
        let plane = variance.plane();
        for p in egocentric_to_geocentric(variance.height, pose, self.height, self.width) {
            for c in 0..k {
                self.uncertainty[p.map_index * k + c] = variance.data[c * plane + p.crop_index].max(0.0);
            }
        }
        Ok(())
    }

    /// Overwrites the per-cell entropy and BALD fields of covered cells.
    pub fn register_acquisition(&mut self, size: usize, entropy: &[f64], bald: &[f64], pose: Pose) {
        for p in egocentric_to_geocentric(size, pose, self.height, self.width) {
            self.entropy[p.map_index] = entropy[p.crop_index];
            self.bald[p.map_index] = bald[p.crop_index];
        }
    }

    /// Records which cells an observation actually revealed.
    pub fn mark_sensed(&mut self, obs: &LocalObservation) {
        for p in egocentric_to_geocentric(obs.size, obs.pose_at_capture, self.height, self.width) {
            if obs.occupancy[p.crop_index] != OCC_UNKNOWN {
                self.sensed[p.map_index] = true;
            }
        }
    }

    /// Pins a cell to certainly-occupied, e.g. after a collision.
    pub fn mark_occupied(&mut self, cell: Cell) {
        let i = self.index(cell);
        let slot = &mut self.log_occupancy[i * OCC_K..(i + 1) * OCC_K];
        slot.fill(f64::NEG_INFINITY);
        slot[OCC_OCCUPIED as usize] = 0.0;
    }
}
