//! Egocentric partial observations with line-of-sight occlusion and
//! label/dropout noise.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GridWorld, Heading, Pose, OCC_UNKNOWN, SEM_UNKNOWN};
use crate::grid::{Cell, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObsConfig {
    /// Sensing range in cells (centre-to-centre Euclidean).
    pub range: f64,
    pub fov_degrees: f64,
    /// Probability of replacing a revealed semantic label by a wrong class.
    pub label_noise: f64,
    /// Probability of dropping a revealed cell back to unknown.
    pub depth_dropout: f64,
    /// Side length of the square egocentric crop; odd.
    pub crop_size: usize,
}

impl Default for ObsConfig {
    fn default() -> Self {
        Self {
            range: 14.0,
            fov_degrees: 90.0,
            label_noise: 0.1,
            depth_dropout: 0.05,
            crop_size: 33,
        }
    }
}

impl ObsConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err("label_noise must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.depth_dropout) {
            return Err("depth_dropout must lie in [0, 1)");
        }
        if self.crop_size.is_multiple_of(2) || self.crop_size < 3 {
            return Err("crop_size must be odd and at least 3");
        }
        if self.range < 0.0 || self.fov_degrees <= 0.0 {
            return Err("range and fov must be positive");
        }
        Ok(())
    }
}

/// Occupancy and semantic label crops in the agent frame: agent at the
/// centre cell, heading pointing up. Unrevealed cells carry class 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalObservation {
    pub size: usize,
    pub occupancy: Vec<u8>,
    pub semantics: Vec<u8>,
    pub pose_at_capture: Pose,
}

impl LocalObservation {
    pub fn occupancy_tensor(&self, classes: usize) -> Tensor3 {
        Tensor3::one_hot(&self.occupancy, classes, self.size, self.size)
    }

    pub fn semantic_tensor(&self, classes: usize) -> Tensor3 {
        Tensor3::one_hot(&self.semantics, classes, self.size, self.size)
    }

    pub fn revealed_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o != OCC_UNKNOWN).count()
    }
}

/// World offset `(drow, dcol)` of the crop offset `(di, dj)` (crop rows down,
/// crop columns right) for an agent facing `heading`.
pub fn egocentric_offset(heading: Heading, di: isize, dj: isize) -> (isize, isize) {
    match heading {
        Heading::N => (di, dj),
        Heading::E => (dj, -di),
        Heading::S => (-di, -dj),
        Heading::W => (-dj, di),
    }
}

/// Whether the segment between the centres of `from` and `to` crosses the
/// interior of an occupied cell other than the two endpoints. Passing exactly
/// through a cell corner does not count as crossing either side cell.
pub(crate) fn line_of_sight(world: &GridWorld, from: Cell, to: Cell) -> bool {
    let dr = to.row as i64 - from.row as i64;
    let dc = to.col as i64 - from.col as i64;
    let (adr, adc) = (dr.abs(), dc.abs());
    let (sr, sc) = (dr.signum(), dc.signum());
    let (mut r, mut c) = (from.row as i64, from.col as i64);
    // k-th row boundary crossing happens at t = (2k+1) / (2|dr|)
    let (mut k, mut m) = (0i64, 0i64);
    while (r, c) != (to.row as i64, to.col as i64) {
        let row_next = if adr == 0 {
            None
        } else {
            Some((2 * k + 1) * adc)
        };
        let col_next = if adc == 0 {
            None
        } else {
            Some((2 * m + 1) * adr)
        };
        match (row_next, col_next) {
            (Some(tr), Some(tc)) if tr == tc => {
                r += sr;
                c += sc;
                k += 1;
                m += 1;
            }
            (Some(tr), Some(tc)) if tr < tc => {
                r += sr;
                k += 1;
            }
            (Some(_), None) => {
                r += sr;
                k += 1;
            }
            _ => {
                c += sc;
                m += 1;
            }
        }
        if (r, c) != (to.row as i64, to.col as i64)
            && !world.is_free(Cell::new(r as usize, c as usize))
        {
            return false;
        }
    }
    true
}

fn in_view(pose: Pose, cell: Cell, range: f64, fov_degrees: f64) -> bool {
    let dr = cell.row as f64 - pose.cell.row as f64;
    let dc = cell.col as f64 - pose.cell.col as f64;
    let dist = crate::math::sqrt(dr * dr + dc * dc);
    if dist > range + 1e-9 {
        return false;
    }
    if dist == 0.0 || fov_degrees >= 360.0 {
        return true;
    }
    let (hr, hc) = pose.heading.delta();
    let dot = dr * hr as f64 + dc * hc as f64;
    let half = fov_degrees.to_radians() / 2.0;
    dot >= dist * libm::cos(half) - 1e-9
}

fn visible(world: &GridWorld, pose: Pose, cell: Cell, range: f64, fov_degrees: f64) -> bool {
    in_view(pose, cell, range, fov_degrees) && line_of_sight(world, pose.cell, cell)
}

/// World cells revealed from `pose`, ignoring noise and crop bounds.
pub fn visible_cells(world: &GridWorld, pose: Pose, range: f64, fov_degrees: f64) -> Vec<Cell> {
    world
        .semantic()
        .cells()
        .filter(|&c| visible(world, pose, c, range, fov_degrees))
        .collect()
}

/// Simulates one egocentric observation.
pub fn observe<R: Rng + ?Sized>(
    world: &GridWorld,
    pose: Pose,
    config: &ObsConfig,
    rng: &mut R,
) -> LocalObservation {
    let size = config.crop_size;
    let half = (size / 2) as isize;
    let k = world.catalog.semantic_len() as u8;
    let mut occupancy = vec![OCC_UNKNOWN; size * size];
    let mut semantics = vec![SEM_UNKNOWN; size * size];
    for i in 0..size {
        for j in 0..size {
            let (dr, dc) = egocentric_offset(pose.heading, i as isize - half, j as isize - half);
            let Some(cell) = pose.cell.offset(dr, dc, world.height(), world.width()) else {
                continue;
            };
            if !visible(world, pose, cell, config.range, config.fov_degrees) {
                continue;
            }
            let dropped = rng.gen_bool(config.depth_dropout);
            let corrupt = rng.gen_bool(config.label_noise);
            let wrong = rng.gen_range(1..k - 1);
            if dropped {
                continue;
            }
            let truth = world.label(cell);
            let idx = i * size + j;
            occupancy[idx] = GridWorld::occupancy_of(truth);
            semantics[idx] = if corrupt {
                // uniform over the K-2 labelled classes other than the truth
                if wrong >= truth {
                    wrong + 1
                } else {
                    wrong
                }
            } else {
                truth
            };
        }
    }
    LocalObservation {
        size,
        occupancy,
        semantics,
        pose_at_capture: pose,
    }
}

/// Ground-truth egocentric occupancy and semantic label crops at `pose`.
/// Cells beyond the world boundary read as wall.
pub fn ground_truth_crop(world: &GridWorld, pose: Pose, size: usize) -> (Vec<u8>, Vec<u8>) {
    let half = (size / 2) as isize;
    let mut occ = Vec::with_capacity(size * size);
    let mut sem = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (dr, dc) = egocentric_offset(pose.heading, i as isize - half, j as isize - half);
            let l = world.label_or_wall(pose.cell.row as isize + dr, pose.cell.col as isize + dc);
            sem.push(l);
            occ.push(GridWorld::occupancy_of(l));
        }
    }
    (occ, sem)
}
