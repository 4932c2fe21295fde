use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Perceiver};
use crate::belief::{egocentric_to_geocentric, GlobalBeliefMap};
use crate::grid::Cell;
use crate::metrics::{Confusion, MapMetrics};
use crate::nav::believed_occupancy_class;
use crate::world::{
    egocentric_offset, observe, shortest_path, GridWorld, Heading, LocalObservation, ObsConfig, Pose, OCC_FREE,
    OCC_OCCUPIED, OCC_UNKNOWN, SEM_UNKNOWN,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapEvalConfig {
    pub sequences: usize,
    pub sequence_length: usize,
    pub seed: u64,
}

impl Default for MapEvalConfig {
    fn default() -> Self {
        Self {
            sequences: 100,
            sequence_length: 10,
            seed: 0,
        }
    }
}

/// Confusion counts and derived metrics of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub semantic: MapMetrics,
    pub occupancy: MapMetrics,
    pub semantic_confusion: Confusion,
    pub occupancy_confusion: Confusion,
}

impl MethodMetrics {
    fn from_confusions(sem: Confusion, occ: Confusion) -> Self {
        let sem_classes: Vec<u8> = (1..sem.classes as u8).collect();
        Self {
            semantic: sem.metrics(&sem_classes),
            occupancy: occ.metrics(&[OCC_OCCUPIED, OCC_FREE]),
            semantic_confusion: sem,
            occupancy_confusion: occ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEvalReport {
    pub sequences: usize,
    /// Labels of the final observation only.
    pub single_view: MethodMetrics,
    /// Labels of all observations of the sequence, latest first.
    pub multi_view: MethodMetrics,
    /// Argmax of the fused ensemble beliefs, one entry per ensemble.
    pub ensembles: Vec<MethodMetrics>,
}

struct Sequence<'w> {
    world: &'w GridWorld,
    observations: Vec<LocalObservation>,
}

fn sample_sequence<'w, R: Rng + ?Sized>(world: &'w GridWorld, len: usize, obs: &ObsConfig, rng: &mut R) -> Option<Sequence<'w>> {
    let free = world.free_cells();
    if free.is_empty() || len == 0 {
        return None;
    }
    for _ in 0..200 {
        let a = free[rng.gen_range(0..free.len())];
        let b = free[rng.gen_range(0..free.len())];
        let Some(path) = shortest_path(world, a, b) else { continue };
        if path.len() < len + 1 {
            continue;
        }
        let observations = (0..len)
            .map(|i| {
                let (c, n) = (path[i], path[i + 1]);
                let heading = Heading::from_delta(n.row as isize - c.row as isize, n.col as isize - c.col as isize)
                    .expect("path steps are 4-connected");
                observe(world, Pose { cell: c, heading }, obs, rng)
            })
            .collect();
        return Some(Sequence { world, observations });
    }
    None
}

/// In-world cells of the egocentric crop at `pose`, in crop order.
fn crop_cells(world: &GridWorld, pose: Pose, size: usize) -> Vec<(usize, Cell)> {
    let half = (size / 2) as isize;
    let mut out = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (dr, dc) = egocentric_offset(pose.heading, i as isize - half, j as isize - half);
            if let Some(c) = pose.cell.offset(dr, dc, world.height(), world.width()) {
                out.push((i * size + j, c));
            }
        }
    }
    out
}

/// Compares the single-view projection, the multi-view projection and the
/// fused prediction of each ensemble on identical observation sequences,
/// scoring each against the ground truth of the final pose's crop.
pub fn eval_map(ensembles: &[&Perceiver], worlds: &[GridWorld], obs: &ObsConfig, cfg: &MapEvalConfig) -> Result<MapEvalReport, HarnessError> {
    if worlds.is_empty() {
        return Err(HarnessError::NoWorlds);
    }
    let k = worlds[0].catalog.semantic_len();
    let new_pair = || (Confusion::new(k), Confusion::new(3));
    let (mut single_sem, mut single_occ) = new_pair();
    let (mut multi_sem, mut multi_occ) = new_pair();
    let mut ens: Vec<(Confusion, Confusion)> = ensembles.iter().map(|_| new_pair()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut done = 0;
    for s in 0..cfg.sequences {
        let world = &worlds[s % worlds.len()];
        let Some(seq) = sample_sequence(world, cfg.sequence_length, obs, &mut rng) else { continue };
        done += 1;
        let (h, w) = (world.height(), world.width());
        let last = seq.observations.last().expect("non-empty sequence");
        let pose = last.pose_at_capture;
        let cells = crop_cells(seq.world, pose, last.size);
        let gt_sem: Vec<u8> = cells.iter().map(|&(_, c)| world.label(c)).collect();
        let gt_occ: Vec<u8> = gt_sem.iter().map(|&l| GridWorld::occupancy_of(l)).collect();

        let pred_sem: Vec<u8> = cells.iter().map(|&(i, _)| last.semantics[i]).collect();
        let pred_occ: Vec<u8> = cells.iter().map(|&(i, _)| last.occupancy[i]).collect();
        single_sem.add(&pred_sem, &gt_sem, None).expect("labels in range");
        single_occ.add(&pred_occ, &gt_occ, None).expect("labels in range");

        let mut acc_sem = vec![SEM_UNKNOWN; h * w];
        let mut acc_occ = vec![OCC_UNKNOWN; h * w];
        for o in &seq.observations {
            for p in egocentric_to_geocentric(o.size, o.pose_at_capture, h, w) {
                if o.occupancy[p.crop_index] != OCC_UNKNOWN {
                    acc_sem[p.map_index] = o.semantics[p.crop_index];
                    acc_occ[p.map_index] = o.occupancy[p.crop_index];
                }
            }
        }
        let at = |c: Cell| c.row * w + c.col;
        let pred_sem: Vec<u8> = cells.iter().map(|&(_, c)| acc_sem[at(c)]).collect();
        let pred_occ: Vec<u8> = cells.iter().map(|&(_, c)| acc_occ[at(c)]).collect();
        multi_sem.add(&pred_sem, &gt_sem, None).expect("labels in range");
        multi_occ.add(&pred_occ, &gt_occ, None).expect("labels in range");

        for (e, (cs, co)) in ensembles.iter().zip(ens.iter_mut()) {
            let mut map = GlobalBeliefMap::new(h, w, &world.catalog);
            for o in &seq.observations {
                e.perceive(&mut map, o)?;
            }
            let labels = map.argmax_labels();
            let pred_sem: Vec<u8> = cells.iter().map(|&(_, c)| labels[at(c)]).collect();
            let pred_occ: Vec<u8> = cells.iter().map(|&(_, c)| believed_occupancy_class(&map, at(c))).collect();
            cs.add(&pred_sem, &gt_sem, None).expect("labels in range");
            co.add(&pred_occ, &gt_occ, None).expect("labels in range");
        }
    }
    Ok(MapEvalReport {
        sequences: done,
        single_view: MethodMetrics::from_confusions(single_sem, single_occ),
        multi_view: MethodMetrics::from_confusions(multi_sem, multi_occ),
        ensembles: ens.into_iter().map(|(s, o)| MethodMetrics::from_confusions(s, o)).collect(),
    })
}
