//! Episode sampling with easy/hard difficulty predicates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistanceField, GridWorld, Heading, Pose, WorldError};
use crate::grid::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub easy_ratio: f64,
    pub hard_ratio: f64,
    /// Minimum geodesic for hard episodes; `None` means 0.35·min(width, height).
    pub hard_min_geodesic: Option<f64>,
    /// Minimum geodesic for any episode, so that no episode starts solved.
    pub min_geodesic: u32,
    pub attempts_per_episode: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            easy_ratio: 1.05,
            hard_ratio: 1.1,
            hard_min_geodesic: None,
            min_geodesic: 12,
            attempts_per_episode: 2000,
        }
    }
}

impl EpisodeConfig {
    pub fn hard_min_for(&self, world: &GridWorld) -> f64 {
        self.hard_min_geodesic
            .unwrap_or(0.35 * world.width().min(world.height()) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub world_seed: u64,
    pub start: Pose,
    pub target_class: u8,
    pub geodesic_start_to_target: u32,
    pub euclidean_start_to_target: f64,
    /// Obstacle-free 4-connected distance (Manhattan) to the nearest instance;
    /// the denominator of the difficulty ratio.
    pub free_space_start_to_target: u32,
    pub difficulty: Difficulty,
}

impl Episode {
    pub fn detour_ratio(&self) -> f64 {
        self.geodesic_start_to_target as f64 / self.free_space_start_to_target.max(1) as f64
    }
}

/// Draws `n` episodes of the requested difficulty by rejection sampling.
pub fn sample_episodes(
    world: &GridWorld,
    n: usize,
    difficulty: Difficulty,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<Vec<Episode>, WorldError> {
    let classes = world.present_object_classes();
    if classes.is_empty() {
        return Err(WorldError::EpisodeSampling {
            difficulty: difficulty.name(),
            reason: "world has no object instances".into(),
        });
    }
    let free = world.free_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fields: BTreeMap<u8, (Vec<Cell>, DistanceField)> = BTreeMap::new();
    let hard_min = config.hard_min_for(world);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut found = None;
        for _ in 0..config.attempts_per_episode {
            let start = *free
                .choose(&mut rng)
                .expect("connected worlds have free cells");
            let heading = Heading::ALL[rng.gen_range(0..4)];
            let class = *classes.choose(&mut rng).unwrap();
            let (instances, field) = fields.entry(class).or_insert_with(|| {
                let inst = world.instances(class);
                let f = DistanceField::to_targets(world, &inst);
                (inst, f)
            });
            let Some(geo) = field.get(start) else {
                continue;
            };
            let manhattan = instances.iter().map(|&c| start.manhattan(c)).min().unwrap() as u32;
            let euclid = instances
                .iter()
                .map(|&c| start.euclidean(c))
                .fold(f64::INFINITY, f64::min);
            let ep = Episode {
                world_seed: world.seed,
                start: Pose {
                    cell: start,
                    heading,
                },
                target_class: class,
                geodesic_start_to_target: geo,
                euclidean_start_to_target: euclid,
                free_space_start_to_target: manhattan,
                difficulty,
            };
            if geo < config.min_geodesic {
                continue;
            }
            let ok = match difficulty {
                Difficulty::Easy => ep.detour_ratio() >= config.easy_ratio,
                Difficulty::Hard => {
                    ep.detour_ratio() >= config.hard_ratio && geo as f64 >= hard_min
                }
            };
            if ok {
                found = Some(ep);
                break;
            }
        }
        match found {
            Some(ep) => out.push(ep),
            None => {
                return Err(WorldError::EpisodeSampling {
                    difficulty: difficulty.name(),
                    reason: format!(
                        "retry budget of {} exhausted after {} episodes",
                        config.attempts_per_episode,
                        out.len()
                    ),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::world::{
        generate_world, geodesic_distance, ClassCatalog, WorldConfig, SEM_FLOOR, SEM_WALL,
    };
    use std::string::ToString;

    #[test]
    fn open_room_has_no_hard_episodes() {
        let mut g = Grid::filled(48, 48, SEM_WALL);
        for r in 1..47 {
            for c in 1..47 {
                g.set(Cell::new(r, c), SEM_FLOOR);
            }
        }
        g.set(Cell::new(24, 24), 8);
        let w = GridWorld::from_labels(0, ClassCatalog::default(), g);
        let cfg = EpisodeConfig {
            attempts_per_episode: 300,
            ..EpisodeConfig::default()
        };
        let err = sample_episodes(&w, 1, Difficulty::Hard, &cfg, 1).unwrap_err();
        assert!(err.to_string().contains("hard"));
    }

    #[test]
    fn easy_episodes_meet_the_ratio() {
        let w = generate_world(3, &WorldConfig::sized(48, 48)).unwrap();
        let eps = sample_episodes(&w, 30, Difficulty::Easy, &EpisodeConfig::default(), 9).unwrap();
        for e in &eps {
            assert!(e.detour_ratio() >= 1.05);
            let geo = geodesic_distance(&w, e.start.cell, &w.instances(e.target_class)).unwrap();
            assert_eq!(geo, Some(e.geodesic_start_to_target));
        }
    }
}
