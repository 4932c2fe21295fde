//! Synthetic indoor gridworlds: generation, geodesics, observation and
//! episode sampling.

mod catalog;
mod episodes;
mod generate;
mod geodesic;
mod observe;

pub use catalog::{
    ClassCatalog, OCC_FREE, OCC_OCCUPIED, OCC_UNKNOWN, SEM_FLOOR, SEM_UNKNOWN, SEM_WALL,
};
pub use episodes::{sample_episodes, Difficulty, Episode, EpisodeConfig};
pub use generate::{generate_world, PriorRule, WorldConfig};
pub use geodesic::{geodesic_distance, shortest_path, DistanceField};
pub use observe::{
    egocentric_offset, ground_truth_crop, observe, visible_cells, LocalObservation, ObsConfig,
};

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{neighbors4, Cell, Grid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("rooms don't fit: {0}")]
    Infeasible(String),
    #[error("cell ({row}, {col}) is not free", row = .0.row, col = .0.col)]
    NotFree(Cell),
    #[error("target set is empty")]
    EmptyTargets,
    #[error("cannot sample {difficulty} episodes: {reason}")]
    EpisodeSampling {
        difficulty: &'static str,
        reason: String,
    },
}

/// Agent heading in the world frame. North is decreasing row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];

    /// Unit step `(drow, dcol)`.
    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::N => (-1, 0),
            Heading::E => (0, 1),
            Heading::S => (1, 0),
            Heading::W => (0, -1),
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::N => Heading::W,
            Heading::W => Heading::S,
            Heading::S => Heading::E,
            Heading::E => Heading::N,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }

    /// Number of clockwise quarter turns from north.
    pub fn quarter_turns(self) -> usize {
        match self {
            Heading::N => 0,
            Heading::E => 1,
            Heading::S => 2,
            Heading::W => 3,
        }
    }

    pub fn from_delta(dr: isize, dc: isize) -> Option<Heading> {
        Heading::ALL.into_iter().find(|h| h.delta() == (dr, dc))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub cell: Cell,
    pub heading: Heading,
}

impl Pose {
    pub fn new(row: usize, col: usize, heading: Heading) -> Self {
        Self {
            cell: Cell::new(row, col),
            heading,
        }
    }
}

/// Fully labelled ground-truth world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub seed: u64,
    /// Metres per cell.
    pub cell_size: f64,
    pub catalog: ClassCatalog,
    semantic: Grid<u8>,
}

impl GridWorld {
    /// Builds a world from a semantic label grid. Occupancy is derived.
    pub fn from_labels(seed: u64, catalog: ClassCatalog, semantic: Grid<u8>) -> Self {
        Self {
            seed,
            cell_size: 0.1,
            catalog,
            semantic,
        }
    }

    pub fn width(&self) -> usize {
        self.semantic.width()
    }

    pub fn height(&self) -> usize {
        self.semantic.height()
    }

    pub fn semantic(&self) -> &Grid<u8> {
        &self.semantic
    }

    pub fn label(&self, cell: Cell) -> u8 {
        *self.semantic.get(cell)
    }

    /// Ground-truth label, with out-of-bounds cells reading as wall.
    pub fn label_or_wall(&self, row: isize, col: isize) -> u8 {
        if row < 0 || col < 0 || row >= self.height() as isize || col >= self.width() as isize {
            SEM_WALL
        } else {
            self.label(Cell::new(row as usize, col as usize))
        }
    }

    pub fn occupancy_of(label: u8) -> u8 {
        match label {
            SEM_UNKNOWN => OCC_UNKNOWN,
            SEM_FLOOR => OCC_FREE,
            _ => OCC_OCCUPIED,
        }
    }

    pub fn occupancy(&self) -> Grid<u8> {
        self.semantic.map(|&l| Self::occupancy_of(l))
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.semantic.contains(cell) && self.label(cell) == SEM_FLOOR
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        self.semantic.cells().filter(|&c| self.is_free(c)).collect()
    }

    /// All cells carrying semantic class `class`.
    pub fn instances(&self, class: u8) -> Vec<Cell> {
        self.semantic
            .cells()
            .filter(|&c| self.label(c) == class)
            .collect()
    }

    /// Object classes with at least one instance, ascending.
    pub fn present_object_classes(&self) -> Vec<u8> {
        let k = self.catalog.semantic_len();
        let mut present = alloc::vec![false; k];
        for &l in self.semantic.as_slice() {
            present[l as usize] = true;
        }
        (0..k as u8)
            .filter(|&c| self.catalog.is_object(c) && present[c as usize])
            .collect()
    }

    /// Size of every 4-connected free component, largest first.
    pub fn free_components(&self) -> Vec<usize> {
        let mut seen = Grid::filled(self.height(), self.width(), false);
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in self.semantic.cells() {
            if !self.is_free(start) || *seen.get(start) {
                continue;
            }
            seen.set(start, true);
            stack.push(start);
            let mut size = 0;
            while let Some(c) = stack.pop() {
                size += 1;
                for n in neighbors4(c, self.height(), self.width()) {
                    if self.is_free(n) && !*seen.get(n) {
                        seen.set(n, true);
                        stack.push(n);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_turns_form_a_cycle() {
        for h in Heading::ALL {
            assert_eq!(h.left().left().left().left(), h);
            assert_eq!(h.left().right(), h);
        }
        assert_eq!(Heading::N.right(), Heading::E);
    }
}
