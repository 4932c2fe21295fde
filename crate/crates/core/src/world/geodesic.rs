use alloc::vec::Vec;

use super::{GridWorld, WorldError};
use crate::grid::{neighbors4, Cell, Grid};

/// Shortest 4-connected path length over free cells from `from` to the
/// nearest member of `targets`, or `None` when unreachable.
///
/// A target cell that is itself occupied (furniture, walls) is reached by
/// stepping into it from an adjacent free cell, so its distance is one more
/// than that neighbour's.
pub fn geodesic_distance(
    world: &GridWorld,
    from: Cell,
    targets: &[Cell],
) -> Result<Option<u32>, WorldError> {
    if !world.is_free(from) {
        return Err(WorldError::NotFree(from));
    }
    if targets.is_empty() {
        return Err(WorldError::EmptyTargets);
    }
    Ok(DistanceField::to_targets(world, targets).get(from))
}

/// Geodesic distance from every free cell to a fixed target set.
#[derive(Debug, Clone)]
pub struct DistanceField {
    dist: Grid<u32>,
}

impl DistanceField {
    const UNREACHED: u32 = u32::MAX;

    pub fn to_targets(world: &GridWorld, targets: &[Cell]) -> Self {
        let (h, w) = (world.height(), world.width());
        let mut dist = Grid::filled(h, w, Self::UNREACHED);
        let mut frontier: Vec<Cell> = Vec::new();
        let mut second: Vec<Cell> = Vec::new();
        for &t in targets {
            if world.is_free(t) {
                if *dist.get(t) != 0 {
                    dist.set(t, 0);
                    frontier.push(t);
                }
            } else {
                if world.semantic().contains(t) && *dist.get(t) == Self::UNREACHED {
                    dist.set(t, 0);
                }
                for n in neighbors4(t, h, w) {
                    if world.is_free(n) {
                        second.push(n);
                    }
                }
            }
        }
        let mut level = 0u32;
        let mut next = Vec::new();
        loop {
            if level == 0 {
                // seeds adjacent to occupied targets join at level 1
                for &s in &second {
                    if *dist.get(s) == Self::UNREACHED {
                        dist.set(s, 1);
                        next.push(s);
                    }
                }
            }
            for &c in &frontier {
                for n in neighbors4(c, h, w) {
                    if world.is_free(n) && *dist.get(n) == Self::UNREACHED {
                        dist.set(n, level + 1);
                        next.push(n);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            core::mem::swap(&mut frontier, &mut next);
            next.clear();
            level += 1;
        }
        Self { dist }
    }

    /// Distance from `cell`; `None` if unreachable or not free.
    pub fn get(&self, cell: Cell) -> Option<u32> {
        if !self.dist.contains(cell) {
            return None;
        }
        match *self.dist.get(cell) {
            Self::UNREACHED => None,
            d => Some(d),
        }
    }
}

/// One shortest free-space path from `from` to `to`, both inclusive. Ties
/// follow the fixed neighbour order, so the result is deterministic.
pub fn shortest_path(world: &GridWorld, from: Cell, to: Cell) -> Option<Vec<Cell>> {
    let field = DistanceField::to_targets(world, &[to]);
    let mut d = field.get(from)?;
    let mut path = Vec::with_capacity(d as usize + 1);
    path.push(from);
    let mut cur = from;
    while d > 0 {
        cur = neighbors4(cur, world.height(), world.width())
            .find(|&n| field.get(n) == Some(d - 1) && (n == to || world.is_free(n)))?;
        path.push(cur);
        d -= 1;
    }
    Some(path)
}
