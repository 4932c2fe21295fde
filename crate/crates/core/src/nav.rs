//! Local policy: A* over the believed occupancy and discrete agent dynamics.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::GlobalBeliefMap;
use crate::grid::{neighbors4, Cell};
use crate::world::{GridWorld, Heading, Pose, OCC_FREE, OCC_OCCUPIED, OCC_UNKNOWN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NavError {
    #[error("no path to the goal")]
    Unreachable,
    #[error("path is empty")]
    EmptyPath,
    #[error("path has no next cell")]
    PathExhausted,
    #[error("path does not start at the agent's cell")]
    NotOnPath,
    #[error("agent already stopped")]
    AlreadyStopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Cells with believed `P(occupied)` above this are impassable.
    pub obstacle_threshold: f64,
    /// Step cost of entering an unknown-dominant cell.
    pub unknown_cost: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            obstacle_threshold: 0.6,
            unknown_cost: 2.0,
        }
    }
}

/// Per-cell entry cost; `None` marks a blocked cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalGrid {
    pub height: usize,
    pub width: usize,
    pub cost: Vec<Option<f64>>,
}

impl TraversalGrid {
    pub fn from_belief(map: &GlobalBeliefMap, cfg: &PlannerConfig) -> Self {
        let cost = (0..map.cell_count())
            .map(|i| {
                let [unknown, occupied, free] = map.occupancy_belief(i);
                if occupied > cfg.obstacle_threshold {
                    None
                } else if unknown >= occupied && unknown >= free {
                    Some(cfg.unknown_cost)
                } else {
                    Some(1.0)
                }
            })
            .collect();
        Self {
            height: map.height(),
            width: map.width(),
            cost,
        }
    }

    /// Ground-truth traversability: free cells cost 1, everything else blocked.
    pub fn from_world(world: &GridWorld) -> Self {
        let cost = world
            .semantic()
            .cells()
            .map(|c| if world.is_free(c) { Some(1.0) } else { None })
            .collect();
        Self {
            height: world.height(),
            width: world.width(),
            cost,
        }
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.cost[self.index(cell)].is_none()
    }

    /// Cost of stepping into `cell` when heading for `goal`. The goal itself
    /// may be blocked (an object is approached, not entered) and then costs 1.
    #[inline]
    pub fn entry_cost(&self, cell: Cell, goal: Cell) -> Option<f64> {
        match self.cost[self.index(cell)] {
            None if cell == goal => Some(1.0),
            c => c,
        }
    }

    /// Cells reachable from `from` through unblocked cells, with their
    /// unit-step distances.
    pub fn reachable(&self, from: Cell) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.cost.len()];
        dist[self.index(from)] = Some(0);
        let mut frontier = vec![from];
        let mut d = 0;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for c in frontier {
                for n in neighbors4(c, self.height, self.width) {
                    let i = self.index(n);
                    if dist[i].is_none() && self.cost[i].is_some() {
                        dist[i] = Some(d + 1);
                        next.push(n);
                    }
                }
            }
            frontier = next;
            d += 1;
        }
        dist
    }

    /// Like [`reachable`](Self::reachable), but blocked cells bordering the
    /// reachable region also get a distance (one past their nearest
    /// reachable neighbour): they can be approached as goals.
    pub fn goal_distances(&self, from: Cell) -> Vec<Option<u32>> {
        let mut dist = self.reachable(from);
        let mut extra = Vec::new();
        for (i, d) in dist.iter().enumerate() {
            if d.is_some() || self.cost[i].is_some() {
                continue;
            }
            let cell = Cell::new(i / self.width, i % self.width);
            let best = neighbors4(cell, self.height, self.width)
                .filter_map(|n| dist[self.index(n)])
                .min();
            if let Some(b) = best {
                extra.push((i, b + 1));
            }
        }
        for (i, d) in extra {
            dist[i] = Some(d);
        }
        dist
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// From the start cell to the goal, inclusive.
    pub cells: Vec<Cell>,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    h: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (f, h, index)
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-cost 4-connected path with the admissible Manhattan heuristic
/// (every step costs at least 1).
pub fn plan_on(grid: &TraversalGrid, from: Cell, to: Cell) -> Result<PlannedPath, NavError> {
    let n = grid.cost.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let start = grid.index(from);
    let goal = grid.index(to);
    g[start] = 0.0;
    let h0 = from.manhattan(to) as f64;
    open.push(Open { f: h0, h: h0, index: start });
    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == goal {
            let mut cells = vec![to];
            let mut cur = index;
            while cur != start {
                cur = parent[cur];
                cells.push(Cell::new(cur / grid.width, cur % grid.width));
            }
            cells.reverse();
            return Ok(PlannedPath { cells, cost: g[goal] });
        }
        let cell = Cell::new(index / grid.width, index % grid.width);
        for nb in neighbors4(cell, grid.height, grid.width) {
            let Some(step) = grid.entry_cost(nb, to) else { continue };
            let j = grid.index(nb);
            let cand = g[index] + step;
            if cand < g[j] {
                g[j] = cand;
                parent[j] = index;
                let h = nb.manhattan(to) as f64;
                open.push(Open { f: cand + h, h, index: j });
            }
        }
    }
    Err(NavError::Unreachable)
}

/// Plans on the believed occupancy of `map`.
pub fn plan_path(map: &GlobalBeliefMap, from: Cell, to: Cell, cfg: &PlannerConfig) -> Result<PlannedPath, NavError> {
    plan_on(&TraversalGrid::from_belief(map, cfg), from, to)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Stop => "stop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub steps_taken: u32,
    pub collision_count: u32,
    /// Successful forward moves, i.e. path length in cells.
    pub distance_travelled: u32,
    pub stopped: bool,
    /// Cell the last forward action bumped into, if any.
    pub last_collision: Option<Cell>,
}

impl AgentState {
    pub fn new(pose: Pose) -> Self {
        Self {
            pose,
            steps_taken: 0,
            collision_count: 0,
            distance_travelled: 0,
            stopped: false,
            last_collision: None,
        }
    }
}

/// Applies one action against the true world.
pub fn step(agent: &AgentState, action: Action, world: &GridWorld) -> Result<AgentState, NavError> {
    if agent.stopped {
        return Err(NavError::AlreadyStopped);
    }
    let mut next = *agent;
    next.steps_taken += 1;
    next.last_collision = None;
    match action {
        Action::Forward => {
            let (dr, dc) = agent.pose.heading.delta();
            match agent.pose.cell.offset(dr, dc, world.height(), world.width()) {
                Some(c) if world.is_free(c) => {
                    next.pose.cell = c;
                    next.distance_travelled += 1;
                }
                blocked => {
                    next.collision_count += 1;
                    next.last_collision = blocked;
                }
            }
        }
        Action::TurnLeft => next.pose.heading = agent.pose.heading.left(),
        Action::TurnRight => next.pose.heading = agent.pose.heading.right(),
        Action::Stop => next.stopped = true,
    }
    Ok(next)
}

/// Next action to follow `path` from `pose`: turn toward the next cell, or
/// move forward when aligned. A cell behind is reached by turning left.
pub fn next_action(path: &[Cell], pose: Pose) -> Result<Action, NavError> {
    let first = *path.first().ok_or(NavError::EmptyPath)?;
    if first != pose.cell {
        return Err(NavError::NotOnPath);
    }
    let next = *path.get(1).ok_or(NavError::PathExhausted)?;
    let dr = next.row as isize - first.row as isize;
    let dc = next.col as isize - first.col as isize;
    let want = Heading::from_delta(dr, dc).ok_or(NavError::NotOnPath)?;
    Ok(if want == pose.heading {
        Action::Forward
    } else if want == pose.heading.right() {
        Action::TurnRight
    } else {
        Action::TurnLeft
    })
}

/// Believed occupancy class with the highest probability.
pub fn believed_occupancy_class(map: &GlobalBeliefMap, index: usize) -> u8 {
    let b = map.occupancy_belief(index);
    let mut best = OCC_UNKNOWN;
    for c in [OCC_OCCUPIED, OCC_FREE] {
        if b[c as usize] > b[best as usize] {
            best = c;
        }
    }
    best
}
