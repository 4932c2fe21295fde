use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{observe_sample, HarnessError, Perceiver};
use crate::belief::GlobalBeliefMap;
use crate::grid::Cell;
use crate::nav::{next_action, plan_path, step, AgentState, NavError, PlannerConfig};
use crate::policy::{select_active_target, ActiveObjective, Goal};
use crate::predictor::TrainingSample;
use crate::world::{shortest_path, GridWorld, Heading, ObsConfig, Pose};

fn heading_towards(from: Cell, to: Cell) -> Option<Heading> {
    Heading::from_delta(to.row as isize - from.row as isize, to.col as isize - from.col as isize)
}

fn random_free<R: Rng + ?Sized>(free: &[Cell], rng: &mut R) -> Cell {
    free[rng.gen_range(0..free.len())]
}

/// Samples along true shortest paths between random free-cell pairs,
/// visiting the worlds round-robin, until exactly `budget` samples exist.
pub fn collect_offline(worlds: &[GridWorld], budget: usize, obs: &ObsConfig, seed: u64) -> Result<Vec<TrainingSample>, HarnessError> {
    let mut out = Vec::with_capacity(budget);
    if budget == 0 {
        return Ok(out);
    }
    if worlds.is_empty() {
        return Err(HarnessError::NoWorlds);
    }
    let free: Vec<Vec<Cell>> = worlds.iter().map(GridWorld::free_cells).collect();
    if free.iter().any(Vec::is_empty) {
        return Err(HarnessError::NoFreeCells);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = 0;
    while out.len() < budget {
        let world = &worlds[w % worlds.len()];
        let cells = &free[w % worlds.len()];
        w += 1;
        let a = random_free(cells, &mut rng);
        let b = random_free(cells, &mut rng);
        let Some(path) = shortest_path(world, a, b) else { continue };
        let mut heading = Heading::ALL[rng.gen_range(0..4)];
        for (i, &cell) in path.iter().enumerate() {
            if let Some(h) = path.get(i + 1).and_then(|&n| heading_towards(cell, n)) {
                heading = h;
            }
            let (_, sample) = observe_sample(world, Pose { cell, heading }, obs, &mut rng);
            out.push(sample);
            if out.len() == budget {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActiveConfig {
    pub objective: ActiveObjective,
    /// Destination reselection interval in steps.
    pub replan_interval: u32,
    pub planner: PlannerConfig,
}

impl Default for ActiveConfig {
    fn default() -> Self {
        Self {
            objective: ActiveObjective::Variance,
            replan_interval: 20,
            planner: PlannerConfig::default(),
        }
    }
}

/// Bookkeeping of one active collection run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveStats {
    /// Destinations chosen, as (world index, step, cell, acquisition value).
    pub destinations: Vec<(usize, u32, Cell, f64)>,
    /// Worlds abandoned because no destination could be found.
    pub deadlocks: usize,
}

/// Navigates towards cells of maximal acquisition value under the current
/// ensemble, recording a sample at every step. Each world gets an equal
/// share of the budget; a world that deadlocks passes its remainder on.
/// Returns exactly `budget` samples unless every world deadlocks.
pub fn collect_active(
    worlds: &[GridWorld],
    perceiver: &Perceiver,
    budget: usize,
    obs: &ObsConfig,
    cfg: &ActiveConfig,
    seed: u64,
) -> Result<(Vec<TrainingSample>, ActiveStats), HarnessError> {
    let mut out = Vec::with_capacity(budget);
    let mut stats = ActiveStats::default();
    if budget == 0 {
        return Ok((out, stats));
    }
    if worlds.is_empty() {
        return Err(HarnessError::NoWorlds);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stalled_rounds = 0;
    while out.len() < budget {
        let before = out.len();
        for (wi, world) in worlds.iter().enumerate() {
            let remaining_worlds = worlds.len() - wi;
            let quota = (budget - out.len()).div_ceil(remaining_worlds);
            let free = world.free_cells();
            if free.is_empty() || quota == 0 {
                continue;
            }
            let start = Pose {
                cell: random_free(&free, &mut rng),
                heading: Heading::ALL[rng.gen_range(0..4)],
            };
            let got = active_episode(world, perceiver, start, quota, obs, cfg, &mut rng, &mut out, &mut stats, wi)?;
            if !got {
                stats.deadlocks += 1;
            }
        }
        if out.len() == before {
            stalled_rounds += 1;
            if stalled_rounds >= 3 {
                break;
            }
        }
    }
    Ok((out, stats))
}

/// Runs one collection walk of up to `quota` steps. Returns `false` on
/// deadlock.
#[allow(clippy::too_many_arguments)]
fn active_episode(
    world: &GridWorld,
    perceiver: &Perceiver,
    start: Pose,
    quota: usize,
    obs_cfg: &ObsConfig,
    cfg: &ActiveConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<TrainingSample>,
    stats: &mut ActiveStats,
    world_index: usize,
) -> Result<bool, HarnessError> {
    let mut map = GlobalBeliefMap::new(world.height(), world.width(), &world.catalog);
    let mut agent = AgentState::new(start);
    let mut goal: Option<Goal> = None;
    let mut excluded: Vec<Cell> = Vec::new();
    let interval = cfg.replan_interval.max(1);
    for t in 0..quota as u32 {
        let (o, sample) = observe_sample(world, agent.pose, obs_cfg, rng);
        out.push(sample);
        perceiver.perceive(&mut map, &o)?;
        let mut path = None;
        for _ in 0..8 {
            let reached = goal.is_some_and(|g| agent.pose.cell.manhattan(g.cell) <= 1);
            if goal.is_none() || reached || t % interval == 0 {
                if let Some(g) = goal.filter(|_| reached) {
                    excluded.push(g.cell);
                }
                match select_active_target(&map, cfg.objective, agent.pose, &cfg.planner, &excluded) {
                    Ok(g) => {
                        stats.destinations.push((world_index, t, g.cell, g.score));
                        goal = Some(g);
                    }
                    Err(_) => return Ok(false),
                }
            }
            let g = goal.expect("goal set above");
            match plan_path(&map, agent.pose.cell, g.cell, &cfg.planner) {
                Ok(p) if p.cells.len() >= 2 => {
                    path = Some(p.cells);
                    break;
                }
                Ok(_) | Err(NavError::Unreachable) => {
                    excluded.push(g.cell);
                    goal = None;
                }
                Err(_) => return Ok(false),
            }
        }
        let Some(path) = path else { return Ok(false) };
        let action = next_action(&path, agent.pose).expect("path starts at the agent");
        agent = step(&agent, action, world).expect("collection never stops");
        if let Some(c) = agent.last_collision {
            map.mark_occupied(c);
        }
    }
    Ok(true)
}
