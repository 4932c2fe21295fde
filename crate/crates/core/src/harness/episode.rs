use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Perceiver};
use crate::belief::GlobalBeliefMap;
use crate::grid::{neighbors4, Cell};
use crate::metrics::{self, EpisodeResult};
use crate::nav::{next_action, plan_on, step, Action, AgentState, NavError, PlannerConfig, TraversalGrid};
use crate::policy::{select_goal, stop_check_with, Goal, NavConfig, StopDistance, StrategyConfig};
use crate::world::{observe, DistanceField, Episode, GridWorld, Heading, ObsConfig};

/// Which agent drives an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    /// Map-predicting agent with a goal-selection strategy.
    Mapping { strategy: StrategyConfig },
    /// Uniformly random actions, including stop.
    RandomWalk,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    /// Stop exactly when the true distance falls within the success radius.
    pub oracle_stop: bool,
    /// Plan on the true map instead of the believed one.
    pub gt_path: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalReason {
    Initial,
    Interval,
    Reached,
    Unreachable,
}

impl GoalReason {
    pub fn name(self) -> &'static str {
        match self {
            GoalReason::Initial => "initial",
            GoalReason::Interval => "interval",
            GoalReason::Reached => "reached",
            GoalReason::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRecord {
    pub step: u32,
    pub goal: Cell,
    pub score: f64,
    pub reason: GoalReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u32,
    pub row: usize,
    pub col: usize,
    pub heading: Heading,
    pub action: Action,
    pub goal: Option<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub result: EpisodeResult,
    pub trajectory: Vec<TrajectoryRecord>,
    pub goals: Vec<GoalRecord>,
    /// Why the agent gave up early, if it did.
    pub aborted: Option<String>,
    /// Believed map at termination (mapping agents only).
    #[serde(skip)]
    pub final_map: Option<GlobalBeliefMap>,
}

fn goal_reached(grid: &TraversalGrid, at: Cell, goal: Cell) -> bool {
    at == goal || (at.manhattan(goal) == 1 && grid.is_blocked(goal))
}

/// Runs one object-goal episode: observe, predict and fuse, reselect the
/// goal when it is reached or every `replan_interval` steps, check the stop
/// condition, then take one local-policy action. Ends on stop or when the
/// step budget runs out.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    world: &GridWorld,
    episode: &Episode,
    perceiver: &Perceiver,
    agent_kind: &AgentKind,
    nav: &NavConfig,
    planner: &PlannerConfig,
    obs: &ObsConfig,
    ablations: Ablations,
    seed: u64,
) -> Result<EpisodeOutcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = world.instances(episode.target_class);
    let truth = DistanceField::to_targets(world, &targets);
    let true_grid = TraversalGrid::from_world(world);
    let mut agent = AgentState::new(episode.start);
    let mut trajectory = Vec::new();
    let mut goals = Vec::new();
    let mut aborted = None;
    let mut final_map = None;

    match agent_kind {
        AgentKind::RandomWalk => {
            while agent.steps_taken < nav.max_steps && !agent.stopped {
                let action = Action::ALL[rng.gen_range(0..4)];
                trajectory.push(record(&agent, action, None));
                agent = step(&agent, action, world).expect("not stopped");
            }
        }
        AgentKind::Mapping { strategy } => {
            let mut map = GlobalBeliefMap::new(world.height(), world.width(), &world.catalog);
            let mut goal: Option<Goal> = None;
            let mut excluded: Vec<Cell> = Vec::new();
            let interval = nav.replan_interval.max(1);
            while agent.steps_taken < nav.max_steps && !agent.stopped {
                let t = agent.steps_taken;
                let o = observe(world, agent.pose, obs, &mut rng);
                perceiver.perceive(&mut map, &o)?;
                if ablations.oracle_stop && truth.get(agent.pose.cell).is_some_and(|d| d <= nav.success_radius) {
                    trajectory.push(record(&agent, Action::Stop, goal.map(|g| g.cell)));
                    agent = step(&agent, Action::Stop, world).expect("not stopped");
                    break;
                }
                let grid = if ablations.gt_path {
                    true_grid.clone()
                } else {
                    TraversalGrid::from_belief(&map, planner)
                };
                let mut reason = match goal {
                    None => Some(GoalReason::Initial),
                    Some(g) if goal_reached(&grid, agent.pose.cell, g.cell) => Some(GoalReason::Reached),
                    Some(_) if t.is_multiple_of(interval) => Some(GoalReason::Interval),
                    Some(_) => None,
                };
                let mut path = None;
                for _ in 0..16 {
                    if let Some(r) = reason {
                        if let (GoalReason::Reached, Some(g)) = (r, goal) {
                            excluded.push(g.cell);
                        }
                        match select_goal(&map, episode.target_class, strategy, agent.pose, planner, &excluded, &mut rng) {
                            Ok(g) => {
                                goals.push(GoalRecord { step: t, goal: g.cell, score: g.score, reason: r });
                                goal = Some(g);
                            }
                            Err(e) => {
                                aborted = Some(format!("{e}"));
                                break;
                            }
                        }
                    }
                    let g = goal.expect("goal selected");
                    if goal_reached(&grid, agent.pose.cell, g.cell) {
                        reason = Some(GoalReason::Reached);
                        continue;
                    }
                    match plan_on(&grid, agent.pose.cell, g.cell) {
                        Ok(p) => {
                            path = Some(p.cells);
                            break;
                        }
                        Err(NavError::Unreachable) => {
                            excluded.push(g.cell);
                            reason = Some(GoalReason::Unreachable);
                        }
                        Err(e) => {
                            aborted = Some(format!("{e}"));
                            break;
                        }
                    }
                }
                let Some(path) = path else {
                    aborted.get_or_insert_with(|| "no plannable goal".into());
                    break;
                };
                let stop = !ablations.oracle_stop && {
                    let dist: Vec<Option<u32>> = match nav.stop_distance_mode {
                        StopDistance::Believed => TraversalGrid::from_belief(&map, planner).goal_distances(agent.pose.cell),
                        StopDistance::True => true_distances_from(world, agent.pose.cell),
                    };
                    stop_check_with(&map, episode.target_class, &path, nav, |c| dist[map.index(c)])
                };
                let action = if stop {
                    Action::Stop
                } else {
                    next_action(&path, agent.pose).expect("path starts at the agent")
                };
                trajectory.push(record(&agent, action, goal.map(|g| g.cell)));
                agent = step(&agent, action, world).expect("not stopped");
                if let Some(c) = agent.last_collision {
                    map.mark_occupied(c);
                }
            }
            final_map = Some(map);
        }
    }

    let mut result = EpisodeResult {
        success: false,
        stop_called: agent.stopped,
        path_length: agent.distance_travelled,
        shortest_geodesic: episode.geodesic_start_to_target,
        initial_distance: episode.geodesic_start_to_target,
        final_distance: truth.get(agent.pose.cell),
        steps: agent.steps_taken,
        collisions: agent.collision_count,
    };
    result.success = metrics::success(&result, nav.success_radius, nav.max_steps);
    Ok(EpisodeOutcome {
        result,
        trajectory,
        goals,
        aborted,
        final_map,
    })
}

fn record(agent: &AgentState, action: Action, goal: Option<Cell>) -> TrajectoryRecord {
    TrajectoryRecord {
        step: agent.steps_taken,
        row: agent.pose.cell.row,
        col: agent.pose.cell.col,
        heading: agent.pose.heading,
        action,
        goal,
    }
}

/// True geodesic from `from` to every cell; occupied cells are entered
/// from their nearest free neighbour.
fn true_distances_from(world: &GridWorld, from: Cell) -> Vec<Option<u32>> {
    let field = DistanceField::to_targets(world, &[from]);
    world
        .semantic()
        .cells()
        .map(|c| {
            if world.is_free(c) {
                field.get(c)
            } else {
                neighbors4(c, world.height(), world.width())
                    .filter(|&n| world.is_free(n))
                    .filter_map(|n| field.get(n))
                    .min()
                    .map(|d| d + 1)
            }
        })
        .collect()
}
