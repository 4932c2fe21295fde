//! Long-term goal selection, active-training targets and the stop decision.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::GlobalBeliefMap;
use crate::grid::{neighbors4, Cell};
use crate::math;
use crate::nav::{PlannerConfig, TraversalGrid};
use crate::world::{ClassCatalog, Pose, OCC_FREE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("class {0} is not an object class")]
    StructuralTarget(u8),
    #[error("strategy `{0}` does not score cells")]
    NotScoreBased(StrategyKind),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("no eligible goal cell")]
    NoEligibleCell,
    #[error("no frontier")]
    NoFrontier,
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Upper,
    Lower,
    Mixed,
    Mean,
    Fbe,
    Random,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Upper,
        StrategyKind::Lower,
        StrategyKind::Mixed,
        StrategyKind::Mean,
        StrategyKind::Fbe,
        StrategyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Upper => "upper",
            StrategyKind::Lower => "lower",
            StrategyKind::Mixed => "mixed",
            StrategyKind::Mean => "mean",
            StrategyKind::Fbe => "fbe",
            StrategyKind::Random => "random",
        }
    }

    pub fn is_score_based(self) -> bool {
        matches!(self, StrategyKind::Upper | StrategyKind::Lower | StrategyKind::Mixed | StrategyKind::Mean)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownStrategy(s.into()))
    }
}

/// Ties between equal scores always go to the lowest row-major index; the
/// rule is fixed and listed here so logs can name it.
pub const TIE_BREAK_RULE: &str = "lowest_row_major_index";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub alpha1: f64,
    /// Switching threshold of the mixed strategy.
    pub alpha2: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::Upper,
            alpha1: 0.1,
            alpha2: 0.75,
        }
    }
}

impl StrategyConfig {
    pub fn with_kind(kind: StrategyKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.alpha1 >= 0.0) || !self.alpha1.is_finite() {
            return Err(PolicyError::InvalidConfig("alpha1 must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha2) {
            return Err(PolicyError::InvalidConfig("alpha2 must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDistance {
    /// Geodesic on the believed occupancy.
    Believed,
    /// Geodesic on the true world.
    True,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub stop_probability: f64,
    /// Cells.
    pub stop_distance: u32,
    pub replan_interval: u32,
    pub max_steps: u32,
    /// Cells.
    pub success_radius: u32,
    pub stop_distance_mode: StopDistance,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            stop_probability: 0.75,
            stop_distance: 5,
            replan_interval: 20,
            max_steps: 500,
            success_radius: 10,
            stop_distance_mode: StopDistance::Believed,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(self.stop_probability > 0.0 && self.stop_probability < 1.0) {
            return Err(PolicyError::InvalidConfig("stop_probability must lie in (0, 1)"));
        }
        if self.replan_interval == 0 {
            return Err(PolicyError::InvalidConfig("replan_interval must be >= 1"));
        }
        Ok(())
    }
}

/// Per-cell score from mean `mu` and standard deviation `sigma`.
pub fn score_value(mu: f64, sigma: f64, cfg: &StrategyConfig) -> Result<f64, PolicyError> {
    let bound = cfg.alpha1 * sigma;
    Ok(match cfg.kind {
        StrategyKind::Upper => mu + bound,
        StrategyKind::Lower => mu - bound,
        StrategyKind::Mixed => {
            if cfg.alpha2 - mu >= 0.0 {
                mu + bound
            } else {
                mu - bound
            }
        }
        StrategyKind::Mean => mu,
        k => return Err(PolicyError::NotScoreBased(k)),
    })
}

fn check_target(map: &GlobalBeliefMap, target: u8) -> Result<(), PolicyError> {
    if (target as usize) < ClassCatalog::STRUCTURAL || target as usize >= map.semantic_classes() {
        return Err(PolicyError::StructuralTarget(target));
    }
    Ok(())
}

/// Score of every cell (row-major) for target class `target`.
pub fn score_cells(map: &GlobalBeliefMap, target: u8, cfg: &StrategyConfig) -> Result<Vec<f64>, PolicyError> {
    check_target(map, target)?;
    let c = target as usize;
    (0..map.cell_count())
        .map(|i| score_value(map.probability(i, c), math::sqrt(map.variance(i, c)), cfg))
        .collect()
}

/// A selected goal and the value that selected it (score, acquisition value
/// or frontier distance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub cell: Cell,
    pub score: f64,
}

/// Cells a goal may be placed on, as believed distances from the agent.
/// `None` marks an ineligible cell.
pub fn eligible_cells(map: &GlobalBeliefMap, pose: Pose, planner: &PlannerConfig, excluded: &[Cell]) -> Vec<Option<u32>> {
    let grid = TraversalGrid::from_belief(map, planner);
    let mut dist = grid.goal_distances(pose.cell);
    dist[map.index(pose.cell)] = None;
    for &c in excluded {
        if map.contains(c) {
            dist[map.index(c)] = None;
        }
    }
    dist
}

fn argmax_eligible(values: &[f64], eligible: &[Option<u32>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if eligible[i].is_some() && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Nearest frontier cell by believed geodesic. A frontier cell has been
/// sensed, is believed free and borders a never-sensed cell.
pub fn frontier_goal(map: &GlobalBeliefMap, eligible: &[Option<u32>]) -> Result<Goal, PolicyError> {
    let (h, w) = (map.height(), map.width());
    let mut best: Option<(u32, usize)> = None;
    for (i, d) in eligible.iter().enumerate() {
        let Some(d) = *d else { continue };
        if !map.is_sensed(i) || !believed_free(map, i) {
            continue;
        }
        let cell = map.cell_at(i);
        if !neighbors4(cell, h, w).any(|n| !map.is_sensed(map.index(n))) {
            continue;
        }
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(d, i)| Goal { cell: map.cell_at(i), score: d as f64 }).ok_or(PolicyError::NoFrontier)
}

fn believed_free(map: &GlobalBeliefMap, index: usize) -> bool {
    let b = map.occupancy_belief(index);
    b[OCC_FREE as usize] >= b[0] && b[OCC_FREE as usize] >= b[1]
}

/// Long-term goal for target class `target`. `excluded` lists cells that
/// must not be chosen (e.g. goals that proved unreachable).
pub fn select_goal<R: Rng + ?Sized>(
    map: &GlobalBeliefMap,
    target: u8,
    strategy: &StrategyConfig,
    pose: Pose,
    planner: &PlannerConfig,
    excluded: &[Cell],
    rng: &mut R,
) -> Result<Goal, PolicyError> {
    check_target(map, target)?;
    let eligible = eligible_cells(map, pose, planner, excluded);
    match strategy.kind {
        StrategyKind::Fbe => frontier_goal(map, &eligible),
        StrategyKind::Random => {
            let cells: Vec<usize> = (0..eligible.len()).filter(|&i| eligible[i].is_some()).collect();
            if cells.is_empty() {
                return Err(PolicyError::NoEligibleCell);
            }
            let i = cells[rng.gen_range(0..cells.len())];
            Ok(Goal { cell: map.cell_at(i), score: 0.0 })
        }
        _ => {
            let scores = score_cells(map, target, strategy)?;
            let i = argmax_eligible(&scores, &eligible).ok_or(PolicyError::NoEligibleCell)?;
            Ok(Goal { cell: map.cell_at(i), score: scores[i] })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveObjective {
    Variance,
    Entropy,
    Bald,
}

impl ActiveObjective {
    pub const ALL: [ActiveObjective; 3] = [ActiveObjective::Variance, ActiveObjective::Entropy, ActiveObjective::Bald];

    pub fn name(self) -> &'static str {
        match self {
            ActiveObjective::Variance => "variance",
            ActiveObjective::Entropy => "entropy",
            ActiveObjective::Bald => "bald",
        }
    }

    /// Registered acquisition value of one cell.
    pub fn value(self, map: &GlobalBeliefMap, index: usize) -> f64 {
        match self {
            ActiveObjective::Variance => map.mean_class_variance(index),
            ActiveObjective::Entropy => map.registered_entropy(index),
            ActiveObjective::Bald => map.registered_bald(index),
        }
    }
}

impl fmt::Display for ActiveObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActiveObjective {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActiveObjective::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownStrategy(s.into()))
    }
}

/// Active-training destination: the eligible cell maximising the chosen
/// acquisition field, or the nearest frontier when that field is zero on
/// every eligible cell.
pub fn select_active_target(
    map: &GlobalBeliefMap,
    objective: ActiveObjective,
    pose: Pose,
    planner: &PlannerConfig,
    excluded: &[Cell],
) -> Result<Goal, PolicyError> {
    let eligible = eligible_cells(map, pose, planner, excluded);
    let values: Vec<f64> = (0..map.cell_count()).map(|i| objective.value(map, i)).collect();
    match argmax_eligible(&values, &eligible) {
        Some(i) if values[i] > 0.0 => Ok(Goal { cell: map.cell_at(i), score: values[i] }),
        Some(_) => frontier_goal(map, &eligible),
        None => Err(PolicyError::NoEligibleCell),
    }
}

/// Stop iff a cell on `path` believes `target` above the stop probability
/// and lies closer than the stop distance. `distance` gives the geodesic
/// from the agent to a cell.
pub fn stop_check_with(
    map: &GlobalBeliefMap,
    target: u8,
    path: &[Cell],
    cfg: &NavConfig,
    distance: impl Fn(Cell) -> Option<u32>,
) -> bool {
    path.iter().any(|&c| {
        map.contains(c)
            && map.probability(map.index(c), target as usize) > cfg.stop_probability
            && distance(c).is_some_and(|d| d < cfg.stop_distance)
    })
}

/// [`stop_check_with`] using the believed geodesic.
pub fn stop_check(map: &GlobalBeliefMap, target: u8, pose: Pose, cfg: &NavConfig, planner: &PlannerConfig, path: &[Cell]) -> bool {
    let dist = TraversalGrid::from_belief(map, planner).goal_distances(pose.cell);
    stop_check_with(map, target, path, cfg, |c| dist[map.index(c)])
}
