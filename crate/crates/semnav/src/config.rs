//! Run configuration: one JSON file per run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use semnav_core::harness::MapEvalConfig;
use semnav_core::nav::PlannerConfig;
use semnav_core::policy::{ActiveObjective, NavConfig, StrategyConfig, StrategyKind};
use semnav_core::predictor::{ArchConfig, TrainConfig};
use semnav_core::world::{EpisodeConfig, ObsConfig, PriorRule, WorldConfig};
use serde::{Deserialize, Serialize};

use crate::Error;

/// World generation settings. Leaving `room_count_range` out scales the
/// room count with the world area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSpec {
    pub width: usize,
    pub height: usize,
    pub room_count_range: Option<(usize, usize)>,
    pub min_room_size: usize,
    pub prior_rules: Vec<PriorRule>,
    pub cell_size: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        let w = WorldConfig::default();
        Self {
            width: w.width,
            height: w.height,
            room_count_range: None,
            min_room_size: w.min_room_size,
            prior_rules: w.prior_rules,
            cell_size: w.cell_size,
        }
    }
}

impl WorldSpec {
    pub fn to_config(&self) -> WorldConfig {
        let sized = WorldConfig::sized(self.width, self.height);
        WorldConfig {
            room_count_range: self.room_count_range.unwrap_or(sized.room_count_range),
            min_room_size: self.min_room_size,
            prior_rules: self.prior_rules.clone(),
            cell_size: self.cell_size,
            ..sized
        }
    }
}

/// Scene split by world seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSplit {
    pub train: Vec<u64>,
    pub eval: Vec<u64>,
}

impl Default for SeedSplit {
    fn default() -> Self {
        Self {
            train: (0..20).collect(),
            eval: (1000..1005).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub offline: usize,
    pub active: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            offline: 18_000,
            active: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActiveSpec {
    pub objectives: Vec<ActiveObjective>,
    /// Destination reselection interval during collection.
    pub replan_interval: u32,
}

impl Default for ActiveSpec {
    fn default() -> Self {
        Self {
            objectives: ActiveObjective::ALL.to_vec(),
            replan_interval: NavConfig::default().replan_interval,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSpec {
    /// Episodes per evaluation table, spread over the eval worlds.
    pub count: usize,
    /// Hard episodes for the ablation table.
    pub hard_count: usize,
    pub sampling: EpisodeConfig,
    pub seed: u64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            count: 200,
            hard_count: 100,
            sampling: EpisodeConfig::default(),
            seed: 0,
        }
    }
}

/// One navigation method of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    /// Goal-selection strategy; absent means a random walk.
    pub strategy: Option<StrategyConfig>,
}

impl MethodSpec {
    pub fn strategy(name: &str, kind: StrategyKind) -> Self {
        Self {
            name: name.into(),
            strategy: Some(StrategyConfig::with_kind(kind)),
        }
    }
}

fn default_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec {
            name: "random_walk".into(),
            strategy: None,
        },
        MethodSpec::strategy("fbe", StrategyKind::Fbe),
        MethodSpec::strategy("upper", StrategyKind::Upper),
        MethodSpec::strategy("lower", StrategyKind::Lower),
        MethodSpec::strategy("mixed", StrategyKind::Mixed),
        MethodSpec::strategy("mean", StrategyKind::Mean),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavSpec {
    pub methods: Vec<MethodSpec>,
    /// Strategy used for the ablation table on hard episodes.
    pub ablation_strategy: StrategyConfig,
    /// Checkpoint used for navigation: `offline` or `active_<objective>`.
    pub model: String,
    pub config: NavConfig,
    pub planner: PlannerConfig,
}

impl Default for NavSpec {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            ablation_strategy: StrategyConfig::default(),
            model: "active_variance".into(),
            config: NavConfig::default(),
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub world: WorldSpec,
    pub observation: ObsConfig,
    pub arch: ArchConfig,
    pub ensemble_size: usize,
    pub ensemble_seed: u64,
    pub train: TrainConfig,
    pub finetune: TrainConfig,
    pub seeds: SeedSplit,
    pub budgets: Budgets,
    pub collection_seed: u64,
    pub active: ActiveSpec,
    pub map_eval: MapEvalConfig,
    pub episodes: EpisodeSpec,
    pub nav: NavSpec,
    /// Divide repeated views of a cell by the model's blind prediction
    /// before fusing.
    pub prior_correction: bool,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs/default"),
            world: WorldSpec::default(),
            observation: ObsConfig::default(),
            arch: ArchConfig::default(),
            ensemble_size: 4,
            ensemble_seed: 1,
            train: TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            finetune: TrainConfig {
                epochs: 2,
                shuffle_seed: 1,
                ..TrainConfig::default()
            },
            seeds: SeedSplit::default(),
            budgets: Budgets::default(),
            collection_seed: 0,
            active: ActiveSpec::default(),
            map_eval: MapEvalConfig::default(),
            episodes: EpisodeSpec::default(),
            nav: NavSpec::default(),
            prior_correction: true,
            threads: 0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_train(name: &str, t: &TrainConfig) -> Result<(), Error> {
    if !(t.learning_rate >= 0.0 && t.learning_rate.is_finite()) {
        return Err(invalid(format!("{name}.learning_rate must be finite and >= 0")));
    }
    if t.batch_size == 0 {
        return Err(invalid(format!("{name}.batch_size must be >= 1")));
    }
    if !(0.0..1.0).contains(&t.beta1) || !(0.0..1.0).contains(&t.beta2) {
        return Err(invalid(format!("{name}.beta1 and beta2 must lie in [0, 1)")));
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let train: BTreeSet<u64> = self.seeds.train.iter().copied().collect();
        if let Some(s) = self.seeds.eval.iter().find(|s| train.contains(s)) {
            return Err(invalid(format!("eval seed {s} is also a train seed")));
        }
        if self.seeds.train.is_empty() || self.seeds.eval.is_empty() {
            return Err(invalid("train and eval seed lists must be non-empty"));
        }
        if train.len() != self.seeds.train.len() || self.seeds.eval.iter().collect::<BTreeSet<_>>().len() != self.seeds.eval.len() {
            return Err(invalid("seed lists contain duplicates"));
        }
        self.observation.validate().map_err(invalid)?;
        if self.arch.crop_size != self.observation.crop_size {
            return Err(invalid("arch.crop_size must equal observation.crop_size"));
        }
        if self.arch.occupancy_classes != 3 {
            return Err(invalid("arch.occupancy_classes must be 3"));
        }
        if self.arch.base_channels == 0 {
            return Err(invalid("arch.base_channels must be >= 1"));
        }
        if self.ensemble_size == 0 {
            return Err(invalid("ensemble_size must be >= 1"));
        }
        check_train("train", &self.train)?;
        check_train("finetune", &self.finetune)?;
        self.nav.config.validate().map_err(|e| invalid(e.to_string()))?;
        self.nav.ablation_strategy.validate().map_err(|e| invalid(e.to_string()))?;
        for m in &self.nav.methods {
            if let Some(s) = &m.strategy {
                s.validate().map_err(|e| invalid(format!("method {}: {e}", m.name)))?;
            }
        }
        let names: BTreeSet<&str> = self.nav.methods.iter().map(|m| m.name.as_str()).collect();
        if names.len() != self.nav.methods.len() {
            return Err(invalid("navigation method names must be unique"));
        }
        let p = &self.nav.planner;
        if !(p.obstacle_threshold > 0.0 && p.obstacle_threshold < 1.0) {
            return Err(invalid("planner.obstacle_threshold must lie in (0, 1)"));
        }
        if !(p.unknown_cost >= 1.0) {
            return Err(invalid("planner.unknown_cost must be >= 1"));
        }
        if self.active.replan_interval == 0 {
            return Err(invalid("active.replan_interval must be >= 1"));
        }
        if self.map_eval.sequence_length == 0 {
            return Err(invalid("map_eval.sequence_length must be >= 1"));
        }
        if self.nav.model != "offline" && !self.nav.model.starts_with("active_") {
            return Err(invalid("nav.model must be `offline` or `active_<objective>`"));
        }
        if !(self.world.cell_size > 0.0) {
            return Err(invalid("world.cell_size must be > 0"));
        }
        Ok(())
    }
}
