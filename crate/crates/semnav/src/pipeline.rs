//! Pipeline stages. Each stage reads its inputs from the run directory and
//! writes its outputs there, so the stages can run as separate processes.
//!
//! Run directory layout:
//!
//! ```text
//! config.json                      copy of the run configuration
//! worlds/{train,eval}_<seed>.world generated worlds
//! episodes/{easy,hard}.json        evaluation episodes
//! data/offline.snds                offline dataset
//! data/active_<objective>.snds     actively collected datasets
//! models/offline.ckpt              offline ensemble
//! models/active_<objective>.ckpt   fine-tuned ensembles
//! logs/*.csv, logs/*.json          training losses, destinations, goals,
//!                                  trajectories, per-episode outcomes
//! results/*.csv                    result tables
//! renders/*.png                    world, belief and trajectory renders
//! ```

use std::path::{Path, PathBuf};

use semnav_core::harness::{
    self, collect_active, collect_offline, run_episode, Ablations, ActiveConfig, AgentKind, EpisodeOutcome, MapEvalReport,
    MethodMetrics, Perceiver,
};
use semnav_core::metrics::{summarize, Estimate, NavSummary};
use semnav_core::predictor::{train_member, Ensemble, LossRecord, TrainConfig, TrainingSample};
use semnav_core::world::{generate_world, sample_episodes, ClassCatalog, Difficulty, Episode, GridWorld};
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{self, fmt_f};
use crate::render;
use crate::{Error, Result};

/// Mixes two seeds into one (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(a << 6).wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rows of the map-prediction table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapRow {
    pub method: String,
    pub metrics: MethodMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEvalSummary {
    pub rows: Vec<MapRow>,
}

impl MapEvalSummary {
    pub fn row(&self, method: &str) -> Option<&MethodMetrics> {
        self.rows.iter().find(|r| r.method == method).map(|r| &r.metrics)
    }

    pub fn semantic_iou(&self, method: &str) -> Option<f64> {
        self.row(method).map(|m| m.semantic.mean_iou)
    }
}

/// One row of a navigation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavRow {
    pub method: String,
    pub summary: NavSummary,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NavTables {
    pub main: Vec<NavRow>,
    pub ablation: Vec<NavRow>,
}

impl NavTables {
    pub fn success(&self, method: &str) -> Option<f64> {
        self.main.iter().chain(&self.ablation).find(|r| r.method == method).map(|r| r.summary.success.mean)
    }
}

#[derive(Serialize)]
struct EpisodeLog<'a> {
    method: &'a str,
    episode: usize,
    world_seed: u64,
    target_class: u8,
    difficulty: Difficulty,
    result: &'a semnav_core::metrics::EpisodeResult,
    aborted: &'a Option<String>,
}

/// Ablation variants of the hard-episode table, in table order.
pub const ABLATIONS: [(&str, Ablations); 4] = [
    ("l2m", Ablations { oracle_stop: false, gt_path: false }),
    ("l2m_gtpath", Ablations { oracle_stop: false, gt_path: true }),
    ("l2m_oraclestop", Ablations { oracle_stop: true, gt_path: false }),
    ("l2m_gtpath_oraclestop", Ablations { oracle_stop: true, gt_path: true }),
];

/// A configured run bound to its output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub cfg: RunConfig,
    pub dir: PathBuf,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let catalog = ClassCatalog::default();
        if cfg.arch.semantic_classes != catalog.semantic_len() {
            return Err(Error::Config(format!(
                "arch.semantic_classes is {}, the class catalog has {}",
                cfg.arch.semantic_classes,
                catalog.semantic_len()
            )));
        }
        for rule in &cfg.world.prior_rules {
            for name in [&rule.object, &rule.anchor] {
                if catalog.index_of(name).is_none_or(|c| !catalog.is_object(c)) {
                    return Err(Error::Config(format!("prior rule names unknown object class `{name}`")));
                }
            }
        }
        Ok(Self {
            dir: cfg.output_dir.clone(),
            cfg,
        })
    }

    pub fn load(config: &Path) -> Result<Self> {
        Self::new(RunConfig::load(config)?)
    }

    fn path(&self, parts: &[&str]) -> PathBuf {
        let mut p = self.dir.clone();
        p.extend(parts);
        p
    }

    fn world_path(&self, split: &str, seed: u64) -> PathBuf {
        self.path(&["worlds", &format!("{split}_{seed}.world")])
    }

    fn model_path(&self, name: &str) -> PathBuf {
        self.path(&["models", &format!("{name}.ckpt")])
    }

    fn active_names(&self) -> Vec<String> {
        self.cfg.active.objectives.iter().map(|o| format!("active_{}", o.name())).collect()
    }

    fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(usize, &T) -> R + Sync + Send) -> Vec<R> {
        #[cfg(feature = "parallel")]
        if self.cfg.threads != 1 {
            use rayon::prelude::*;
            let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
            return match rayon::ThreadPoolBuilder::new().num_threads(self.cfg.threads).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            };
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    pub fn load_worlds(&self, split: &str) -> Result<Vec<GridWorld>> {
        let seeds = match split {
            "train" => &self.cfg.seeds.train,
            _ => &self.cfg.seeds.eval,
        };
        seeds.iter().map(|&s| io::read_world(&self.world_path(split, s))).collect()
    }

    pub fn load_model(&self, name: &str) -> Result<Ensemble> {
        let ens = io::read_checkpoint(&self.model_path(name))?;
        if ens.arch != self.cfg.arch {
            return Err(Error::Runtime(format!("model {name} was trained with a different architecture")));
        }
        Ok(ens)
    }

    /// Generates train and eval worlds and samples the evaluation episodes.
    pub fn gen_worlds(&self) -> Result<()> {
        io::write_json(&self.path(&["config.json"]), &self.cfg)?;
        let wc = self.cfg.world.to_config();
        for (split, seeds) in [("train", &self.cfg.seeds.train), ("eval", &self.cfg.seeds.eval)] {
            let worlds: Vec<Result<GridWorld>> = self.par_map(seeds, |_, &s| Ok(generate_world(s, &wc)?));
            for (w, &s) in worlds.into_iter().zip(seeds) {
                io::write_world(&self.world_path(split, s), &w?)?;
            }
        }
        let eval = self.load_worlds("eval")?;
        let ep = &self.cfg.episodes;
        let easy = self.sample_split(&eval, ep.count, Difficulty::Easy)?;
        let hard = self.sample_split(&eval, ep.hard_count, Difficulty::Hard)?;
        io::write_episodes(&self.path(&["episodes", "easy.json"]), &easy)?;
        io::write_episodes(&self.path(&["episodes", "hard.json"]), &hard)
    }

    /// Spreads `count` episodes over the worlds as evenly as possible.
    /// Worlds that cannot host the difficulty hand their share on.
    fn sample_split(&self, worlds: &[GridWorld], count: usize, difficulty: Difficulty) -> Result<Vec<Episode>> {
        let mut out = Vec::with_capacity(count);
        let mut last_err = None;
        for (i, w) in worlds.iter().enumerate() {
            let want = (count - out.len()).div_ceil(worlds.len() - i);
            if want == 0 {
                continue;
            }
            let seed = mix_seed(mix_seed(self.cfg.episodes.seed, w.seed), difficulty as u64);
            match sample_episodes(w, want, difficulty, &self.cfg.episodes.sampling, seed) {
                Ok(e) => out.extend(e),
                Err(e) => last_err = Some(e),
            }
        }
        if out.len() < count {
            return Err(match last_err {
                Some(e) => e.into(),
                None => Error::Runtime(format!("could not sample {count} {} episodes", difficulty.name())),
            });
        }
        Ok(out)
    }

    pub fn collect_offline(&self) -> Result<usize> {
        let worlds = self.load_worlds("train")?;
        let data = collect_offline(&worlds, self.cfg.budgets.offline, &self.cfg.observation, self.cfg.collection_seed)?;
        io::write_dataset(&self.path(&["data", "offline.snds"]), &data)?;
        Ok(data.len())
    }

    fn train_members(&self, ensemble: &mut Ensemble, data: &[TrainingSample], cfg: &TrainConfig) -> Result<Vec<LossRecord>> {
        let members = std::mem::take(&mut ensemble.members);
        let trained = self.par_map(&members, |i, m| {
            let mut m = m.clone();
            train_member(&mut m, i, data, cfg).map(|log| (m, log))
        });
        let mut log = Vec::new();
        for r in trained {
            let (m, l) = r?;
            ensemble.members.push(m);
            log.extend(l);
        }
        Ok(log)
    }

    fn write_loss_log(&self, name: &str, log: &[LossRecord]) -> Result<()> {
        let rows: Vec<Vec<String>> = log
            .iter()
            .map(|r| vec![r.member.to_string(), r.step.to_string(), fmt_f(r.l_occ), fmt_f(r.l_sem), fmt_f(r.l_total)])
            .collect();
        io::write_csv(&self.path(&["logs", &format!("train_{name}.csv")]), &["member", "step", "l_occ", "l_sem", "l_total"], &rows)
    }

    /// Trains the offline ensemble from scratch.
    pub fn train(&self) -> Result<()> {
        let data = io::read_dataset(&self.path(&["data", "offline.snds"]))?;
        let mut ens = Ensemble::new(self.cfg.arch, self.cfg.ensemble_size, self.cfg.ensemble_seed);
        let log = self.train_members(&mut ens, &data, &self.cfg.train)?;
        self.write_loss_log("offline", &log)?;
        io::write_checkpoint(&self.model_path("offline"), &ens)
    }

    /// Collects one active dataset per configured objective with the
    /// offline ensemble.
    pub fn collect_active(&self) -> Result<()> {
        let worlds = self.load_worlds("train")?;
        let ens = self.load_model("offline")?;
        let perceiver = Perceiver::new(&ens, self.cfg.prior_correction)?;
        let objectives = self.cfg.active.objectives.clone();
        let results = self.par_map(&objectives, |_, &objective| {
            let cfg = ActiveConfig {
                objective,
                replan_interval: self.cfg.active.replan_interval,
                planner: self.cfg.nav.planner,
            };
            collect_active(&worlds, &perceiver, self.cfg.budgets.active, &self.cfg.observation, &cfg, self.cfg.collection_seed)
        });
        for (objective, r) in objectives.iter().zip(results) {
            let (data, stats) = r?;
            let name = format!("active_{}", objective.name());
            io::write_dataset(&self.path(&["data", &format!("{name}.snds")]), &data)?;
            let rows: Vec<Vec<String>> = stats
                .destinations
                .iter()
                .map(|(w, step, c, v)| {
                    vec![self.cfg.seeds.train[*w].to_string(), step.to_string(), c.row.to_string(), c.col.to_string(), fmt_f(*v)]
                })
                .collect();
            io::write_csv(&self.path(&["logs", &format!("{name}_destinations.csv")]), &["world_seed", "step", "row", "col", "value"], &rows)?;
        }
        Ok(())
    }

    /// Fine-tunes a copy of the offline ensemble on each active dataset.
    pub fn finetune(&self) -> Result<()> {
        let base = self.load_model("offline")?;
        for name in self.active_names() {
            let data = io::read_dataset(&self.path(&["data", &format!("{name}.snds")]))?;
            let mut ens = base.clone();
            let log = self.train_members(&mut ens, &data, &self.cfg.finetune)?;
            self.write_loss_log(&name, &log)?;
            io::write_checkpoint(&self.model_path(&name), &ens)?;
        }
        Ok(())
    }

    /// Models present in the run directory, offline first.
    fn available_models(&self) -> Vec<String> {
        std::iter::once("offline".to_string())
            .chain(self.active_names())
            .filter(|n| self.model_path(n).exists())
            .collect()
    }

    /// Compares projection baselines with every available model on the eval
    /// worlds and writes the map tables.
    pub fn eval_map(&self) -> Result<MapEvalSummary> {
        let worlds = self.load_worlds("eval")?;
        let names = self.available_models();
        if names.is_empty() {
            return Err(Error::MissingInput(self.model_path("offline")));
        }
        let models: Vec<Ensemble> = names.iter().map(|n| self.load_model(n)).collect::<Result<_>>()?;
        let perceivers: Vec<Perceiver> =
            models.iter().map(|m| Perceiver::new(m, self.cfg.prior_correction)).collect::<Result<_, _>>()?;
        let refs: Vec<&Perceiver> = perceivers.iter().collect();
        let MapEvalReport {
            single_view,
            multi_view,
            ensembles,
            ..
        } = harness::eval_map(&refs, &worlds, &self.cfg.observation, &self.cfg.map_eval)?;
        let mut rows = vec![
            MapRow { method: "single_view".into(), metrics: single_view },
            MapRow { method: "multi_view".into(), metrics: multi_view },
        ];
        rows.extend(names.iter().zip(ensembles).map(|(n, m)| MapRow { method: n.clone(), metrics: m }));
        let summary = MapEvalSummary { rows };
        self.write_map_tables(&summary)?;
        Ok(summary)
    }

    fn write_map_tables(&self, s: &MapEvalSummary) -> Result<()> {
        let header = ["method", "sem_acc", "sem_iou", "sem_f1", "occ_acc", "occ_iou", "occ_f1"];
        let rows: Vec<Vec<String>> = s
            .rows
            .iter()
            .map(|r| {
                let (a, b) = (&r.metrics.semantic, &r.metrics.occupancy);
                vec![
                    r.method.clone(),
                    fmt_f(a.mean_accuracy),
                    fmt_f(a.mean_iou),
                    fmt_f(a.mean_f1),
                    fmt_f(b.mean_accuracy),
                    fmt_f(b.mean_iou),
                    fmt_f(b.mean_f1),
                ]
            })
            .collect();
        io::write_csv(&self.path(&["results", "map_prediction.csv"]), &header, &rows)?;

        let catalog = ClassCatalog::default();
        let mut per_class = Vec::new();
        for r in &s.rows {
            for c in &r.metrics.semantic.per_class {
                per_class.push(vec![
                    r.method.clone(),
                    catalog.semantic_classes[c.class as usize].clone(),
                    c.present.to_string(),
                    fmt_f(c.accuracy),
                    fmt_f(c.iou),
                    fmt_f(c.f1),
                ]);
            }
        }
        io::write_csv(&self.path(&["results", "map_per_class.csv"]), &["method", "class", "present", "acc", "iou", "f1"], &per_class)?;

        if let Some(base) = s.semantic_iou("offline") {
            let rows: Vec<Vec<String>> = s
                .rows
                .iter()
                .filter(|r| r.method.starts_with("active_"))
                .map(|r| {
                    let iou = r.metrics.semantic.mean_iou;
                    vec![r.method.trim_start_matches("active_").to_string(), fmt_f(base), fmt_f(iou), fmt_f(iou - base)]
                })
                .collect();
            io::write_csv(&self.path(&["results", "active_training.csv"]), &["objective", "offline_iou", "finetuned_iou", "gain"], &rows)?;
        }
        Ok(())
    }

    fn episodes(&self, name: &str) -> Result<Vec<Episode>> {
        let eps = io::read_episodes(&self.path(&["episodes", &format!("{name}.json")]))?;
        if let Some(e) = eps.iter().find(|e| self.cfg.seeds.train.contains(&e.world_seed)) {
            return Err(Error::Config(format!("episode world seed {} is a training seed", e.world_seed)));
        }
        Ok(eps)
    }

    fn run_method(
        &self,
        worlds: &[GridWorld],
        episodes: &[Episode],
        perceiver: &Perceiver,
        agent: &AgentKind,
        ablations: Ablations,
    ) -> Result<Vec<EpisodeOutcome>> {
        let outcomes = self.par_map(episodes, |i, e| -> Result<EpisodeOutcome> {
            let world = worlds
                .iter()
                .find(|w| w.seed == e.world_seed)
                .ok_or_else(|| Error::Runtime(format!("episode {i} refers to unknown world {}", e.world_seed)))?;
            let seed = mix_seed(self.cfg.episodes.seed, i as u64);
            let mut o = run_episode(world, e, perceiver, agent, &self.cfg.nav.config, &self.cfg.nav.planner, &self.cfg.observation, ablations, seed)?;
            o.final_map = None;
            Ok(o)
        });
        outcomes.into_iter().collect()
    }

    fn write_nav_logs(&self, table: &str, runs: &[(String, Vec<EpisodeOutcome>)], episodes: &[Episode]) -> Result<()> {
        let mut traj = Vec::new();
        let mut goals = Vec::new();
        let mut logs = Vec::new();
        for (method, outcomes) in runs {
            for (i, (o, e)) in outcomes.iter().zip(episodes).enumerate() {
                for t in &o.trajectory {
                    let (gr, gc) = t.goal.map_or((String::new(), String::new()), |g| (g.row.to_string(), g.col.to_string()));
                    traj.push(vec![
                        method.clone(),
                        i.to_string(),
                        t.step.to_string(),
                        t.row.to_string(),
                        t.col.to_string(),
                        format!("{:?}", t.heading),
                        t.action.name().to_string(),
                        gr,
                        gc,
                    ]);
                }
                for g in &o.goals {
                    goals.push(vec![
                        method.clone(),
                        i.to_string(),
                        g.step.to_string(),
                        g.goal.row.to_string(),
                        g.goal.col.to_string(),
                        fmt_f(g.score),
                        g.reason.name().to_string(),
                    ]);
                }
                logs.push(EpisodeLog {
                    method,
                    episode: i,
                    world_seed: e.world_seed,
                    target_class: e.target_class,
                    difficulty: e.difficulty,
                    result: &o.result,
                    aborted: &o.aborted,
                });
            }
        }
        io::write_csv(
            &self.path(&["logs", &format!("{table}_trajectories.csv")]),
            &["method", "episode", "step", "row", "col", "heading", "action", "goal_row", "goal_col"],
            &traj,
        )?;
        io::write_csv(
            &self.path(&["logs", &format!("{table}_goals.csv")]),
            &["method", "episode", "step", "goal_row", "goal_col", "score", "reason"],
            &goals,
        )?;
        io::write_json(&self.path(&["logs", &format!("{table}_episodes.json")]), &logs)
    }

    fn write_nav_table(&self, table: &str, rows: &[NavRow]) -> Result<()> {
        let est = |e: &Estimate| [fmt_f(e.mean), fmt_f(e.half_width)];
        let cell = self.cfg.world.cell_size;
        let out: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let s = &r.summary;
                let mut row = vec![r.method.clone(), s.episodes.to_string()];
                row.extend(est(&s.success));
                row.extend(est(&s.spl));
                row.extend(est(&s.soft_spl));
                row.extend(est(&s.dts));
                row.push(fmt_f(s.dts.mean * cell));
                row.push(r.aborted.to_string());
                row
            })
            .collect();
        io::write_csv(
            &self.path(&["results", &format!("{table}.csv")]),
            &[
                "method", "episodes", "success", "success_ci95", "spl", "spl_ci95", "soft_spl", "soft_spl_ci95", "dts_cells",
                "dts_ci95", "dts_m", "aborted",
            ],
            &out,
        )
    }

    fn nav_table(
        &self,
        table: &str,
        worlds: &[GridWorld],
        episodes: &[Episode],
        perceiver: &Perceiver,
        methods: &[(String, AgentKind, Ablations)],
    ) -> Result<Vec<NavRow>> {
        let mut runs = Vec::new();
        let mut rows = Vec::new();
        for (name, agent, ablations) in methods {
            let outcomes = self.run_method(worlds, episodes, perceiver, agent, *ablations)?;
            let results: Vec<_> = outcomes.iter().map(|o| o.result).collect();
            rows.push(NavRow {
                method: name.clone(),
                summary: summarize(&results),
                aborted: outcomes.iter().filter(|o| o.aborted.is_some()).count(),
            });
            runs.push((name.clone(), outcomes));
        }
        self.write_nav_table(table, &rows)?;
        self.write_nav_logs(table, &runs, episodes)?;
        Ok(rows)
    }

    /// Runs every configured method on the easy episodes and the ablation
    /// variants on the hard episodes.
    pub fn eval_nav(&self) -> Result<NavTables> {
        let worlds = self.load_worlds("eval")?;
        let ens = self.load_model(&self.cfg.nav.model)?;
        let perceiver = Perceiver::new(&ens, self.cfg.prior_correction)?;
        let methods: Vec<_> = self
            .cfg
            .nav
            .methods
            .iter()
            .map(|m| {
                let agent = match m.strategy {
                    Some(strategy) => AgentKind::Mapping { strategy },
                    None => AgentKind::RandomWalk,
                };
                (m.name.clone(), agent, Ablations::default())
            })
            .collect();
        let main = self.nav_table("navigation", &worlds, &self.episodes("easy")?, &perceiver, &methods)?;
        let hard = self.episodes("hard")?;
        let ablation = if hard.is_empty() {
            Vec::new()
        } else {
            let agent = AgentKind::Mapping {
                strategy: self.cfg.nav.ablation_strategy,
            };
            let variants: Vec<_> = ABLATIONS.iter().map(|(n, a)| (n.to_string(), agent, *a)).collect();
            self.nav_table("ablation", &worlds, &hard, &perceiver, &variants)?
        };
        Ok(NavTables { main, ablation })
    }

    /// Renders eval worlds, plus belief, uncertainty and trajectory images
    /// for the first `episodes` easy episodes of every mapping method.
    pub fn render(&self, episodes: usize) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let worlds = self.load_worlds("eval")?;
        for w in &worlds {
            let p = self.path(&["renders", &format!("world_{}.png", w.seed)]);
            render::save_png(&p, &render::render_world(w))?;
            written.push(p);
        }
        if episodes == 0 {
            return Ok(written);
        }
        let ens = self.load_model(&self.cfg.nav.model)?;
        let perceiver = Perceiver::new(&ens, self.cfg.prior_correction)?;
        let eps = self.episodes("easy")?;
        for m in &self.cfg.nav.methods {
            let Some(strategy) = m.strategy else { continue };
            let agent = AgentKind::Mapping { strategy };
            for (i, e) in eps.iter().enumerate().take(episodes) {
                let world = worlds.iter().find(|w| w.seed == e.world_seed).ok_or_else(|| Error::Runtime("unknown world".into()))?;
                let seed = mix_seed(self.cfg.episodes.seed, i as u64);
                let o = run_episode(world, e, &perceiver, &agent, &self.cfg.nav.config, &self.cfg.nav.planner, &self.cfg.observation, Ablations::default(), seed)?;
                let mut traj = render::render_world(world);
                render::overlay_trajectory(&mut traj, &o);
                let mut images = vec![("trajectory", traj)];
                if let Some(map) = &o.final_map {
                    let mut belief = render::render_belief(map);
                    render::overlay_trajectory(&mut belief, &o);
                    images.push(("belief", belief));
                    images.push(("uncertainty", render::render_uncertainty(map)));
                }
                for (kind, img) in images {
                    let p = self.path(&["renders", &format!("{}_ep{i}_{kind}.png", m.name)]);
                    render::save_png(&p, &img)?;
                    written.push(p);
                }
            }
        }
        Ok(written)
    }

    /// Result tables present in the run directory, as aligned text.
    pub fn report(&self) -> Result<String> {
        let mut out = String::new();
        for (title, file) in [
            ("Map prediction", "map_prediction.csv"),
            ("Active training", "active_training.csv"),
            ("Navigation", "navigation.csv"),
            ("Ablations (hard episodes)", "ablation.csv"),
        ] {
            let path = self.path(&["results", file]);
            if !path.exists() {
                continue;
            }
            let (header, rows) = io::read_csv(&path)?;
            out.push_str(&format!("== {title} ==\n"));
            out.push_str(&align(&header, &rows));
            out.push('\n');
        }
        if out.is_empty() {
            return Err(Error::MissingInput(self.path(&["results"])));
        }
        Ok(out)
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<()> {
        self.gen_worlds()?;
        self.collect_offline()?;
        self.train()?;
        if !self.cfg.active.objectives.is_empty() {
            self.collect_active()?;
            self.finetune()?;
        }
        self.eval_map()?;
        self.eval_nav()?;
        Ok(())
    }
}

fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(String::len).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    for r in rows {
        s.push_str(&line(r));
    }
    s
}
