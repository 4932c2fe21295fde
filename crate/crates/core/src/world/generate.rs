//! Binary-space-partition floorplans with furniture placed by co-occurrence
//! rules.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassCatalog, GridWorld, WorldError, SEM_FLOOR, SEM_WALL};
use crate::grid::{neighbors4, Cell, Grid};

/// "Place `object` next to an `anchor` instance with probability `probability`",
/// spawning `per_anchor` objects for each anchor in a room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorRule {
    pub object: String,
    pub anchor: String,
    pub probability: f64,
    pub per_anchor: (usize, usize),
}

impl PriorRule {
    pub fn new(object: &str, anchor: &str, probability: f64, per_anchor: (usize, usize)) -> Self {
        Self {
            object: object.to_string(),
            anchor: anchor.to_string(),
            probability,
            per_anchor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub width: usize,
    pub height: usize,
    pub room_count_range: (usize, usize),
    /// Smallest interior side length of a room, in cells.
    pub min_room_size: usize,
    pub prior_rules: Vec<PriorRule>,
    pub cell_size: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            room_count_range: (30, 36),
            min_room_size: 8,
            prior_rules: vec![
                PriorRule::new("chair", "table", 0.9, (2, 4)),
                PriorRule::new("cushion", "sofa", 0.85, (1, 2)),
                PriorRule::new("cushion", "bed", 0.7, (1, 2)),
            ],
            cell_size: 0.1,
        }
    }
}

impl WorldConfig {
    pub fn sized(width: usize, height: usize) -> Self {
        let area = (width * height) as f64;
        // about one room per 260 cells
        let rooms = ((area / 260.0) as usize).max(2);
        Self {
            width,
            height,
            room_count_range: (rooms.saturating_sub(1).max(2), rooms + 1),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize, // exclusive
    c1: usize, // exclusive
}

impl Rect {
    fn rows(&self) -> usize {
        self.r1 - self.r0
    }
    fn cols(&self) -> usize {
        self.c1 - self.c0
    }
    fn area(&self) -> usize {
        self.rows() * self.cols()
    }
    fn contains(&self, c: Cell) -> bool {
        c.row >= self.r0 && c.row < self.r1 && c.col >= self.c0 && c.col < self.c1
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    /// Wall runs along a row (horizontal) when true.
    horizontal: bool,
    at: usize,
    from: usize,
    to: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RoomKind {
    Bedroom,
    Living,
    Kitchen,
    Dining,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Placement {
    AgainstWall,
    Central,
}

struct Builder<'a> {
    labels: Grid<u8>,
    reserved: Grid<bool>,
    free_count: usize,
    catalog: &'a ClassCatalog,
    rng: ChaCha8Rng,
}

/// Generates a fully labelled world. Identical `seed` and `config` give an
/// identical world.
pub fn generate_world(seed: u64, config: &WorldConfig) -> Result<GridWorld, WorldError> {
    generate_with_catalog(seed, config, ClassCatalog::default())
}

pub(crate) fn generate_with_catalog(
    seed: u64,
    config: &WorldConfig,
    catalog: ClassCatalog,
) -> Result<GridWorld, WorldError> {
    if config.width < 24 || config.height < 24 {
        return Err(WorldError::Infeasible(format!(
            "world must be at least 24x24 cells, got {}x{}",
            config.width, config.height
        )));
    }
    let (min_rooms, max_rooms) = config.room_count_range;
    if min_rooms == 0 || min_rooms > max_rooms {
        return Err(WorldError::Infeasible(format!(
            "invalid room_count_range ({min_rooms}, {max_rooms})"
        )));
    }
    let rules = resolve_rules(&config.prior_rules, &catalog)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_side = config.min_room_size.max(4);

    let root = Rect {
        r0: 1,
        c0: 1,
        r1: config.height - 1,
        c1: config.width - 1,
    };
    if root.rows() < min_side || root.cols() < min_side {
        return Err(WorldError::Infeasible(format!(
            "min_room_size {min_side} exceeds the interior"
        )));
    }
    let target_rooms = rng.gen_range(min_rooms..=max_rooms);
    let (leaves, splits) = partition(root, target_rooms, min_side, &mut rng);
    if leaves.len() < min_rooms {
        return Err(WorldError::Infeasible(format!(
            "only {} rooms of side >= {min_side} fit in {}x{}, need {min_rooms}",
            leaves.len(),
            config.width,
            config.height
        )));
    }

    let mut labels = Grid::filled(config.height, config.width, SEM_WALL);
    for room in &leaves {
        for r in room.r0..room.r1 {
            for c in room.c0..room.c1 {
                labels.set(Cell::new(r, c), SEM_FLOOR);
            }
        }
    }
    let mut reserved = Grid::filled(config.height, config.width, false);
    for split in &splits {
        carve_door(&mut labels, &mut reserved, split, &mut rng);
    }
    let free_count = labels
        .as_slice()
        .iter()
        .filter(|&&l| l == SEM_FLOOR)
        .count();
    let mut builder = Builder {
        labels,
        reserved,
        free_count,
        catalog: &catalog,
        rng,
    };
    for room in &leaves {
        builder.furnish(room, &rules);
    }
    let mut labels = builder.labels;
    keep_largest_free_component(&mut labels);

    let mut world = GridWorld::from_labels(seed, catalog, labels);
    world.cell_size = config.cell_size;
    Ok(world)
}

struct ResolvedRule {
    object: u8,
    anchor: u8,
    probability: f64,
    per_anchor: (usize, usize),
}

fn resolve_rules(
    rules: &[PriorRule],
    catalog: &ClassCatalog,
) -> Result<Vec<ResolvedRule>, WorldError> {
    rules
        .iter()
        .map(|r| {
            let lookup = |name: &str| {
                catalog
                    .index_of(name)
                    .filter(|&i| catalog.is_object(i))
                    .ok_or_else(|| {
                        WorldError::Infeasible(format!(
                            "prior rule names unknown object class '{name}'"
                        ))
                    })
            };
            if !(0.0..=1.0).contains(&r.probability) || r.per_anchor.0 > r.per_anchor.1 {
                return Err(WorldError::Infeasible(format!(
                    "prior rule {} -> {} has invalid probability or count",
                    r.object, r.anchor
                )));
            }
            Ok(ResolvedRule {
                object: lookup(&r.object)?,
                anchor: lookup(&r.anchor)?,
                probability: r.probability,
                per_anchor: r.per_anchor,
            })
        })
        .collect()
}

fn partition(
    root: Rect,
    target: usize,
    min_side: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Rect>, Vec<Split>) {
    let mut leaves = vec![root];
    let mut splits = Vec::new();
    while leaves.len() < target {
        // split the largest splittable leaf
        let candidate = leaves
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rows() > 2 * min_side || r.cols() > 2 * min_side)
            .max_by_key(|(i, r)| (r.area(), usize::MAX - i))
            .map(|(i, _)| i);
        let Some(i) = candidate else { break };
        let rect = leaves.swap_remove(i);
        let can_h = rect.rows() > 2 * min_side;
        let can_v = rect.cols() > 2 * min_side;
        let horizontal = match (can_h, can_v) {
            (true, true) => {
                if rect.rows() == rect.cols() {
                    rng.gen_bool(0.5)
                } else {
                    rect.rows() > rect.cols()
                }
            }
            (h, _) => h,
        };
        if horizontal {
            let at = rng.gen_range(rect.r0 + min_side..=rect.r1 - min_side - 1);
            leaves.push(Rect { r1: at, ..rect });
            leaves.push(Rect { r0: at + 1, ..rect });
            splits.push(Split {
                horizontal,
                at,
                from: rect.c0,
                to: rect.c1,
            });
        } else {
            let at = rng.gen_range(rect.c0 + min_side..=rect.c1 - min_side - 1);
            leaves.push(Rect { c1: at, ..rect });
            leaves.push(Rect { c0: at + 1, ..rect });
            splits.push(Split {
                horizontal,
                at,
                from: rect.r0,
                to: rect.r1,
            });
        }
    }
    leaves.sort_by_key(|r| (r.r0, r.c0));
    (leaves, splits)
}

fn carve_door(
    labels: &mut Grid<u8>,
    reserved: &mut Grid<bool>,
    split: &Split,
    rng: &mut ChaCha8Rng,
) {
    let wall_cell = |p: usize| {
        if split.horizontal {
            Cell::new(split.at, p)
        } else {
            Cell::new(p, split.at)
        }
    };
    let sides = |p: usize| {
        if split.horizontal {
            [Cell::new(split.at - 1, p), Cell::new(split.at + 1, p)]
        } else {
            [Cell::new(p, split.at - 1), Cell::new(p, split.at + 1)]
        }
    };
    let passable =
        |labels: &Grid<u8>, p: usize| sides(p).iter().all(|&c| *labels.get(c) == SEM_FLOOR);
    let wide: Vec<usize> = (split.from..split.to.saturating_sub(1))
        .filter(|&p| passable(labels, p) && passable(labels, p + 1))
        .collect();
    let door: Vec<usize> = if let Some(&p) = wide.choose(rng) {
        vec![p, p + 1]
    } else {
        let narrow: Vec<usize> = (split.from..split.to)
            .filter(|&p| passable(labels, p))
            .collect();
        match narrow.choose(rng) {
            Some(&p) => vec![p],
            None => return,
        }
    };
    for p in door {
        let w = wall_cell(p);
        labels.set(w, SEM_FLOOR);
        reserved.set(w, true);
        for s in sides(p) {
            reserved.set(s, true);
            for n in neighbors4(s, labels.height(), labels.width()) {
                reserved.set(n, true);
            }
        }
    }
}

impl Builder<'_> {
    fn class(&self, name: &str) -> Option<u8> {
        self.catalog
            .index_of(name)
            .filter(|&c| self.catalog.is_object(c))
    }

    fn furnish(&mut self, room: &Rect, rules: &[ResolvedRule]) {
        let kind = match self.rng.gen_range(0..4) {
            0 => RoomKind::Bedroom,
            1 => RoomKind::Living,
            2 => RoomKind::Kitchen,
            _ => RoomKind::Dining,
        };
        let mut anchors: Vec<(u8, Vec<Cell>)> = Vec::new();
        let groups = 1 + room.area() / 110;
        let mut place = |b: &mut Self, name: &str, long: usize, short: usize, how: Placement| {
            if let Some(class) = b.class(name) {
                if let Some(cells) = b.place_block(room, class, long, short, how) {
                    anchors.push((class, cells));
                }
            }
        };
        for _ in 0..groups {
            match kind {
                RoomKind::Bedroom => {
                    place(self, "bed", 3, 2, Placement::AgainstWall);
                }
                RoomKind::Living => {
                    place(self, "sofa", 3, 1, Placement::AgainstWall);
                    if self.rng.gen_bool(0.5) {
                        place(self, "table", 2, 1, Placement::Central);
                    }
                }
                RoomKind::Kitchen => {
                    let len = self.rng.gen_range(3..=5);
                    place(self, "counter", len, 1, Placement::AgainstWall);
                    place(self, "table", 2, 2, Placement::Central);
                }
                RoomKind::Dining => {
                    place(self, "table", 3, 2, Placement::Central);
                }
            }
        }
        for rule in rules {
            for (class, cells) in anchors.clone() {
                if class != rule.anchor {
                    continue;
                }
                let n = self.rng.gen_range(rule.per_anchor.0..=rule.per_anchor.1);
                for _ in 0..n {
                    let near = self.rng.gen_bool(rule.probability);
                    let placed = near && self.place_near(room, rule.object, &cells);
                    if !placed {
                        self.place_block(room, rule.object, 1, 1, Placement::Central);
                    }
                }
            }
        }
    }

    fn placeable(&self, cell: Cell) -> bool {
        *self.labels.get(cell) == SEM_FLOOR && !*self.reserved.get(cell)
    }

    /// Commits `cells` as `class` if free space stays connected.
    fn try_commit(&mut self, cells: &[Cell], class: u8) -> bool {
        if !cells.iter().all(|&c| self.placeable(c)) {
            return false;
        }
        for &c in cells {
            self.labels.set(c, class);
        }
        if self.free_connected(self.free_count - cells.len()) {
            self.free_count -= cells.len();
            true
        } else {
            for &c in cells {
                self.labels.set(c, SEM_FLOOR);
            }
            false
        }
    }

    fn free_connected(&self, expected: usize) -> bool {
        let Some(start) = self
            .labels
            .cells()
            .find(|&c| *self.labels.get(c) == SEM_FLOOR)
        else {
            return expected == 0;
        };
        let mut seen = Grid::filled(self.labels.height(), self.labels.width(), false);
        let mut stack = vec![start];
        seen.set(start, true);
        let mut count = 0;
        while let Some(c) = stack.pop() {
            count += 1;
            for n in neighbors4(c, self.labels.height(), self.labels.width()) {
                if *self.labels.get(n) == SEM_FLOOR && !*seen.get(n) {
                    seen.set(n, true);
                    stack.push(n);
                }
            }
        }
        count == expected
    }

    fn place_block(
        &mut self,
        room: &Rect,
        class: u8,
        long: usize,
        short: usize,
        how: Placement,
    ) -> Option<Vec<Cell>> {
        let mut candidates = Vec::new();
        for (h, w) in [(short, long), (long, short)] {
            if h > room.rows() || w > room.cols() {
                continue;
            }
            for r in room.r0..=room.r1 - h {
                for c in room.c0..=room.c1 - w {
                    let touches =
                        r == room.r0 || c == room.c0 || r + h == room.r1 || c + w == room.c1;
                    let clear = r > room.r0 && c > room.c0 && r + h < room.r1 && c + w < room.c1;
                    let ok = match how {
                        Placement::AgainstWall => touches,
                        Placement::Central => clear,
                    };
                    if ok {
                        candidates.push((r, c, h, w));
                    }
                }
            }
            if long == short {
                break;
            }
        }
        candidates.shuffle(&mut self.rng);
        for (r, c, h, w) in candidates.into_iter().take(64) {
            let cells: Vec<Cell> = (r..r + h)
                .flat_map(|rr| (c..c + w).map(move |cc| Cell::new(rr, cc)))
                .collect();
            if self.try_commit(&cells, class) {
                return Some(cells);
            }
        }
        None
    }

    fn place_near(&mut self, room: &Rect, class: u8, anchor: &[Cell]) -> bool {
        let (h, w) = (self.labels.height(), self.labels.width());
        let mut ring: Vec<Cell> = Vec::new();
        for &a in anchor {
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if let Some(n) = a.offset(dr, dc, h, w) {
                        if room.contains(n) && !anchor.contains(&n) && !ring.contains(&n) {
                            ring.push(n);
                        }
                    }
                }
            }
        }
        ring.shuffle(&mut self.rng);
        ring.into_iter().any(|c| self.try_commit(&[c], class))
    }
}

fn keep_largest_free_component(labels: &mut Grid<u8>) {
    let (h, w) = (labels.height(), labels.width());
    let mut comp = Grid::filled(h, w, usize::MAX);
    let mut sizes = Vec::new();
    for start in 0..labels.len() {
        let start = labels.cell_at(start);
        if *labels.get(start) != SEM_FLOOR || *comp.get(start) != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        comp.set(start, id);
        let mut size = 0;
        while let Some(c) = stack.pop() {
            size += 1;
            for n in neighbors4(c, h, w) {
                if *labels.get(n) == SEM_FLOOR && *comp.get(n) == usize::MAX {
                    comp.set(n, id);
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    let Some(largest) = (0..sizes.len()).max_by_key(|&i| (sizes[i], usize::MAX - i)) else {
        return;
    };
    for i in 0..labels.len() {
        let c = labels.cell_at(i);
        if *labels.get(c) == SEM_FLOOR && *comp.get(c) != largest {
            labels.set(c, SEM_WALL);
        }
    }
}
