//! PNG renders of worlds, belief maps and trajectories.
//!
//! Semantic palette, by class index of the default catalog:
//!
//! | index | class   | RGB           |
//! |-------|---------|---------------|
//! | 0     | unknown | 0, 0, 0       |
//! | 1     | floor   | 230, 230, 230 |
//! | 2     | wall    | 90, 90, 90    |
//! | 3     | bed     | 31, 119, 180  |
//! | 4     | chair   | 255, 127, 14  |
//! | 5     | cushion | 44, 160, 44   |
//! | 6     | sofa    | 214, 39, 40   |
//! | 7     | counter | 148, 103, 189 |
//! | 8     | table   | 140, 86, 75   |
//!
//! Further classes cycle through the object colours. Trajectories are drawn
//! in yellow, selected goals in magenta, the start in cyan and the final
//! pose in white.

use std::path::Path;

use image::{Rgb, RgbImage};
use semnav_core::belief::GlobalBeliefMap;
use semnav_core::grid::Cell;
use semnav_core::harness::EpisodeOutcome;
use semnav_core::world::GridWorld;

use crate::Result;

pub const PALETTE: [[u8; 3]; 9] = [
    [0, 0, 0],
    [230, 230, 230],
    [90, 90, 90],
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

const TRAJECTORY: [u8; 3] = [255, 215, 0];
const GOAL: [u8; 3] = [255, 0, 255];
const START: [u8; 3] = [0, 255, 255];
const END: [u8; 3] = [255, 255, 255];

/// Pixels per cell edge.
pub const SCALE: u32 = 4;

pub fn class_color(class: u8) -> [u8; 3] {
    let c = class as usize;
    if c < PALETTE.len() {
        PALETTE[c]
    } else {
        PALETTE[3 + (c - 3) % (PALETTE.len() - 3)]
    }
}

fn paint(img: &mut RgbImage, cell: Cell, color: [u8; 3]) {
    for dy in 0..SCALE {
        for dx in 0..SCALE {
            img.put_pixel(cell.col as u32 * SCALE + dx, cell.row as u32 * SCALE + dy, Rgb(color));
        }
    }
}

fn canvas(height: usize, width: usize) -> RgbImage {
    RgbImage::new(width as u32 * SCALE, height as u32 * SCALE)
}

fn labels_image(labels: &[u8], height: usize, width: usize) -> RgbImage {
    let mut img = canvas(height, width);
    for (i, &l) in labels.iter().enumerate() {
        paint(&mut img, Cell::new(i / width, i % width), class_color(l));
    }
    img
}

pub fn render_world(world: &GridWorld) -> RgbImage {
    labels_image(world.semantic().as_slice(), world.height(), world.width())
}

/// Argmax of the semantic belief; cells never covered by a prediction are
/// drawn at a third of their brightness.
pub fn render_belief(map: &GlobalBeliefMap) -> RgbImage {
    let labels = map.argmax_labels();
    let mut img = canvas(map.height(), map.width());
    for (i, &l) in labels.iter().enumerate() {
        let mut c = class_color(l);
        if !map.is_observed(i) {
            c = c.map(|v| v / 3);
        }
        paint(&mut img, map.cell_at(i), c);
    }
    img
}

/// Mean class variance as grey levels, scaled to the map's maximum.
pub fn render_uncertainty(map: &GlobalBeliefMap) -> RgbImage {
    let values: Vec<f64> = (0..map.cell_count()).map(|i| map.mean_class_variance(i)).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let mut img = canvas(map.height(), map.width());
    for (i, v) in values.iter().enumerate() {
        let g = if max > 0.0 { (v / max * 255.0).round() as u8 } else { 0 };
        paint(&mut img, map.cell_at(i), [g, g, g]);
    }
    img
}

/// Draws an episode's path, goals, start and end on top of `base`.
pub fn overlay_trajectory(base: &mut RgbImage, outcome: &EpisodeOutcome) {
    for t in &outcome.trajectory {
        paint(base, Cell::new(t.row, t.col), TRAJECTORY);
    }
    for g in &outcome.goals {
        paint(base, g.goal, GOAL);
    }
    if let Some(first) = outcome.trajectory.first() {
        paint(base, Cell::new(first.row, first.col), START);
    }
    if let Some(last) = outcome.trajectory.last() {
        paint(base, Cell::new(last.row, last.col), END);
    }
}

pub fn save_png(path: &Path, img: &RgbImage) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    }
    img.save(path)?;
    Ok(())
}
