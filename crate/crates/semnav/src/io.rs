//! On-disk formats.
//!
//! * World files (`.world`): one JSON header line with the dimensions, seed,
//!   cell size and class catalog, followed by `height` rows of `width`
//!   characters. Each character is the cell's semantic class index in base
//!   36 (`0`-`9`, then `a`-`z`).
//! * Episode lists: a JSON array of episodes.
//! * Datasets (`.snds`): magic `SNDS`, little-endian `u32` version, `u64`
//!   sample count, `u32` crop size, then per sample the four label crops
//!   (input occupancy, input semantics, target occupancy, target semantics)
//!   as one byte per cell.
//! * Checkpoints (`.ckpt`): the ensemble encoding of `semnav-core`.
//! * CSV reports: comma separated with a header row; floats use a fixed
//!   number of decimals so reruns compare byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use semnav_core::grid::Grid;
use semnav_core::predictor::{decode_ensemble, encode_ensemble, Ensemble, TrainingSample};
use semnav_core::world::{ClassCatalog, Episode, GridWorld};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::{Error, Result};

const WORLD_FORMAT: &str = "semnav-world";
const WORLD_VERSION: u32 = 1;
const DATASET_MAGIC: &[u8; 4] = b"SNDS";
const DATASET_VERSION: u32 = 1;

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    match fs::File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingInput(path.to_path_buf())),
        Err(e) => Err(Error::io(path, e)),
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    open(path)?.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct WorldHeader {
    format: String,
    version: u32,
    width: usize,
    height: usize,
    seed: u64,
    cell_size: f64,
    catalog: ClassCatalog,
}

pub fn encode_world(world: &GridWorld) -> String {
    let header = WorldHeader {
        format: WORLD_FORMAT.into(),
        version: WORLD_VERSION,
        width: world.width(),
        height: world.height(),
        seed: world.seed,
        cell_size: world.cell_size,
        catalog: world.catalog.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for row in world.semantic().as_slice().chunks(world.width()) {
        out.extend(row.iter().map(|&l| char::from_digit(l as u32, 36).expect("class index below 36")));
        out.push('\n');
    }
    out
}

pub fn decode_world(text: &str, path: &Path) -> Result<GridWorld> {
    let bad = |reason: String| Error::format(path, reason);
    let mut lines = text.lines();
    let header: WorldHeader = serde_json::from_str(lines.next().ok_or_else(|| bad("empty file".into()))?)
        .map_err(|e| bad(format!("header: {e}")))?;
    if header.format != WORLD_FORMAT || header.version != WORLD_VERSION {
        return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if !header.catalog.is_valid() || header.catalog.semantic_len() > 36 {
        return Err(bad("invalid class catalog".into()));
    }
    let k = header.catalog.semantic_len() as u32;
    let mut labels = Vec::with_capacity(header.width * header.height);
    for r in 0..header.height {
        let line = lines.next().ok_or_else(|| bad(format!("missing row {r}")))?;
        if line.chars().count() != header.width {
            return Err(bad(format!("row {r} has {} cells, expected {}", line.chars().count(), header.width)));
        }
        for ch in line.chars() {
            match ch.to_digit(36) {
                Some(v) if v < k => labels.push(v as u8),
                _ => return Err(bad(format!("row {r}: invalid cell `{ch}`"))),
            }
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data after grid".into()));
    }
    let mut world = GridWorld::from_labels(header.seed, header.catalog, Grid::from_vec(header.height, header.width, labels));
    world.cell_size = header.cell_size;
    Ok(world)
}

pub fn write_world(path: &Path, world: &GridWorld) -> Result<()> {
    write_bytes(path, encode_world(world).as_bytes())
}

pub fn read_world(path: &Path) -> Result<GridWorld> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    decode_world(&text, path)
}

pub fn write_episodes(path: &Path, episodes: &[Episode]) -> Result<()> {
    write_json(path, episodes)
}

pub fn read_episodes(path: &Path) -> Result<Vec<Episode>> {
    read_json(path)
}

pub fn write_dataset(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    let size = samples.first().map_or(0, |s| s.size);
    if samples.iter().any(|s| s.size != size) {
        return Err(Error::Runtime("dataset mixes crop sizes".into()));
    }
    let mut w = create(path)?;
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(DATASET_MAGIC)?;
    put(&DATASET_VERSION.to_le_bytes())?;
    put(&(samples.len() as u64).to_le_bytes())?;
    put(&(size as u32).to_le_bytes())?;
    for s in samples {
        for crop in [&s.input_occupancy, &s.input_semantics, &s.target_occupancy, &s.target_semantics] {
            put(crop)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Vec<TrainingSample>> {
    let mut r = open(path)?;
    let mut take = |n: usize| -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        r.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format(path, "truncated dataset"),
            _ => Error::io(path, e),
        })?;
        Ok(buf)
    };
    if take(4)? != DATASET_MAGIC {
        return Err(Error::format(path, "bad dataset magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(Error::format(path, format!("unsupported dataset version {version}")));
    }
    let count = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let size = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let plane = size * size;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        out.push(TrainingSample {
            size,
            input_occupancy: take(plane)?,
            input_semantics: take(plane)?,
            target_occupancy: take(plane)?,
            target_semantics: take(plane)?,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing data after samples"));
    }
    Ok(out)
}

pub fn write_checkpoint(path: &Path, ensemble: &Ensemble) -> Result<()> {
    write_bytes(path, &encode_ensemble(ensemble))
}

pub fn read_checkpoint(path: &Path) -> Result<Ensemble> {
    decode_ensemble(&read_bytes(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// Fixed-precision float for reports.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.6}")
}

/// Writes a header row and records, all as strings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_csv`] into its header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Lines of a text file, for small listings.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))
}
