//! Row-major 2D grids and channel-major 3D tensors.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// A grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Offset this cell, returning `None` when leaving a `height`×`width` grid.
    pub fn offset(self, dr: isize, dc: isize, height: usize, width: usize) -> Option<Cell> {
        let r = self.row as isize + dr;
        let c = self.col as isize + dc;
        if r < 0 || c < 0 || r >= height as isize || c >= width as isize {
            None
        } else {
            Some(Cell::new(r as usize, c as usize))
        }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.row
            .abs_diff(other.row)
            .max(self.col.abs_diff(other.col))
    }

    pub fn euclidean(self, other: Cell) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        crate::math::sqrt(dr * dr + dc * dc)
    }
}

pub(crate) const NEIGHBORS4: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// The in-bounds 4-neighbours of `cell`, in N, E, S, W order.
pub fn neighbors4(cell: Cell, height: usize, width: usize) -> impl Iterator<Item = Cell> {
    NEIGHBORS4
        .into_iter()
        .filter_map(move |(dr, dc)| cell.offset(dr, dc, height, width))
}

/// Dense row-major grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps row-major data. Panics if the length does not match.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width, "grid data length mismatch");
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> &T {
        &self.data[cell.row * self.width + cell.col]
    }

    #[inline]
    pub fn get_mut(&mut self, cell: Cell) -> &mut T {
        &mut self.data[cell.row * self.width + cell.col]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, value: T) {
        self.data[cell.row * self.width + cell.col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.data.len()).map(move |i| self.cell_at(i))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Channel-major `C×H×W` tensor of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            channels * height * width,
            "tensor data length mismatch"
        );
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    /// One-hot encoding of a label grid with `classes` channels.
    pub fn one_hot(labels: &[u8], classes: usize, height: usize, width: usize) -> Self {
        let plane = height * width;
        let mut t = Self::zeros(classes, height, width);
        for (i, &l) in labels.iter().enumerate() {
            t.data[l as usize * plane + i] = 1.0;
        }
        t
    }

    #[inline]
    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn at(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.height + row) * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, row: usize, col: usize) -> &mut f64 {
        &mut self.data[(c * self.height + row) * self.width + col]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    /// The distribution stored at flat cell index `cell`.
    pub fn cell_values(&self, cell: usize) -> Vec<f64> {
        let p = self.plane();
        (0..self.channels)
            .map(|c| self.data[c * p + cell])
            .collect()
    }

    /// Per-cell argmax over channels; ties go to the lowest channel.
    pub fn argmax(&self) -> Vec<u8> {
        let p = self.plane();
        (0..p)
            .map(|i| {
                let mut best = 0;
                let mut best_v = self.data[i];
                for c in 1..self.channels {
                    let v = self.data[c * p + i];
                    if v > best_v {
                        best = c;
                        best_v = v;
                    }
                }
                best as u8
            })
            .collect()
    }

    /// Concatenate along the channel axis.
    pub fn concat(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!((self.height, self.width), (other.height, other.width));
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Tensor3::from_vec(
            self.channels + other.channels,
            self.height,
            self.width,
            data,
        )
    }

    /// Largest deviation of any per-cell channel sum from 1.
    pub fn max_normalization_error(&self) -> f64 {
        let p = self.plane();
        (0..p)
            .map(|i| {
                let s: f64 = (0..self.channels).map(|c| self.data[c * p + i]).sum();
                libm::fabs(s - 1.0)
            })
            .fold(0.0, f64::max)
    }
}
