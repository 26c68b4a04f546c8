//! Square three-band rasters used for piece faces.

use serde::{Deserialize, Serialize};

/// A `size × size` tile with three bands per pixel, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile<T> {
    size: usize,
    data: Vec<[T; 3]>,
}

/// 8-bit sRGB tile, kept alongside the L*a*b* face for lossless rendering.
pub type RgbTile = Tile<u8>;

/// Normalized L*a*b* face: every band scaled into `[0, 1]`.
pub type FaceImage = Tile<f64>;

impl<T: Copy> Tile<T> {
    pub fn from_fn(size: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                data.push(f(r, c));
            }
        }
        Tile { size, data }
    }

    /// Returns `None` unless `data.len() == size * size`.
    pub fn from_pixels(size: usize, data: Vec<[T; 3]>) -> Option<Self> {
        (data.len() == size * size).then_some(Tile { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn pixels(&self) -> &[[T; 3]] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [T; 3] {
        self.data[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, px: [T; 3]) {
        self.data[row * self.size + col] = px;
    }

    /// Rotates counterclockwise by `quarter_turns × 90°`.
    pub fn rotated_ccw(&self, quarter_turns: u8) -> Self {
        let w = self.size;
        match quarter_turns % 4 {
            0 => self.clone(),
            1 => Tile::from_fn(w, |r, c| self.get(c, w - 1 - r)),
            2 => Tile::from_fn(w, |r, c| self.get(w - 1 - r, w - 1 - c)),
            _ => Tile::from_fn(w, |r, c| self.get(w - 1 - c, r)),
        }
    }

    /// Mirror image about the vertical axis.
    pub fn mirrored(&self) -> Self {
        let w = self.size;
        Tile::from_fn(w, |r, c| self.get(r, w - 1 - c))
    }

    pub fn map<U: Copy>(&self, f: impl Fn([T; 3]) -> [U; 3]) -> Tile<U> {
        Tile {
            size: self.size,
            data: self.data.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Boundary pixels of one side, listed in clockwise order around the tile.
    ///
    /// Sides are numbered clockwise from the top: 0 = top (left to right),
    /// 1 = right (top to bottom), 2 = bottom (right to left), 3 = left
    /// (bottom to top).
    pub fn clockwise_side(&self, side: usize) -> Vec<[T; 3]> {
        let w = self.size;
        (0..w)
            .map(|k| match side % 4 {
                0 => self.get(0, k),
                1 => self.get(k, w - 1),
                2 => self.get(w - 1, w - 1 - k),
                _ => self.get(w - 1 - k, 0),
            })
            .collect()
    }
}
