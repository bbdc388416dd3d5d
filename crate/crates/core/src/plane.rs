//! Two-dimensional rasters: slice planes, 8-bit frames and binary masks.
//!
//! All planes are row-major. Pixel `(row, col)` lives at `row * width + col`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edt;
use crate::rle::{self, RleError};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("shape mismatch: expected {expected:?}, got {actual:?}")]
pub struct ShapeMismatch {
    pub expected: Vec<usize>,
    pub actual: Vec<usize>,
}

impl ShapeMismatch {
    pub fn new(expected: &[usize], actual: &[usize]) -> Self {
        Self {
            expected: expected.to_vec(),
            actual: actual.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Binary mask on one slice.
pub type MaskSlice = Plane<bool>;

/// 8-bit grayscale frame, one per slice of a [`FrameStack`](crate::volume::FrameStack).
pub type Frame = Plane<u8>;

impl<T: Clone + Default> Plane<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![T::default(); height * width],
        }
    }
}

impl<T> Plane<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self, ShapeMismatch> {
        if data.len() != height * width {
            return Err(ShapeMismatch::new(&[height * width], &[data.len()]));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
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

    /// `(height, width)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width
    }

    pub fn ensure_same_shape<U>(&self, other: &Plane<U>) -> Result<(), ShapeMismatch> {
        if self.shape() != other.shape() {
            return Err(ShapeMismatch::new(
                &[self.height, self.width],
                &[other.height, other.width],
            ));
        }
        Ok(())
    }
}

impl<T: Copy> Plane<T> {
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }
}

impl MaskSlice {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_blank(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn to_rle(&self) -> Vec<u32> {
        rle::encode(&self.data)
    }

    pub fn from_rle(height: usize, width: usize, runs: &[u32]) -> Result<Self, RleError> {
        let data = rle::decode(runs, height * width)?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Pixels set in exactly one of the two masks. Shapes must match.
    pub fn xor(&self, other: &MaskSlice) -> MaskSlice {
        assert_eq!(self.shape(), other.shape());
        MaskSlice {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn union_with(&mut self, other: &MaskSlice) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= *b;
        }
    }

    /// Exact squared Euclidean distance of each foreground pixel to the
    /// nearest background pixel, counting everything outside the plane as
    /// background. Background pixels get 0.
    pub fn squared_depth(&self) -> Plane<f64> {
        let (h, w) = (self.height + 2, self.width + 2);
        let mut seeds = vec![true; h * w];
        for r in 0..self.height {
            for c in 0..self.width {
                seeds[(r + 1) * w + c + 1] = !self.get(r, c);
            }
        }
        let padded = edt::squared_distance_to_seeds(&[w, h], &[1.0, 1.0], &seeds);
        Plane::from_fn(self.height, self.width, |r, c| padded[(r + 1) * w + c + 1])
    }

    /// Foreground pixel deepest inside the mask, ties broken toward the
    /// smallest `(row, col)`. `None` for a blank mask.
    pub fn deepest_pixel(&self) -> Option<(usize, usize)> {
        let depth = self.squared_depth();
        let mut best: Option<((usize, usize), f64)> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if !self.get(r, c) {
                    continue;
                }
                let d = depth.get(r, c);
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some(((r, c), d));
                }
            }
        }
        best.map(|(p, _)| p)
    }

    /// 4-connected components in scan order of their first pixel.
    pub fn components(&self) -> Vec<Component> {
        let mut label = vec![usize::MAX; self.data.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut pixels = Vec::new();
            label[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (r, c) = (i / self.width, i % self.width);
                pixels.push((r, c));
                let mut visit = |j: usize| {
                    if self.data[j] && label[j] == usize::MAX {
                        label[j] = id;
                        stack.push(j);
                    }
                };
                if r > 0 {
                    visit(i - self.width);
                }
                if r + 1 < self.height {
                    visit(i + self.width);
                }
                if c > 0 {
                    visit(i - 1);
                }
                if c + 1 < self.width {
                    visit(i + 1);
                }
            }
            pixels.sort_unstable();
            out.push(Component { pixels });
        }
        out
    }

    /// 3×3 dilation. Pixels outside the plane are ignored.
    pub fn dilate3(&self) -> MaskSlice {
        self.neighborhood_op(|any, _| any)
    }

    /// 3×3 erosion. Only in-plane neighbors are consulted, so the border does
    /// not erode the mask.
    pub fn erode3(&self) -> MaskSlice {
        self.neighborhood_op(|_, all| all)
    }

    /// Morphological closing with a 3×3 square; never removes pixels.
    pub fn close3(&self) -> MaskSlice {
        self.dilate3().erode3()
    }

    fn neighborhood_op(&self, pick: impl Fn(bool, bool) -> bool) -> MaskSlice {
        Plane::from_fn(self.height, self.width, |r, c| {
            let mut any = false;
            let mut all = true;
            for rr in r.saturating_sub(1)..=(r + 1).min(self.height - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(self.width - 1) {
                    let v = self.get(rr, cc);
                    any |= v;
                    all &= v;
                }
            }
            pick(any, all)
        })
    }
}

/// One connected set of pixels, sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn first(&self) -> (usize, usize) {
        self.pixels[0]
    }

    pub fn to_mask(&self, height: usize, width: usize) -> MaskSlice {
        let mut m = MaskSlice::new(height, width);
        for &(r, c) in &self.pixels {
            m.set(r, c, true);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> MaskSlice {
        let h = rows.len();
        let w = rows[0].len();
        Plane::from_fn(h, w, |r, c| rows[r].as_bytes()[c] == b'#')
    }

    #[test]
    fn components_are_four_connected() {
        let m = mask_from(&["#..", ".#.", "..#"]);
        assert_eq!(m.components().len(), 3);
        let m = mask_from(&["##.", ".#.", ".##"]);
        assert_eq!(m.components().len(), 1);
    }

    #[test]
    fn components_ordered_by_first_pixel() {
        let m = mask_from(&["..#", "#..", "#.."]);
        let comps = m.components();
        assert_eq!(comps[0].first(), (0, 2));
        assert_eq!(comps[1].first(), (1, 0));
        assert_eq!(comps[1].len(), 2);
    }

    #[test]
    fn border_counts_as_background_for_depth() {
        let m = MaskSlice::from_vec(1, 1, vec![true]).unwrap();
        assert_eq!(m.squared_depth().get(0, 0), 1.0);
        let full = MaskSlice::from_vec(3, 3, vec![true; 9]).unwrap();
        assert_eq!(full.squared_depth().get(1, 1), 4.0);
        assert_eq!(full.deepest_pixel(), Some((1, 1)));
    }

    #[test]
    fn closing_fills_single_pixel_hole_and_keeps_border() {
        let m = mask_from(&["###", "#.#", "###"]);
        let closed = m.close3();
        assert_eq!(closed.count(), 9);
        let bar = mask_from(&["###", "...", "..."]);
        assert_eq!(bar.close3(), bar);
    }

    #[test]
    fn rle_roundtrip_via_plane() {
        let m = mask_from(&["#..#", ".##."]);
        let runs = m.to_rle();
        assert_eq!(runs, vec![0, 1, 2, 1, 1, 2, 1]);
        assert_eq!(MaskSlice::from_rle(2, 4, &runs).unwrap(), m);
    }
}
