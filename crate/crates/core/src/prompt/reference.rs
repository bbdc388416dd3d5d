use std::collections::VecDeque;

use super::{BoxPrompt, InteractiveSegmenter, SegmenterError, SegmenterInput};
use crate::plane::{Frame, MaskSlice};

/// Default accepted deviation from the running region mean, in 8-bit units.
pub const DEFAULT_INTENSITY_TOLERANCE: f64 = 25.0;

/// Classical click-driven region grower, usable offline in place of a
/// learned model.
///
/// Each foreground click seeds a 4-connected flood fill that accepts pixels
/// within `tolerance` of the running mean of the pixels accepted so far.
/// The 3×3 neighborhood of every background click is off limits. The
/// prediction is the union of all grown regions, plus the starting mask if
/// one was given (minus the off-limits pixels). A box restricts growth to
/// its interior and seeds at its center when there are no foreground clicks.
#[derive(Clone, Debug)]
pub struct ReferenceSegmenter {
    pub tolerance: f64,
}

impl Default for ReferenceSegmenter {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_INTENSITY_TOLERANCE,
        }
    }
}

impl ReferenceSegmenter {
    pub fn new(tolerance: f64) -> Self {
        Self { tolerance }
    }

    fn grow(
        &self,
        frame: &Frame,
        seed: (usize, usize),
        blocked: &MaskSlice,
        bbox: Option<BoxPrompt>,
    ) -> MaskSlice {
        let (h, w) = frame.shape();
        let mut region = MaskSlice::new(h, w);
        if blocked.get(seed.0, seed.1) {
            return region;
        }
        let allowed =
            |r: usize, c: usize| !blocked.get(r, c) && bbox.is_none_or(|b| b.contains(r, c));
        if !allowed(seed.0, seed.1) {
            return region;
        }
        let mut seen = MaskSlice::new(h, w);
        let mut queue = VecDeque::new();
        let mut sum = frame.get(seed.0, seed.1) as f64;
        let mut n = 1.0;
        region.set(seed.0, seed.1, true);
        seen.set(seed.0, seed.1, true);
        queue.push_back(seed);
        while let Some((r, c)) = queue.pop_front() {
            let neighbors = [
                (r.wrapping_sub(1), c),
                (r + 1, c),
                (r, c.wrapping_sub(1)),
                (r, c + 1),
            ];
            for (nr, nc) in neighbors {
                if nr >= h || nc >= w || seen.get(nr, nc) || !allowed(nr, nc) {
                    continue;
                }
                seen.set(nr, nc, true);
                let v = frame.get(nr, nc) as f64;
                if (v - sum / n).abs() <= self.tolerance {
                    sum += v;
                    n += 1.0;
                    region.set(nr, nc, true);
                    queue.push_back((nr, nc));
                }
            }
        }
        region
    }
}

impl InteractiveSegmenter for ReferenceSegmenter {
    fn predict(
        &mut self,
        frame: &Frame,
        input: &SegmenterInput<'_>,
    ) -> Result<MaskSlice, SegmenterError> {
        let (h, w) = frame.shape();
        for click in input.clicks {
            if !frame.contains(click.row, click.col) {
                return Err(SegmenterError::Input(format!(
                    "click ({}, {}) outside {h}x{w} frame",
                    click.row, click.col
                )));
            }
        }
        if let Some(b) = input.bbox {
            if b.r1 >= h || b.c1 >= w {
                return Err(SegmenterError::Input(format!(
                    "box {b:?} outside {h}x{w} frame"
                )));
            }
        }

        let mut blocked = MaskSlice::new(h, w);
        for click in input.clicks.iter().filter(|c| !c.is_foreground()) {
            for r in click.row.saturating_sub(1)..=(click.row + 1).min(h - 1) {
                for c in click.col.saturating_sub(1)..=(click.col + 1).min(w - 1) {
                    blocked.set(r, c, true);
                }
            }
        }

        let mut out = match input.mask {
            Some(m) => {
                if m.shape() != (h, w) {
                    return Err(SegmenterError::Input(
                        "mask prompt shape differs from frame".into(),
                    ));
                }
                MaskSlice::from_fn(h, w, |r, c| m.get(r, c) && !blocked.get(r, c))
            }
            None => MaskSlice::new(h, w),
        };

        let mut seeds: Vec<(usize, usize)> = input
            .clicks
            .iter()
            .filter(|c| c.is_foreground())
            .map(|c| (c.row, c.col))
            .collect();
        if seeds.is_empty() {
            if let Some(b) = input.bbox {
                seeds.push(b.center());
            }
        }
        for seed in seeds {
            out.union_with(&self.grow(frame, seed, &blocked, input.bbox));
        }
        Ok(out)
    }
}
