use super::{Direction, IndexedFrame, PropagationError, Propagator};
use crate::plane::{Frame, MaskSlice};

/// Repeats the prompt mask on every frame. Useful as a baseline and in tests.
#[derive(Clone, Debug, Default)]
pub struct IdentityPropagator {
    mask: Option<MaskSlice>,
    remaining: usize,
}

impl Propagator for IdentityPropagator {
    fn begin(
        &mut self,
        frames: &[IndexedFrame<'_>],
        prompt: &MaskSlice,
        _: Direction,
    ) -> Result<(), PropagationError> {
        self.mask = Some(prompt.clone());
        self.remaining = frames.len().saturating_sub(1);
        Ok(())
    }

    fn step(&mut self) -> Option<Result<MaskSlice, PropagationError>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        self.mask.clone().map(Ok)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceParams {
    /// Accept pixels within `band_k` standard deviations of the object mean.
    pub band_k: f64,
    /// A candidate region survives if at least this fraction of it lay inside
    /// the previous mask.
    pub min_overlap: f64,
    /// Optional bound, in pixels (8-neighborhood), on how far the object may
    /// move per slice. `None` searches the whole frame.
    pub search_radius: Option<usize>,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            band_k: 2.5,
            min_overlap: 0.3,
            search_radius: None,
        }
    }
}

/// Intensity-tracking propagator.
///
/// For each new frame: take the mean and standard deviation of the previous
/// frame under the previous mask, keep pixels of the new frame within
/// `band_k` deviations of that mean (optionally only near the previous
/// mask), drop 4-connected regions that barely touch the previous
/// mask, then close small holes. An empty mask stays empty.
#[derive(Clone, Debug, Default)]
pub struct ReferencePropagator {
    params: ReferenceParams,
    frames: Vec<Frame>,
    prev: Option<MaskSlice>,
    next: usize,
}

impl ReferencePropagator {
    pub fn new(params: ReferenceParams) -> Self {
        Self {
            params,
            ..Default::default()
        }
    }

    fn advance(&self, prev_frame: &Frame, prev: &MaskSlice, frame: &Frame) -> MaskSlice {
        let (h, w) = frame.shape();
        let n = prev.count();
        if n == 0 {
            return MaskSlice::new(h, w);
        }
        let (mut sum, mut sq) = (0.0, 0.0);
        for (&v, &m) in prev_frame.as_slice().iter().zip(prev.as_slice()) {
            if m {
                sum += v as f64;
                sq += (v as f64) * (v as f64);
            }
        }
        let mean = sum / n as f64;
        let std = (sq / n as f64 - mean * mean).max(0.0).sqrt().max(1.0);
        let band = self.params.band_k * std;

        let reach = self
            .params
            .search_radius
            .map(|n| (0..n).fold(prev.clone(), |m, _| m.dilate3()));
        let candidates = MaskSlice::from_fn(h, w, |r, c| {
            reach.as_ref().is_none_or(|m| m.get(r, c))
                && (frame.get(r, c) as f64 - mean).abs() <= band
        });
        let mut out = MaskSlice::new(h, w);
        for comp in candidates.components() {
            let inside = comp.pixels.iter().filter(|&&(r, c)| prev.get(r, c)).count();
            if inside as f64 >= self.params.min_overlap * comp.len() as f64 {
                for &(r, c) in &comp.pixels {
                    out.set(r, c, true);
                }
            }
        }
        out.close3()
    }
}

impl Propagator for ReferencePropagator {
    fn begin(
        &mut self,
        frames: &[IndexedFrame<'_>],
        prompt: &MaskSlice,
        _: Direction,
    ) -> Result<(), PropagationError> {
        if let Some(f) = frames.first() {
            if f.frame.shape() != prompt.shape() {
                return Err(PropagationError::Contract(format!(
                    "prompt mask is {:?}, frames are {:?}",
                    prompt.shape(),
                    f.frame.shape()
                )));
            }
        }
        self.frames = frames.iter().map(|f| f.frame.clone()).collect();
        self.prev = Some(prompt.clone());
        self.next = 1;
        Ok(())
    }

    fn step(&mut self) -> Option<Result<MaskSlice, PropagationError>> {
        if self.next >= self.frames.len() {
            return None;
        }
        let prev = self.prev.as_ref()?;
        let mask = self.advance(&self.frames[self.next - 1], prev, &self.frames[self.next]);
        self.prev = Some(mask.clone());
        self.next += 1;
        Some(Ok(mask))
    }
}
