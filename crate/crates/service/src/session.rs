//! Annotation session state.
//!
//! Prompts are stored as an append-only event list; the current 2D
//! prediction is a pure function of that list, so undo is "drop the last
//! event and replay".

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use slicewise_core::plane::{Frame, MaskSlice};
use slicewise_core::prompt::{Click, InteractiveSegmenter, SegmenterError, SegmenterInput};
use slicewise_core::propagation::Provenance;
use slicewise_core::{FrameStack, MaskVolume, Volume};

#[derive(Clone, Debug, PartialEq)]
pub enum PromptEvent {
    Click { slice: usize, click: Click },
    Mask { slice: usize, mask: MaskSlice },
}

impl PromptEvent {
    pub fn slice(&self) -> usize {
        match self {
            PromptEvent::Click { slice, .. } | PromptEvent::Mask { slice, .. } => *slice,
        }
    }
}

/// State derived from the prompt events.
///
/// Clicks accumulate on one slice. A click on another slice, or a mask
/// prompt, starts over; a mask prompt becomes the starting mask that later
/// clicks on the same slice refine.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PromptState {
    pub slice: Option<usize>,
    pub clicks: Vec<Click>,
    pub base: Option<MaskSlice>,
    pub prediction: Option<MaskSlice>,
}

impl PromptState {
    /// Round number of the latest click on the current slice (0 if none).
    pub fn round(&self) -> u32 {
        self.clicks.len() as u32
    }

    pub fn apply(
        &mut self,
        event: &PromptEvent,
        frames: &[Frame],
        seg: &mut dyn InteractiveSegmenter,
    ) -> Result<(), SegmenterError> {
        match event {
            PromptEvent::Mask { slice, mask } => {
                self.slice = Some(*slice);
                self.clicks.clear();
                self.base = Some(mask.clone());
                self.prediction = Some(mask.clone());
                seg.reset();
            }
            PromptEvent::Click { slice, click } => {
                if self.slice != Some(*slice) {
                    self.slice = Some(*slice);
                    self.clicks.clear();
                    self.base = None;
                    seg.reset();
                }
                let mut click = *click;
                click.round = self.clicks.len() as u32 + 1;
                self.clicks.push(click);
                let input = SegmenterInput {
                    clicks: &self.clicks,
                    bbox: None,
                    mask: self.base.as_ref(),
                };
                self.prediction = Some(seg.predict(&frames[*slice], &input)?);
            }
        }
        Ok(())
    }

    pub fn replay(
        events: &[PromptEvent],
        frames: &[Frame],
        seg: &mut dyn InteractiveSegmenter,
    ) -> Result<Self, SegmenterError> {
        let mut s = Self::default();
        for e in events {
            s.apply(e, frames, seg)?;
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Idle,
    Predicting,
    Propagating,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Error,
}

/// Volume scores of a finished propagation against the attached ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeScores {
    pub dice: f64,
    pub nsd: f64,
    pub hd95: Option<f64>,
}

/// A propagation run, shared between the worker and the request handlers.
pub struct PropagationJob {
    pub total: usize,
    pub center: usize,
    done: AtomicUsize,
    pub slices: Mutex<Vec<Option<MaskSlice>>>,
    pub provenance: Mutex<Vec<Option<Provenance>>>,
    pub state: Mutex<(JobState, Option<String>)>,
    pub scores: Mutex<Option<VolumeScores>>,
}

impl PropagationJob {
    pub fn new(total: usize, center: usize) -> Self {
        Self {
            total,
            center,
            done: AtomicUsize::new(0),
            slices: Mutex::new(vec![None; total]),
            provenance: Mutex::new(vec![None; total]),
            state: Mutex::new((JobState::Running, None)),
            scores: Mutex::new(None),
        }
    }

    pub fn record(&self, index: usize, provenance: Provenance, mask: &MaskSlice) {
        let mut slices = self.slices.lock().unwrap();
        if slices[index].is_none() {
            slices[index] = Some(mask.clone());
            self.provenance.lock().unwrap()[index] = Some(provenance);
            self.done.fetch_add(1, Ordering::SeqCst);
        }
    }

    pub fn done(&self) -> usize {
        self.done.load(Ordering::SeqCst)
    }

    pub fn finish(&self, state: JobState, error: Option<String>) {
        *self.state.lock().unwrap() = (state, error);
    }
}

pub struct Session {
    pub id: String,
    pub volume: Volume,
    pub stack: Arc<FrameStack>,
    pub gt: Option<MaskVolume>,
    pub active_slice: usize,
    pub events: Vec<PromptEvent>,
    pub prompts: PromptState,
    /// Taken out while a prediction runs outside the session lock.
    pub segmenter: Option<Box<dyn InteractiveSegmenter>>,
    pub status: SessionStatus,
    pub job: Option<Arc<PropagationJob>>,
    pub last_access: Instant,
}

impl Session {
    pub fn n_slices(&self) -> usize {
        self.stack.len()
    }

    pub fn touch(&mut self) {
        self.last_access = Instant::now();
    }

    pub fn gt_slice(&self, index: usize) -> Option<MaskSlice> {
        self.gt
            .as_ref()
            .and_then(|g| g.slice(self.stack.axis, index).ok())
    }
}
