//! Prompts and the simulated annotator.
//!
//! The robot user clicks once per round. The first click goes to the deepest
//! point of the ground truth. Later clicks go to the deepest point of the
//! largest error region, labeled foreground for missed pixels and
//! background for spurious ones.

mod policy;
mod reference;
mod remote;
mod session;

pub use policy::{initial_click, next_click, select_center_slice, PromptError};
pub use reference::{ReferenceSegmenter, DEFAULT_INTENSITY_TOLERANCE};
pub use remote::RemoteSegmenter;
pub use session::{
    run_click_session, SessionAborted, SessionFailure, SessionRound, SliceSessionLog,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::{Frame, MaskSlice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClickLabel {
    Foreground,
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Click {
    pub row: usize,
    pub col: usize,
    pub label: ClickLabel,
    /// 1-based interaction round.
    #[serde(default)]
    pub round: u32,
}

impl Click {
    pub fn is_foreground(&self) -> bool {
        self.label == ClickLabel::Foreground
    }
}

/// Inclusive pixel box `(r0, c0)`..=`(r1, c1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub r0: usize,
    pub c0: usize,
    pub r1: usize,
    pub c1: usize,
}

impl BoxPrompt {
    pub fn new(r0: usize, c0: usize, r1: usize, c1: usize) -> Result<Self, PromptError> {
        if r0 > r1 || c0 > c1 {
            return Err(PromptError::Invalid(format!(
                "box corners out of order: ({r0},{c0})..({r1},{c1})"
            )));
        }
        Ok(Self { r0, c0, r1, c1 })
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.r0..=self.r1).contains(&row) && (self.c0..=self.c1).contains(&col)
    }

    pub fn center(&self) -> (usize, usize) {
        ((self.r0 + self.r1) / 2, (self.c0 + self.c1) / 2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PromptKind {
    Clicks(Vec<Click>),
    Box(BoxPrompt),
    Mask(MaskSlice),
}

/// Guidance for one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Prompt {
    pub slice_index: usize,
    pub kind: PromptKind,
}

/// Everything a segmenter sees for one prediction: the cumulative clicks on
/// the slice plus an optional box or starting mask.
#[derive(Clone, Copy, Debug, Default)]
pub struct SegmenterInput<'a> {
    pub clicks: &'a [Click],
    pub bbox: Option<BoxPrompt>,
    pub mask: Option<&'a MaskSlice>,
}

impl<'a> SegmenterInput<'a> {
    pub fn clicks(clicks: &'a [Click]) -> Self {
        Self {
            clicks,
            ..Default::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("segmenter transport error: {0}")]
    Transport(String),
    #[error("segmenter protocol error: {0}")]
    Protocol(String),
    #[error("invalid segmenter input: {0}")]
    Input(String),
}

/// A 2D interactive segmenter.
///
/// Implementations must be deterministic: the same frame and the same
/// cumulative prompts give the same mask.
pub trait InteractiveSegmenter: Send {
    /// Drops any per-slice state before a new session.
    fn reset(&mut self) {}

    fn predict(
        &mut self,
        frame: &Frame,
        input: &SegmenterInput<'_>,
    ) -> Result<MaskSlice, SegmenterError>;
}

impl<S: InteractiveSegmenter + ?Sized> InteractiveSegmenter for Box<S> {
    fn reset(&mut self) {
        (**self).reset()
    }

    fn predict(
        &mut self,
        frame: &Frame,
        input: &SegmenterInput<'_>,
    ) -> Result<MaskSlice, SegmenterError> {
        (**self).predict(frame, input)
    }
}
