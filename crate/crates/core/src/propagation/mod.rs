//! Bidirectional mask propagation through a frame stack.
//!
//! The prompted slice is the starting frame of two independent passes: one
//! toward the last slice, one toward slice 0. Each pass gets its own
//! [`Propagator`] instance, so nothing leaks between directions.

mod reference;
mod remote;

pub use reference::{IdentityPropagator, ReferenceParams, ReferencePropagator};
pub use remote::{RemotePropagator, DEFAULT_STEP_TIMEOUT};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::{Frame, MaskSlice};
use crate::volume::{FrameStack, MaskVolume, VolumeError};
pub use crate::wire::Direction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("transport error at frame {index}: {message}")]
    Transport { index: usize, message: String },
    #[error("protocol error at frame {index}: {message}")]
    Protocol { index: usize, message: String },
}

impl From<VolumeError> for PropagationError {
    fn from(e: VolumeError) -> Self {
        PropagationError::Contract(e.to_string())
    }
}

/// Visit order for both directions; both lists start at `center`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropagationPlan {
    pub center: usize,
    pub forward: Vec<usize>,
    pub backward: Vec<usize>,
}

pub fn plan(n_slices: usize, center: usize) -> Result<PropagationPlan, PropagationError> {
    if center >= n_slices {
        return Err(PropagationError::Contract(format!(
            "center {center} outside 0..{n_slices}"
        )));
    }
    Ok(PropagationPlan {
        center,
        forward: (center..n_slices).collect(),
        backward: (0..=center).rev().collect(),
    })
}

impl PropagationPlan {
    pub fn visits(&self, direction: Direction) -> &[usize] {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IndexedFrame<'a> {
    pub index: usize,
    pub frame: &'a Frame,
}

/// A slice-to-slice mask propagator.
///
/// `begin` receives the frames of one direction in visit order, the first
/// being the prompted frame, plus the prompt mask for it. Each `step` then
/// yields the mask for the next frame, `frames.len() - 1` times in total.
/// Implementations may remember anything about past frames and masks but
/// must be deterministic.
pub trait Propagator: Send {
    fn begin(
        &mut self,
        frames: &[IndexedFrame<'_>],
        prompt: &MaskSlice,
        direction: Direction,
    ) -> Result<(), PropagationError>;

    fn step(&mut self) -> Option<Result<MaskSlice, PropagationError>>;
}

/// Makes a fresh propagator per direction.
pub trait PropagatorFactory: Sync {
    fn create(&self) -> Box<dyn Propagator>;
}

impl<F> PropagatorFactory for F
where
    F: Fn() -> Box<dyn Propagator> + Sync,
{
    fn create(&self) -> Box<dyn Propagator> {
        self()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Prompt,
    Forward,
    Backward,
    /// Not produced, because the direction covering it failed.
    Missing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionFailure {
    pub direction: Direction,
    /// First slice that did not get a mask.
    pub at_index: usize,
    pub error: PropagationError,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    pub mask: MaskVolume,
    pub provenance: Vec<Provenance>,
    /// Wall time spent producing each slice; zero for the prompt and for
    /// missing slices.
    pub timing: Vec<Duration>,
    pub failures: Vec<DirectionFailure>,
}

impl PropagationResult {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Progress notification emitted as each slice mask becomes available.
pub struct SliceUpdate<'a> {
    pub index: usize,
    pub provenance: Provenance,
    pub mask: &'a MaskSlice,
}

pub fn propagate(
    stack: &FrameStack,
    center_mask: &MaskSlice,
    center: usize,
    factory: &dyn PropagatorFactory,
) -> Result<PropagationResult, PropagationError> {
    propagate_with(stack, center_mask, center, factory, &|_| {})
}

/// [`propagate`] with a callback per finished slice. Both directions run on
/// their own threads, so the callback may be invoked concurrently.
pub fn propagate_with(
    stack: &FrameStack,
    center_mask: &MaskSlice,
    center: usize,
    factory: &dyn PropagatorFactory,
    observer: &(dyn Fn(SliceUpdate<'_>) + Sync),
) -> Result<PropagationResult, PropagationError> {
    let plan = plan(stack.len(), center)?;
    let shape = stack.frame_shape();
    if center_mask.shape() != shape {
        return Err(PropagationError::Contract(format!(
            "prompt mask is {:?}, frames are {:?}",
            center_mask.shape(),
            shape
        )));
    }
    observer(SliceUpdate {
        index: center,
        provenance: Provenance::Prompt,
        mask: center_mask,
    });

    let (fwd, bwd) = std::thread::scope(|s| {
        let f = s.spawn(|| {
            run_direction(
                stack,
                &plan,
                Direction::Forward,
                center_mask,
                factory,
                observer,
            )
        });
        let b = run_direction(
            stack,
            &plan,
            Direction::Backward,
            center_mask,
            factory,
            observer,
        );
        (f.join().expect("forward propagation thread panicked"), b)
    });

    let n = stack.len();
    let mut provenance = vec![Provenance::Missing; n];
    let mut timing = vec![Duration::ZERO; n];
    let mut slices: Vec<Option<MaskSlice>> = vec![None; n];
    provenance[center] = Provenance::Prompt;
    slices[center] = Some(center_mask.clone());
    let mut failures = Vec::new();
    for (run, tag) in [(fwd, Provenance::Forward), (bwd, Provenance::Backward)] {
        for (idx, mask, took) in run.produced {
            provenance[idx] = tag;
            timing[idx] = took;
            slices[idx] = Some(mask);
        }
        failures.extend(run.failure);
    }
    let blank = MaskSlice::new(shape.0, shape.1);
    let planes: Vec<MaskSlice> = slices
        .into_iter()
        .map(|s| s.unwrap_or_else(|| blank.clone()))
        .collect();
    let mask = MaskVolume::from_slices(stack.axis, &planes)?;
    Ok(PropagationResult {
        mask,
        provenance,
        timing,
        failures,
    })
}

struct DirectionRun {
    produced: Vec<(usize, MaskSlice, Duration)>,
    failure: Option<DirectionFailure>,
}

fn run_direction(
    stack: &FrameStack,
    plan: &PropagationPlan,
    direction: Direction,
    prompt: &MaskSlice,
    factory: &dyn PropagatorFactory,
    observer: &(dyn Fn(SliceUpdate<'_>) + Sync),
) -> DirectionRun {
    let visits = plan.visits(direction);
    let mut run = DirectionRun {
        produced: Vec::with_capacity(visits.len().saturating_sub(1)),
        failure: None,
    };
    if visits.len() < 2 {
        return run;
    }
    let frames: Vec<IndexedFrame<'_>> = visits
        .iter()
        .map(|&index| IndexedFrame {
            index,
            frame: &stack.frames[index],
        })
        .collect();
    let shape = stack.frame_shape();
    let mut prop = factory.create();
    let fail = |at_index: usize, error: PropagationError| DirectionFailure {
        direction,
        at_index,
        error,
    };
    if let Err(e) = prop.begin(&frames, prompt, direction) {
        run.failure = Some(fail(visits[1], e));
        return run;
    }
    let provenance = match direction {
        Direction::Forward => Provenance::Forward,
        Direction::Backward => Provenance::Backward,
    };
    for &idx in &visits[1..] {
        let started = Instant::now();
        let mask = match prop.step() {
            Some(Ok(m)) => m,
            Some(Err(e)) => {
                run.failure = Some(fail(idx, e));
                return run;
            }
            None => {
                let e = PropagationError::Protocol {
                    index: idx,
                    message: "propagator ended before the last frame".into(),
                };
                run.failure = Some(fail(idx, e));
                return run;
            }
        };
        if mask.shape() != shape {
            let e = PropagationError::Protocol {
                index: idx,
                message: format!("mask shape {:?}, expected {:?}", mask.shape(), shape),
            };
            run.failure = Some(fail(idx, e));
            return run;
        }
        observer(SliceUpdate {
            index: idx,
            provenance,
            mask: &mask,
        });
        run.produced.push((idx, mask, started.elapsed()));
    }
    run
}
