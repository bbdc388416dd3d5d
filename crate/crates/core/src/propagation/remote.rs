use std::time::Duration;

use super::{Direction, IndexedFrame, PropagationError, Propagator};
use crate::http::{HttpError, JsonClient};
use crate::plane::MaskSlice;
use crate::wire::{
    NextMask, PropagationRequest, StreamCreated, WireFrame, WireMask, PROPAGATION_PATH,
};

pub const DEFAULT_STEP_TIMEOUT: Duration = Duration::from_secs(30);

/// Propagator backed by an HTTP model server.
///
/// `begin` opens a stream with all frames of the direction; each `step`
/// fetches one mask and checks that it is for the expected frame and has the
/// frame's shape. Any deviation ends the direction with an error naming the
/// frame.
pub struct RemotePropagator {
    client: JsonClient,
    stream: Option<String>,
    visits: Vec<usize>,
    shape: (usize, usize),
    next: usize,
    failed: bool,
}

impl RemotePropagator {
    /// `endpoint` is the server root; `step_timeout` bounds every request.
    pub fn new(endpoint: &str, step_timeout: Duration) -> Self {
        Self {
            client: JsonClient::new(endpoint, step_timeout),
            stream: None,
            visits: Vec::new(),
            shape: (0, 0),
            next: 0,
            failed: false,
        }
    }

    fn classify(index: usize, e: HttpError) -> PropagationError {
        match e {
            HttpError::Decode(message) => PropagationError::Protocol { index, message },
            other => PropagationError::Transport {
                index,
                message: other.to_string(),
            },
        }
    }

    fn fetch(&mut self) -> Result<MaskSlice, PropagationError> {
        let expected = self.visits[self.next];
        let id = self
            .stream
            .as_deref()
            .ok_or_else(|| PropagationError::Contract("step before begin".into()))?;
        let reply: NextMask = self
            .client
            .get(&format!("{PROPAGATION_PATH}/{id}/next"))
            .map_err(|e| Self::classify(expected, e))?;
        let wire = match reply {
            NextMask::Mask(m) => m,
            NextMask::Done { .. } => {
                return Err(PropagationError::Protocol {
                    index: expected,
                    message: format!(
                        "stream ended after {} of {} masks",
                        self.next - 1,
                        self.visits.len() - 1
                    ),
                })
            }
        };
        if wire.index != expected {
            return Err(PropagationError::Protocol {
                index: expected,
                message: format!(
                    "received mask for frame {}, expected frame {expected}",
                    wire.index
                ),
            });
        }
        wire.decode(self.shape.0, self.shape.1)
            .map_err(|e| PropagationError::Protocol {
                index: expected,
                message: e.to_string(),
            })
    }
}

impl Propagator for RemotePropagator {
    fn begin(
        &mut self,
        frames: &[IndexedFrame<'_>],
        prompt: &MaskSlice,
        direction: Direction,
    ) -> Result<(), PropagationError> {
        let first = frames
            .first()
            .ok_or_else(|| PropagationError::Contract("no frames to propagate through".into()))?;
        self.visits = frames.iter().map(|f| f.index).collect();
        self.shape = first.frame.shape();
        self.next = 1;
        self.failed = false;
        let req = PropagationRequest {
            frames: frames
                .iter()
                .map(|f| WireFrame::encode(f.index, f.frame))
                .collect(),
            prompt: WireMask::encode(first.index, prompt),
            direction,
        };
        let created: StreamCreated = self
            .client
            .post(PROPAGATION_PATH, &req)
            .map_err(|e| Self::classify(first.index, e))?;
        self.stream = Some(created.stream_id);
        Ok(())
    }

    fn step(&mut self) -> Option<Result<MaskSlice, PropagationError>> {
        if self.failed || self.next >= self.visits.len() {
            return None;
        }
        let out = self.fetch();
        if out.is_err() {
            self.failed = true;
        }
        self.next += 1;
        Some(out)
    }
}
