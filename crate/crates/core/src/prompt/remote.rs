use std::time::Duration;

use super::{InteractiveSegmenter, SegmenterError, SegmenterInput};
use crate::http::{HttpError, JsonClient};
use crate::plane::{Frame, MaskSlice};
use crate::wire::{Segment2dRequest, Segment2dResponse, WireFrame, SEGMENT2D_PATH};

/// 2D segmenter served over HTTP (`POST /v1/segment2d`).
pub struct RemoteSegmenter {
    client: JsonClient,
}

impl RemoteSegmenter {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self {
            client: JsonClient::new(endpoint, timeout),
        }
    }
}

impl InteractiveSegmenter for RemoteSegmenter {
    fn predict(
        &mut self,
        frame: &Frame,
        input: &SegmenterInput<'_>,
    ) -> Result<MaskSlice, SegmenterError> {
        let req = Segment2dRequest {
            frame: WireFrame::encode(0, frame),
            clicks: input.clicks.to_vec(),
            bbox: input.bbox,
            mask_rle: input.mask.map(|m| m.to_rle()),
        };
        let resp: Segment2dResponse =
            self.client
                .post(SEGMENT2D_PATH, &req)
                .map_err(|e| match e {
                    HttpError::Decode(m) => SegmenterError::Protocol(m),
                    other => SegmenterError::Transport(other.to_string()),
                })?;
        MaskSlice::from_rle(frame.height(), frame.width(), &resp.mask_rle)
            .map_err(|e| SegmenterError::Protocol(format!("returned mask: {e}")))
    }
}
