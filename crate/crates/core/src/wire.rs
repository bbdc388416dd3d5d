//! JSON messages of the propagation and 2D segmentation HTTP protocol.
//!
//! ```text
//! POST /v1/propagation              PropagationRequest -> StreamCreated
//! GET  /v1/propagation/{id}/next    -> NextMask (a mask, or {"done": true})
//! POST /v1/segment2d                Segment2dRequest -> Segment2dResponse
//! ```
//!
//! Frame pixels travel as base64 of raw row-major 8-bit values; masks as the
//! run-length encoding of [`crate::rle`].

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::{Frame, MaskSlice};
use crate::prompt::{BoxPrompt, Click};
use crate::rle::RleError;

pub const PROPAGATION_PATH: &str = "/v1/propagation";
pub const SEGMENT2D_PATH: &str = "/v1/segment2d";

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame {index}: pixels are not valid base64: {message}")]
    Base64 { index: usize, message: String },
    #[error("frame {index}: {actual} pixels for a {height}x{width} frame")]
    PixelCount {
        index: usize,
        height: usize,
        width: usize,
        actual: usize,
    },
    #[error("mask for frame {index}: {source}")]
    Mask { index: usize, source: RleError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: String,
}

impl WireFrame {
    pub fn encode(index: usize, frame: &Frame) -> Self {
        Self {
            index,
            width: frame.width(),
            height: frame.height(),
            pixels: STANDARD.encode(frame.as_slice()),
        }
    }

    pub fn decode(&self) -> Result<Frame, WireError> {
        let bytes = STANDARD
            .decode(&self.pixels)
            .map_err(|e| WireError::Base64 {
                index: self.index,
                message: e.to_string(),
            })?;
        let actual = bytes.len();
        Frame::from_vec(self.height, self.width, bytes).map_err(|_| WireError::PixelCount {
            index: self.index,
            height: self.height,
            width: self.width,
            actual,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMask {
    pub index: usize,
    pub mask_rle: Vec<u32>,
}

impl WireMask {
    pub fn encode(index: usize, mask: &MaskSlice) -> Self {
        Self {
            index,
            mask_rle: mask.to_rle(),
        }
    }

    pub fn decode(&self, height: usize, width: usize) -> Result<MaskSlice, WireError> {
        MaskSlice::from_rle(height, width, &self.mask_rle).map_err(|source| WireError::Mask {
            index: self.index,
            source,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationRequest {
    /// Frames in visit order; the first is the prompted frame.
    pub frames: Vec<WireFrame>,
    pub prompt: WireMask,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCreated {
    pub stream_id: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextMask {
    Mask(WireMask),
    Done { done: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment2dRequest {
    pub frame: WireFrame,
    #[serde(default)]
    pub clicks: Vec<Click>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxPrompt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rle: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment2dResponse {
    pub mask_rle: Vec<u32>,
}

/// Error body used by every HTTP endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}
