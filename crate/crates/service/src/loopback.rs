//! In-process model server speaking the propagation and 2D segmentation
//! protocol, with optional fault injection. Stands in for a real model
//! backend in tests and offline runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bytes::Bytes;
use slicewise_core::plane::{Frame, MaskSlice};
use slicewise_core::prompt::{InteractiveSegmenter, ReferenceSegmenter, SegmenterInput};
use slicewise_core::propagation::{
    IdentityPropagator, IndexedFrame, Propagator, ReferencePropagator,
};
use slicewise_core::wire::{
    NextMask, PropagationRequest, Segment2dRequest, Segment2dResponse, StreamCreated, WireMask,
    PROPAGATION_PATH, SEGMENT2D_PATH,
};

use crate::error::{ApiError, ApiJson};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Every frame gets the prompt mask.
    Identity,
    /// The reference intensity-tracking propagator.
    Reference,
}

/// Misbehavior triggered when the server is asked for the mask of frame
/// `index` (the frame's slice index, in either direction).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// Abort the connection mid-response.
    DropAt(usize),
    /// Answer with a mask one row too short.
    WrongShapeAt(usize),
    /// Label the mask with a different frame index.
    WrongIndexAt(usize),
    /// Claim the stream is finished.
    EarlyDoneAt(usize),
}

impl Fault {
    fn index(&self) -> usize {
        match *self {
            Fault::DropAt(i)
            | Fault::WrongShapeAt(i)
            | Fault::WrongIndexAt(i)
            | Fault::EarlyDoneAt(i) => i,
        }
    }
}

struct Stream {
    masks: Vec<WireMask>,
    shape: (usize, usize),
    next: usize,
}

struct Loopback {
    rule: Rule,
    fault: Option<Fault>,
    next_id: AtomicU64,
    streams: Mutex<HashMap<String, Stream>>,
}

pub fn router(rule: Rule, fault: Option<Fault>) -> Router {
    let state = Arc::new(Loopback {
        rule,
        fault,
        next_id: AtomicU64::new(1),
        streams: Mutex::new(HashMap::new()),
    });
    Router::new()
        .route(PROPAGATION_PATH, post(open_stream))
        .route(&format!("{PROPAGATION_PATH}/{{id}}/next"), get(next_mask))
        .route(SEGMENT2D_PATH, post(segment2d))
        .with_state(state)
}

fn decode_frames(req: &PropagationRequest) -> Result<Vec<Frame>, ApiError> {
    if req.frames.is_empty() {
        return Err(ApiError::bad_request("no frames").with_field("frames"));
    }
    let frames = req
        .frames
        .iter()
        .map(|f| f.decode())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field("frames"))?;
    let shape = frames[0].shape();
    if frames.iter().any(|f| f.shape() != shape) {
        return Err(ApiError::bad_request("frames differ in shape").with_field("frames"));
    }
    Ok(frames)
}

async fn open_stream(
    State(lb): State<Arc<Loopback>>,
    ApiJson(req): ApiJson<PropagationRequest>,
) -> Result<Json<StreamCreated>, ApiError> {
    let frames = decode_frames(&req)?;
    let (h, w) = frames[0].shape();
    if req.prompt.index != req.frames[0].index {
        return Err(
            ApiError::bad_request("prompt must be for the first frame").with_field("prompt.index")
        );
    }
    let prompt = req
        .prompt
        .decode(h, w)
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field("prompt.mask_rle"))?;
    let indexed: Vec<IndexedFrame<'_>> = req
        .frames
        .iter()
        .zip(&frames)
        .map(|(wf, frame)| IndexedFrame {
            index: wf.index,
            frame,
        })
        .collect();
    let mut prop: Box<dyn Propagator> = match lb.rule {
        Rule::Identity => Box::new(IdentityPropagator::default()),
        Rule::Reference => Box::new(ReferencePropagator::default()),
    };
    prop.begin(&indexed, &prompt, req.direction)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    let mut masks = Vec::with_capacity(frames.len() - 1);
    for wf in &req.frames[1..] {
        match prop.step() {
            Some(Ok(m)) => masks.push(WireMask::encode(wf.index, &m)),
            Some(Err(e)) => return Err(ApiError::internal(e.to_string())),
            None => break,
        }
    }
    let id = format!("s{}", lb.next_id.fetch_add(1, Ordering::Relaxed));
    lb.streams.lock().unwrap().insert(
        id.clone(),
        Stream {
            masks,
            shape: (h, w),
            next: 0,
        },
    );
    Ok(Json(StreamCreated { stream_id: id }))
}

async fn next_mask(State(lb): State<Arc<Loopback>>, Path(id): Path<String>) -> Response {
    let mut streams = lb.streams.lock().unwrap();
    let Some(stream) = streams.get_mut(&id) else {
        return ApiError::not_found(format!("no stream `{id}`")).into_response();
    };
    let Some(mask) = stream.masks.get(stream.next).cloned() else {
        streams.remove(&id);
        return Json(NextMask::Done { done: true }).into_response();
    };
    stream.next += 1;
    let (h, w) = stream.shape;
    match lb.fault.filter(|f| f.index() == mask.index) {
        None => Json(NextMask::Mask(mask)).into_response(),
        Some(Fault::DropAt(_)) => {
            // headers go out, then the body errors and the connection is cut
            let body = futures_util::stream::once(async {
                Err::<Bytes, std::io::Error>(std::io::Error::other("injected connection drop"))
            });
            Response::builder()
                .status(StatusCode::OK)
                .header("content-type", "application/json")
                .body(Body::from_stream(body))
                .expect("static response")
        }
        Some(Fault::WrongShapeAt(_)) => {
            let short = MaskSlice::new(h.saturating_sub(1), w);
            Json(NextMask::Mask(WireMask::encode(mask.index, &short))).into_response()
        }
        Some(Fault::WrongIndexAt(_)) => Json(NextMask::Mask(WireMask {
            index: mask.index + 1000,
            mask_rle: mask.mask_rle,
        }))
        .into_response(),
        Some(Fault::EarlyDoneAt(_)) => Json(NextMask::Done { done: true }).into_response(),
    }
}

async fn segment2d(
    ApiJson(req): ApiJson<Segment2dRequest>,
) -> Result<Json<Segment2dResponse>, ApiError> {
    let frame = req
        .frame
        .decode()
        .map_err(|e| ApiError::bad_request(e.to_string()).with_field("frame"))?;
    let (h, w) = frame.shape();
    let base = match &req.mask_rle {
        Some(rle) => Some(
            MaskSlice::from_rle(h, w, rle)
                .map_err(|e| ApiError::bad_request(e.to_string()).with_field("mask_rle"))?,
        ),
        None => None,
    };
    for c in &req.clicks {
        if c.row >= h || c.col >= w {
            return Err(ApiError::bad_request(format!(
                "click ({}, {}) outside {h}x{w}",
                c.row, c.col
            ))
            .with_field("clicks"));
        }
    }
    let input = SegmenterInput {
        clicks: &req.clicks,
        bbox: req.bbox,
        mask: base.as_ref(),
    };
    let mask = ReferenceSegmenter::default()
        .predict(&frame, &input)
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(Json(Segment2dResponse {
        mask_rle: mask.to_rle(),
    }))
}
