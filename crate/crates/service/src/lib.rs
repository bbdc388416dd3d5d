//! HTTP session service for interactive annotation, plus a loopback model
//! server implementing the propagation and 2D segmentation protocol.

pub mod api;
pub mod background;
pub mod error;
pub mod loopback;
pub mod session;

pub use api::{router, AppState, ServiceConfig};
pub use background::BackgroundServer;
