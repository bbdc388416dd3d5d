//! Minimal blocking JSON-over-HTTP client used by the remote backends.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::wire::ErrorBody;

const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("{0}")]
    Transport(String),
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("undecodable response: {0}")]
    Decode(String),
}

#[derive(Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    base: String,
}

impl JsonClient {
    /// `base` is the server root such as `http://127.0.0.1:8080`; every
    /// request is bounded by `timeout`.
    pub fn new(base: &str, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            base: base.trim_end_matches('/').to_string(),
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn post<B: Serialize, R: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<R, HttpError> {
        let resp = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body)
            .map_err(|e| HttpError::Transport(e.to_string()))?;
        Self::finish(resp)
    }

    pub fn get<R: DeserializeOwned>(&self, path: &str) -> Result<R, HttpError> {
        let resp = self
            .agent
            .get(format!("{}{path}", self.base))
            .call()
            .map_err(|e| HttpError::Transport(e.to_string()))?;
        Self::finish(resp)
    }

    fn finish<R: DeserializeOwned>(
        mut resp: ureq::http::Response<ureq::Body>,
    ) -> Result<R, HttpError> {
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_to_vec()
            .map_err(|e| HttpError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let message = serde_json::from_slice::<ErrorBody>(&bytes)
                .map(|b| b.message)
                .unwrap_or_else(|_| String::from_utf8_lossy(&bytes).into_owned());
            return Err(HttpError::Status { status, message });
        }
        serde_json::from_slice(&bytes).map_err(|e| HttpError::Decode(e.to_string()))
    }
}
