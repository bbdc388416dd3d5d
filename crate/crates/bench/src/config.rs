use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use slicewise_core::metrics::{Tolerance, DEFAULT_SALIENT_THRESHOLD};
use slicewise_core::prompt::{InteractiveSegmenter, ReferenceSegmenter, RemoteSegmenter};
use slicewise_core::propagation::{
    Propagator, ReferencePropagator, RemotePropagator, DEFAULT_STEP_TIMEOUT,
};

use crate::BenchError;

/// How the center slice gets its mask: `{"clicks": k}` or `"gt_mask"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Clicks(u32),
    GtMask,
}

impl PromptMode {
    pub fn label(&self) -> String {
        match self {
            PromptMode::Clicks(1) => "1 click".into(),
            PromptMode::Clicks(k) => format!("{k} clicks"),
            PromptMode::GtMask => "1 mask".into(),
        }
    }
}

/// `"reference"` or `{"remote": "http://host:port"}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Reference,
    Remote(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: PromptMode,
    #[serde(default)]
    pub propagator: Backend,
    #[serde(default)]
    pub segmenter_2d: Backend,
    #[serde(default = "yes")]
    pub salient_filter: bool,
    #[serde(default = "default_salient")]
    pub salient_threshold: usize,
    #[serde(default)]
    pub nsd_delta: Tolerance,
    /// Echoed into the report. The reference backends are deterministic and
    /// draw no random numbers.
    #[serde(default)]
    pub rng_seed: u64,
    /// Task name used to line the report up with baseline columns, such as
    /// `"spleen"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Per-request timeout for remote backends, in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_timeout_secs: Option<u64>,
}

fn yes() -> bool {
    true
}

fn default_salient() -> usize {
    DEFAULT_SALIENT_THRESHOLD
}

impl ExperimentConfig {
    pub fn new(mode: PromptMode) -> Self {
        Self {
            mode,
            propagator: Backend::Reference,
            segmenter_2d: Backend::Reference,
            salient_filter: true,
            salient_threshold: DEFAULT_SALIENT_THRESHOLD,
            nsd_delta: Tolerance::default(),
            rng_seed: 0,
            task: None,
            split: None,
            remote_timeout_secs: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.mode == PromptMode::Clicks(0) {
            return Err(BenchError::Config("clicks mode needs k >= 1".into()));
        }
        for b in [&self.propagator, &self.segmenter_2d] {
            if let Backend::Remote(url) = b {
                if !(url.starts_with("http://") || url.starts_with("https://")) {
                    return Err(BenchError::Config(format!(
                        "remote endpoint `{url}` is not an http(s) URL"
                    )));
                }
            }
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        self.remote_timeout_secs
            .map(Duration::from_secs)
            .unwrap_or(DEFAULT_STEP_TIMEOUT)
    }

    pub fn make_segmenter(&self) -> Box<dyn InteractiveSegmenter> {
        match &self.segmenter_2d {
            Backend::Reference => Box::new(ReferenceSegmenter::default()),
            Backend::Remote(url) => Box::new(RemoteSegmenter::new(url, self.timeout())),
        }
    }

    pub fn make_propagator(&self) -> Box<dyn Propagator> {
        match &self.propagator {
            Backend::Reference => Box::new(ReferencePropagator::default()),
            Backend::Remote(url) => Box::new(RemotePropagator::new(url, self.timeout())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_mode_spellings() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"mode":{"clicks":5}}"#).unwrap();
        assert_eq!(c.mode, PromptMode::Clicks(5));
        assert!(c.salient_filter);
        assert_eq!(c.salient_threshold, 256);
        assert_eq!(c.nsd_delta.mm(), 1.0);
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"mode":"gt_mask","propagator":{"remote":"http://127.0.0.1:9"},"nsd_delta":2.0}"#,
        )
        .unwrap();
        assert_eq!(c.mode, PromptMode::GtMask);
        assert_eq!(c.propagator, Backend::Remote("http://127.0.0.1:9".into()));
        assert_eq!(c.segmenter_2d, Backend::Reference);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::new(PromptMode::Clicks(0))
            .validate()
            .is_err());
        let mut c = ExperimentConfig::new(PromptMode::GtMask);
        c.segmenter_2d = Backend::Remote("localhost:80".into());
        assert!(c.validate().is_err());
        assert!(
            serde_json::from_str::<ExperimentConfig>(r#"{"mode":"gt_mask","nsd_delta":-1}"#)
                .is_err()
        );
    }

    #[test]
    fn mode_labels() {
        assert_eq!(PromptMode::Clicks(5).label(), "5 clicks");
        assert_eq!(PromptMode::GtMask.label(), "1 mask");
    }
}
