#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use slicewise_core::nifti::{save_mask, save_volume};
use slicewise_core::volume::{make_phantom, PhantomSpec};
use slicewise_core::{MaskVolume, Volume};
use slicewise_service::{router, AppState, BackgroundServer, ServiceConfig};

pub struct Client {
    agent: ureq::Agent,
    pub base: String,
}

pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

impl Client {
    pub fn new(base: String) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        Self {
            agent: ureq::Agent::new_with_config(config),
            base,
        }
    }

    fn finish(mut r: ureq::http::Response<ureq::Body>) -> Reply {
        let status = r.status().as_u16();
        let body = r
            .body_mut()
            .with_config()
            .limit(1 << 30)
            .read_to_vec()
            .unwrap();
        Reply { status, body }
    }

    pub fn get(&self, path: &str) -> Reply {
        Self::finish(
            self.agent
                .get(format!("{}{path}", self.base))
                .call()
                .unwrap(),
        )
    }

    pub fn post(&self, path: &str, body: &Value) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .send_json(body)
                .unwrap(),
        )
    }

    pub fn post_raw(&self, path: &str, body: &str) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .header("content-type", "application/json")
                .send(body)
                .unwrap(),
        )
    }

    pub fn post_empty(&self, path: &str) -> Reply {
        Self::finish(
            self.agent
                .post(format!("{}{path}", self.base))
                .send_empty()
                .unwrap(),
        )
    }

    pub fn delete(&self, path: &str) -> Reply {
        Self::finish(
            self.agent
                .delete(format!("{}{path}", self.base))
                .call()
                .unwrap(),
        )
    }
}

pub struct Harness {
    pub state: Arc<AppState>,
    pub server: BackgroundServer,
    pub client: Client,
}

pub fn start(config: ServiceConfig) -> Harness {
    let state = AppState::new(config);
    let server = BackgroundServer::start(router(state.clone()), 0).unwrap();
    let client = Client::new(server.url());
    Harness {
        state,
        server,
        client,
    }
}

pub fn phantom(dims: [usize; 3], seed: u64) -> (Volume, MaskVolume) {
    make_phantom(&PhantomSpec::centered(dims, seed)).unwrap()
}

/// Writes a phantom scan and label next to each other, returning their paths.
pub fn write_phantom(dir: &Path, name: &str, dims: [usize; 3], seed: u64) -> (PathBuf, PathBuf) {
    let (v, m) = phantom(dims, seed);
    let image = dir.join(format!("{name}_image.nii.gz"));
    let label = dir.join(format!("{name}_label.nii.gz"));
    save_volume(&v, &image).unwrap();
    save_mask(&m, &v, &label).unwrap();
    (image, label)
}

pub fn create(client: &Client, image: &Path, label: Option<&Path>) -> Value {
    let mut body = json!({ "volume_path": image });
    if let Some(l) = label {
        body["gt_path"] = json!(l);
    }
    let r = client.post("/sessions", &body);
    assert_eq!(r.status, 201, "{}", String::from_utf8_lossy(&r.body));
    r.json()
}

/// Polls progress until the job leaves `running`, checking that `done`
/// never decreases. Returns the final progress body.
pub fn wait_for_job(client: &Client, id: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(60);
    let mut last_done = 0;
    loop {
        let p = client.get(&format!("/sessions/{id}/progress")).json();
        let done = p["done"].as_u64().unwrap();
        assert!(
            done >= last_done,
            "progress went back from {last_done} to {done}"
        );
        last_done = done;
        if p["state"] != "running" {
            return p;
        }
        assert!(Instant::now() < deadline, "job did not finish");
        std::thread::sleep(Duration::from_millis(5));
    }
}

pub fn rle(v: &Value) -> Vec<u32> {
    serde_json::from_value(v.clone()).unwrap()
}
