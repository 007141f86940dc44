//! Client for a remote bundle-image diffusion backend, and a serial stub
//! server standing in for it in tests.
//!
//! Wire format: `POST {endpoint}/generate` or `/enhance` with a JSON body
//! `{mode, caption, seed, bundle_png?, controls: [{type, lambda1, lambda2,
//! total_steps}]}` (PNG bytes base64-encoded); the reply is a bundle PNG.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use bundle3d_core::bundle::BundleMeta;
use bundle3d_core::image::ImagePlane;
use bundle3d_core::schedule::{ControlSchedule, ControlType};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{bundle_io, png};

pub const ENDPOINT_ENV: &str = "BUNDLE_BACKEND_URL";
/// Default number of diffusion steps sent with control schedules.
pub const DEFAULT_DIFFUSION_STEPS: u32 = 30;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);
const EXCERPT_LEN: usize = 200;
const MAX_RESPONSE_BYTES: u64 = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Generate,
    Enhance,
}

impl Mode {
    pub fn path(self) -> &'static str {
        match self {
            Mode::Generate => "/generate",
            Mode::Enhance => "/enhance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub mode: Mode,
    pub caption: String,
    pub seed: u64,
    pub bundle_png: Option<Vec<u8>>,
    pub controls: Vec<ControlSchedule>,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Enhance && self.bundle_png.is_none() {
            return Err(Error::InvalidArgument("enhance requests need an input bundle".into()));
        }
        for c in &self.controls {
            c.validate()?;
        }
        Ok(())
    }

    pub fn to_wire(&self) -> WireRequest {
        WireRequest {
            mode: self.mode,
            caption: self.caption.clone(),
            seed: self.seed,
            bundle_png: self.bundle_png.as_ref().map(|b| BASE64.encode(b)),
            controls: self.controls.iter().map(WireControl::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireControl {
    #[serde(rename = "type")]
    pub control_type: ControlType,
    pub lambda1: f64,
    pub lambda2: f64,
    pub total_steps: u32,
}

impl From<&ControlSchedule> for WireControl {
    fn from(c: &ControlSchedule) -> Self {
        WireControl {
            control_type: c.control_type,
            lambda1: c.strength,
            lambda2: c.active_fraction,
            total_steps: c.total_steps,
        }
    }
}

impl WireControl {
    pub fn to_schedule(&self) -> Result<ControlSchedule> {
        Ok(ControlSchedule::new(self.control_type, self.lambda1, self.lambda2, self.total_steps)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub mode: Mode,
    pub caption: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_png: Option<String>,
    #[serde(default)]
    pub controls: Vec<WireControl>,
}

fn excerpt(body: &[u8]) -> String {
    let text = String::from_utf8_lossy(body);
    let mut s: String = text.chars().take(EXCERPT_LEN).collect();
    if text.chars().count() > EXCERPT_LEN {
        s.push('…');
    }
    s
}

fn map_ureq(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Timeout(_) => Error::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => Error::Timeout,
        other => Error::Transport(other.to_string()),
    }
}

/// Sends `req` and returns the bundle PNG bytes. The reply must decompose
/// as a bundle with the default rig layout.
pub fn request_generation(endpoint: &str, req: &GenerationRequest, timeout: Duration) -> Result<Vec<u8>> {
    req.validate()?;
    let url = format!("{}{}", endpoint.trim_end_matches('/'), req.mode.path());
    let body = serde_json::to_vec(&req.to_wire()).expect("request serializes");
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();
    log::info!("POST {url}");
    let mut resp = agent
        .post(&url)
        .header("content-type", "application/json")
        .send(&body[..])
        .map_err(map_ureq)?;
    let status = resp.status().as_u16();
    let bytes = resp
        .body_mut()
        .with_config()
        .limit(MAX_RESPONSE_BYTES)
        .read_to_vec()
        .map_err(map_ureq)?;
    if status != 200 {
        return Err(Error::BackendStatus {
            status,
            excerpt: excerpt(&bytes),
        });
    }
    let meta = BundleMeta {
        caption: req.caption.clone(),
        seed: req.seed,
        ..BundleMeta::default()
    };
    bundle_io::decode_bundle(&bytes, &meta).map_err(Error::BadResponse)?;
    Ok(bytes)
}

/// Endpoint from the flag, else from `BUNDLE_BACKEND_URL`.
pub fn resolve_endpoint(flag: Option<&str>) -> Result<String> {
    match flag {
        Some(e) => Ok(e.to_string()),
        None => std::env::var(ENDPOINT_ENV)
            .map_err(|_| Error::InvalidArgument(format!("no endpoint given and {ENDPOINT_ENV} is unset"))),
    }
}

/// What the stub saw for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub mode: Mode,
    pub caption: String,
    pub seed: u64,
    pub controls: Vec<ControlSchedule>,
}

#[derive(Debug, Clone, Default)]
pub struct StubConfig {
    /// Fixture PNGs by file name: `generate_{seed}.png`, falling back to
    /// `generate.png`.
    pub fixtures: BTreeMap<String, Vec<u8>>,
    /// Answer every request with this status instead.
    pub fail_status: Option<u16>,
    /// Sleep before answering.
    pub delay: Duration,
}

impl StubConfig {
    /// Loads every `*.png` in `dir` as a fixture.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut fixtures = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().is_some_and(|e| e == "png") {
                let name = path.file_name().unwrap().to_string_lossy().into_owned();
                fixtures.insert(name, crate::fsutil::read(&path)?);
            }
        }
        Ok(StubConfig {
            fixtures,
            ..Default::default()
        })
    }
}

/// In-process stand-in backend. Requests are handled one at a time on a
/// background thread; the server stops when dropped.
pub struct StubServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    records: Arc<Mutex<Vec<RecordedRequest>>>,
    thread: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds `127.0.0.1:port` (0 picks a free port).
    pub fn start(config: StubConfig, port: u16) -> Result<Self> {
        let server = tiny_http::Server::http(("127.0.0.1", port))
            .map_err(|e| Error::Transport(format!("cannot bind stub server: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| Error::Transport("stub server has no IP address".into()))?;
        let server = Arc::new(server);
        let records = Arc::new(Mutex::new(Vec::new()));
        let thread = {
            let server = Arc::clone(&server);
            let records = Arc::clone(&records);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = Vec::new();
                    let _ = request.as_reader().read_to_end(&mut body);
                    let (status, payload, png) = handle(&config, request.url(), &body, &records);
                    if !config.delay.is_zero() {
                        std::thread::sleep(config.delay);
                    }
                    let content_type = if png { "image/png" } else { "text/plain; charset=utf-8" };
                    let header = tiny_http::Header::from_bytes("Content-Type", content_type).expect("valid header");
                    let response = tiny_http::Response::from_data(payload)
                        .with_status_code(status)
                        .with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Ok(StubServer {
            addr,
            server,
            records,
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.records.lock().expect("stub records").clone()
    }

    /// Blocks until the process is killed.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}


fn handle(
    config: &StubConfig,
    url: &str,
    body: &[u8],
    records: &Mutex<Vec<RecordedRequest>>,
) -> (u16, Vec<u8>, bool) {
    let text = |status: u16, msg: String| (status, msg.into_bytes(), false);
    if let Some(status) = config.fail_status {
        return text(status, format!("stub configured to fail with status {status}"));
    }
    let mode = match url {
        "/generate" => Mode::Generate,
        "/enhance" => Mode::Enhance,
        other => return text(404, format!("no such endpoint {other}")),
    };
    let wire: WireRequest = match serde_json::from_slice(body) {
        Ok(w) => w,
        Err(e) => return text(400, format!("bad request JSON: {e}")),
    };
    if wire.mode != mode {
        return text(400, format!("mode {:?} sent to {url}", wire.mode));
    }
    let controls: std::result::Result<Vec<_>, _> = wire.controls.iter().map(WireControl::to_schedule).collect();
    let controls = match controls {
        Ok(c) => c,
        Err(e) => return text(400, e.to_string()),
    };
    records.lock().expect("stub records").push(RecordedRequest {
        mode,
        caption: wire.caption.clone(),
        seed: wire.seed,
        controls,
    });
    match mode {
        Mode::Generate => {
            let named = config.fixtures.get(&format!("generate_{}.png", wire.seed));
            match named.or_else(|| config.fixtures.get("generate.png")) {
                Some(png) => (200, png.clone(), true),
                None => text(404, format!("no fixture for seed {}", wire.seed)),
            }
        }
        Mode::Enhance => {
            let Some(b64) = wire.bundle_png else {
                return text(400, "enhance request without bundle_png".into());
            };
            let bytes = match BASE64.decode(b64) {
                Ok(b) => b,
                Err(e) => return text(400, format!("bad base64: {e}")),
            };
            match png::decode_png(&bytes) {
                Ok(mut img) => {
                    perturb_rgb_row(&mut img, wire.seed);
                    match png::encode_png(&img) {
                        Ok(out) => (200, out, true),
                        Err(e) => text(500, e.to_string()),
                    }
                }
                Err(e) => text(400, format!("bad bundle PNG: {e}")),
            }
        }
    }
}

/// Adds seeded per-channel noise in `[-2, 2]` (of 255) to the color
/// channels of the top (RGB) tile row. The normal row and alpha are left
/// untouched.
pub fn perturb_rgb_row(img: &mut ImagePlane, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = img.channels;
    let row_bytes = img.width * c;
    for px in img.data[..row_bytes * (img.height / 2)].chunks_exact_mut(c) {
        for v in &mut px[..3.min(c)] {
            let delta = (rng.next_u32() % 5) as i32 - 2;
            *v = (*v as i32 + delta).clamp(0, 255) as u8;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format_field_names() {
        let req = GenerationRequest {
            mode: Mode::Enhance,
            caption: "a mug".into(),
            seed: 3,
            bundle_png: Some(vec![1, 2, 3]),
            controls: vec![ControlSchedule::new(ControlType::Tile, 0.6, 0.3, 30).unwrap()],
        };
        let v = serde_json::to_value(req.to_wire()).unwrap();
        assert_eq!(v["mode"], "enhance");
        assert_eq!(v["bundle_png"], "AQID");
        assert_eq!(v["controls"][0]["type"], "tile");
        assert_eq!(v["controls"][0]["lambda1"], 0.6);
        assert_eq!(v["controls"][0]["total_steps"], 30);
    }

    #[test]
    fn enhance_needs_bundle() {
        let req = GenerationRequest {
            mode: Mode::Enhance,
            caption: String::new(),
            seed: 0,
            bundle_png: None,
            controls: vec![],
        };
        assert!(matches!(req.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn perturbation_is_bounded_and_confined_to_top_row() {
        let mut img = ImagePlane::filled(8, 4, &[100, 100, 100, 255]);
        let orig = img.clone();
        perturb_rgb_row(&mut img, 5);
        let mut again = orig.clone();
        perturb_rgb_row(&mut again, 5);
        assert_eq!(img, again);
        for y in 0..4 {
            for x in 0..8 {
                let (a, b) = (img.pixel(x, y), orig.pixel(x, y));
                assert_eq!(a[3], b[3]);
                for k in 0..3 {
                    let d = (a[k] as i32 - b[k] as i32).abs();
                    if y >= 2 {
                        assert_eq!(d, 0);
                    } else {
                        assert!(d <= 2);
                    }
                }
            }
        }
        assert_ne!(img, orig);
    }

    #[test]
    fn excerpt_is_truncated() {
        let long = vec![b'x'; 1000];
        assert_eq!(excerpt(&long).chars().count(), EXCERPT_LEN + 1);
    }
}
