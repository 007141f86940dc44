//! The `bundle3d` command line.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 I/O or format error, 4 backend
//! error, 5 reconstruction precondition failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use bundle3d_core::bundle::{render_bundle, replace_front_rgb, BundleImage};
use bundle3d_core::camera::{build_rig, CameraRigSpec};
use bundle3d_core::geometry::{normalize_to_cube, TriMesh};
use bundle3d_core::metrics::{evaluate_pair, MetricsConfig, ReferenceViews};
use bundle3d_core::recon::{reconstruct, InitMesh, ReconConfig, RefineTrace};
use bundle3d_core::schedule::{ControlSchedule, ControlType};
use bundle3d_core::texturing::{project_colors, TextureConfig};
use clap::{Args, Parser, Subcommand};

use crate::bundle_io::{self, read_bundle, write_bundle};
use crate::diffusion::{self, GenerationRequest, Mode, StubConfig, StubServer};
use crate::error::{Error, Result};
use crate::mesh_io::{load_mesh, save_mesh, MeshFormat};
use crate::{fsutil, png, report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;
pub const EXIT_RECON: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "bundle3d", version, about = "Render, generate, reconstruct and evaluate 3D bundle images")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize a mesh and render it into a bundle PNG (+ .meta.json).
    RenderBundle(RenderArgs),
    /// Reconstruct a textured mesh from a bundle PNG.
    Reconstruct(ReconstructArgs),
    /// Compare a generated mesh with a ground-truth mesh.
    Evaluate(EvaluateArgs),
    /// Text- or image-to-3D: obtain a bundle from the backend, then reconstruct.
    Pipeline(PipelineArgs),
    /// Re-render a mesh, enhance the bundle on the backend, and reconstruct.
    Enhance(EnhanceArgs),
    /// Run the stub backend serving fixture bundles.
    StubServer(StubServerArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Input mesh (.obj or .glb).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Output bundle PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Camera rig as inline JSON or a path to a JSON file.
    #[arg(long)]
    pub rig: Option<String>,
    /// Caption stored in the sidecar.
    #[arg(long, default_value = "")]
    pub caption: String,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Input bundle PNG (its .meta.json sidecar is read when present).
    #[arg(long)]
    pub bundle: PathBuf,
    /// Output mesh (.glb or .obj).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub recon: ReconOptions,
    /// Initial mesh: `sphere` or `coarse:PATH`.
    #[arg(long, default_value = "sphere", value_parser = parse_init)]
    pub init: InitArg,
}

#[derive(Debug, Clone, Args)]
pub struct ReconOptions {
    /// Refinement steps.
    #[arg(long, default_value_t = 50)]
    pub steps: u32,
    /// Write the refinement trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generated mesh.
    #[arg(long)]
    pub gen: PathBuf,
    /// Ground-truth mesh.
    #[arg(long)]
    pub gt: PathBuf,
    /// Reference views: a bundle PNG, or a directory with `rig.json` and
    /// `view_<k>.png` per azimuth.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Output report JSON.
    #[arg(long)]
    pub report: PathBuf,
    /// Points sampled per surface.
    #[arg(long, default_value_t = 16384)]
    pub samples: usize,
    /// F-score distance threshold.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub sampling_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BackendOptions {
    /// Backend base URL [env: BUNDLE_BACKEND_URL].
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// ControlNet schedule `type[:lambda1[:lambda2]]` (tile, normal, canny);
    /// repeatable. Omitted values take the type's defaults.
    #[arg(long = "control", value_parser = parse_control)]
    pub controls: Vec<ControlArg>,
    /// Diffusion steps T sent with each control schedule.
    #[arg(long, default_value_t = diffusion::DEFAULT_DIFFUSION_STEPS)]
    pub diffusion_steps: u32,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = diffusion::DEFAULT_TIMEOUT.as_secs_f64())]
    pub timeout: f64,
    /// Also save the backend's bundle PNG here.
    #[arg(long)]
    pub bundle_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["prompt", "image"])))]
pub struct PipelineArgs {
    /// Text prompt (text-to-3D).
    #[arg(long)]
    pub prompt: Option<String>,
    /// Input image (image-to-3D); needs --coarse-mesh.
    #[arg(long, requires = "coarse_mesh")]
    pub image: Option<PathBuf>,
    /// Coarse mesh standing in for a feed-forward reconstruction.
    #[arg(long)]
    pub coarse_mesh: Option<PathBuf>,
    /// Caption sent with an image request.
    #[arg(long, default_value = "")]
    pub caption: String,
    /// Tile size for rendering the coarse mesh in image mode.
    #[arg(long, default_value_t = 512)]
    pub tile_size: u32,
    /// Output mesh (.glb or .obj).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendOptions,
    #[command(flatten)]
    pub recon: ReconOptions,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    /// Mesh to enhance.
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value = "")]
    pub caption: String,
    /// Tile size for rendering the mesh.
    #[arg(long, default_value_t = 512)]
    pub tile_size: u32,
    /// Output mesh (.glb or .obj).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendOptions,
    #[command(flatten)]
    pub recon: ReconOptions,
}

#[derive(Debug, Args)]
pub struct StubServerArgs {
    /// Directory of fixture PNGs (`generate.png`, `generate_<seed>.png`).
    #[arg(long)]
    pub fixtures: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Answer every request with this HTTP status.
    #[arg(long)]
    pub fail_status: Option<u16>,
    /// Delay before each response, in milliseconds.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitArg {
    Sphere,
    Coarse(PathBuf),
}

pub fn parse_init(s: &str) -> std::result::Result<InitArg, String> {
    match s.split_once(':') {
        None if s == "sphere" => Ok(InitArg::Sphere),
        Some(("coarse", path)) if !path.is_empty() => Ok(InitArg::Coarse(PathBuf::from(path))),
        _ => Err(format!("expected `sphere` or `coarse:PATH`, got {s:?}")),
    }
}

/// A parsed `--control` value; missing strengths are filled from the
/// type's defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlArg {
    pub control_type: ControlType,
    pub strength: f64,
    pub active_fraction: f64,
}

impl ControlArg {
    pub fn defaults(control_type: ControlType) -> Self {
        let (strength, active_fraction) = control_type.defaults();
        ControlArg {
            control_type,
            strength,
            active_fraction,
        }
    }

    pub fn schedule(&self, total_steps: u32) -> Result<ControlSchedule> {
        ControlSchedule::new(self.control_type, self.strength, self.active_fraction, total_steps)
            .map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

pub fn parse_control(s: &str) -> std::result::Result<ControlArg, String> {
    let mut parts = s.split(':');
    let ty: ControlType = parts.next().unwrap_or("").parse().map_err(|e: bundle3d_core::Error| e.to_string())?;
    let mut arg = ControlArg::defaults(ty);
    let value = |name: &str, slot: &mut f64, part: Option<&str>| -> std::result::Result<(), String> {
        if let Some(p) = part {
            let v: f64 = p.parse().map_err(|_| format!("{name} {p:?} is not a number"))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} {v} outside [0, 1]"));
            }
            *slot = v;
        }
        Ok(())
    };
    value("lambda1", &mut arg.strength, parts.next())?;
    value("lambda2", &mut arg.active_fraction, parts.next())?;
    if parts.next().is_some() {
        return Err(format!("expected type[:lambda1[:lambda2]], got {s:?}"));
    }
    Ok(arg)
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> u8 {
    use bundle3d_core::Error as C;
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Io { .. } | Error::MissingFile(_) | Error::Format { .. } => EXIT_IO,
        e if e.is_backend() => EXIT_BACKEND,
        Error::Core(C::InvalidParameter(_) | C::InvalidSchedule(_) | C::InvalidRig(_)) => EXIT_USAGE,
        _ => EXIT_RECON,
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::RenderBundle(a) => cmd_render_bundle(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Enhance(a) => cmd_enhance(a),
        Command::StubServer(a) => cmd_stub_server(a),
    }
}

fn output_format(path: &Path) -> Result<MeshFormat> {
    MeshFormat::from_path(path).map_err(|_| {
        Error::InvalidArgument(format!("{}: output must end in .glb or .obj", path.display()))
    })
}

fn parse_rig(arg: &str) -> Result<CameraRigSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        let p = Path::new(arg);
        String::from_utf8(fsutil::read(p)?).map_err(|e| Error::format(p, e))?
    };
    let rig: CameraRigSpec =
        serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("bad rig JSON: {e}")))?;
    rig.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(rig)
}

fn normalized(mesh: &TriMesh) -> Result<TriMesh> {
    Ok(normalize_to_cube(mesh)?.0)
}

fn cmd_render_bundle(a: RenderArgs) -> Result<()> {
    let rig = match &a.rig {
        Some(r) => parse_rig(r)?,
        None => CameraRigSpec::default(),
    };
    let mesh = normalized(&load_mesh(&a.mesh)?)?;
    let mut bundle = render_bundle(&mesh, &rig)?;
    bundle.meta.caption = a.caption;
    write_bundle(&bundle, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Reconstructs and textures a mesh from `bundle`.
pub fn reconstruct_textured(bundle: &BundleImage, init: InitMesh, steps: u32) -> Result<(TriMesh, RefineTrace)> {
    let config = ReconConfig {
        steps,
        init,
        ..ReconConfig::default()
    };
    let (mesh, trace) = reconstruct(bundle, &config)?;
    let rig = bundle.meta.rig.clone().with_image_size(bundle.tile_size() as u32);
    let cameras = build_rig(&rig)?;
    let textured = project_colors(&mesh, bundle, &cameras, &TextureConfig::default())?;
    Ok((textured, trace))
}

fn finish_reconstruction(bundle: &BundleImage, init: InitMesh, opts: &ReconOptions, out: &Path) -> Result<()> {
    let format = output_format(out)?;
    let (mesh, trace) = reconstruct_textured(bundle, init, opts.steps)?;
    if let Some(last) = trace.checkpoints.last() {
        log::info!(
            "final residual {:.2} deg, {} vertices",
            last.mean_residual_deg,
            last.vertex_count
        );
    }
    save_mesh(&mesh, out, format)?;
    if let Some(t) = &opts.trace {
        report::write_trace(&trace, t)?;
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    output_format(&a.out)?;
    let loaded = read_bundle(&a.bundle)?;
    if loaded.sidecar_missing {
        log::warn!(
            "{}: no sidecar metadata, assuming the default rig and camera-frame normals",
            a.bundle.display()
        );
    }
    let init = match a.init {
        InitArg::Sphere => InitMesh::default(),
        InitArg::Coarse(p) => InitMesh::Coarse(load_mesh(&p)?),
    };
    finish_reconstruction(&loaded.bundle, init, &a.recon, &a.out)
}

fn load_views(path: &Path) -> Result<ReferenceViews> {
    if path.is_dir() {
        let rig_path = path.join("rig.json");
        let rig = parse_rig(&rig_path.to_string_lossy())?;
        let mut images = Vec::with_capacity(rig.azimuths_deg.len());
        for k in 0..rig.azimuths_deg.len() {
            images.push(png::read_png(&path.join(format!("view_{k}.png")))?);
        }
        let size = images[0].width;
        if images.iter().any(|i| i.width != size || i.height != size) {
            return Err(Error::format(path, "reference views must be square and equal-sized"));
        }
        let cameras = build_rig(&rig.with_image_size(size as u32))?;
        Ok(ReferenceViews { images, cameras })
    } else {
        let b = read_bundle(path)?.bundle;
        let cameras = build_rig(&b.meta.rig.clone().with_image_size(b.tile_size() as u32))?;
        Ok(ReferenceViews {
            images: b.rgb_tiles,
            cameras,
        })
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let config = MetricsConfig {
        sample_count: a.samples,
        fs_threshold: a.tau,
        sampling_seed: a.sampling_seed,
        ..MetricsConfig::default()
    };
    if config.sample_count == 0 || !(config.fs_threshold > 0.0) {
        return Err(Error::InvalidArgument("--samples and --tau must be positive".into()));
    }
    let gen = load_mesh(&a.gen)?;
    let gt = load_mesh(&a.gt)?;
    let views = a.views.as_deref().map(load_views).transpose()?;
    let mut r = evaluate_pair(&gen, &gt, views.as_ref(), &config)?;
    r.generated = a.gen.display().to_string();
    r.ground_truth = a.gt.display().to_string();
    report::write_report(&r, &a.report)?;
    println!("{}", report::summary_line(&r));
    Ok(())
}

fn schedules(opts: &BackendOptions, fallback: &[ControlType]) -> Result<Vec<ControlSchedule>> {
    let args: Vec<ControlArg> = if opts.controls.is_empty() {
        fallback.iter().map(|&t| ControlArg::defaults(t)).collect()
    } else {
        opts.controls.clone()
    };
    args.iter().map(|c| c.schedule(opts.diffusion_steps)).collect()
}

fn timeout(opts: &BackendOptions) -> Result<Duration> {
    Duration::try_from_secs_f64(opts.timeout)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Error::InvalidArgument(format!("bad --timeout {}", opts.timeout)))
}

/// Sends the request and decodes the returned bundle.
fn fetch_bundle(opts: &BackendOptions, req: &GenerationRequest, rig: &CameraRigSpec) -> Result<BundleImage> {
    let endpoint = diffusion::resolve_endpoint(opts.endpoint.as_deref())?;
    let bytes = diffusion::request_generation(&endpoint, req, timeout(opts)?)?;
    let meta = bundle3d_core::bundle::BundleMeta {
        caption: req.caption.clone(),
        seed: req.seed,
        rig: rig.clone(),
        ..Default::default()
    };
    bundle_io::decode_bundle(&bytes, &meta).map_err(Error::BadResponse)
}

fn save_bundle_copy(opts: &BackendOptions, bundle: &BundleImage) -> Result<()> {
    match &opts.bundle_out {
        Some(p) => write_bundle(bundle, p),
        None => Ok(()),
    }
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    output_format(&a.out)?;
    if let (Some(image), Some(coarse)) = (&a.image, &a.coarse_mesh) {
        let photo = png::read_png(image)?;
        let coarse = normalized(&load_mesh(coarse)?)?;
        let rig = CameraRigSpec::default().with_image_size(a.tile_size);
        let mut rendered = render_bundle(&coarse, &rig)?;
        rendered.meta.caption = a.caption.clone();
        rendered.meta.seed = a.backend.seed;
        let conditioned = replace_front_rgb(&rendered, &photo)?;
        let req = GenerationRequest {
            mode: Mode::Enhance,
            caption: a.caption,
            seed: a.backend.seed,
            bundle_png: Some(bundle_io::encode_bundle(&conditioned)?),
            controls: schedules(&a.backend, &[ControlType::Tile, ControlType::Normal])?,
        };
        let bundle = fetch_bundle(&a.backend, &req, &rig)?;
        save_bundle_copy(&a.backend, &bundle)?;
        finish_reconstruction(&bundle, InitMesh::Coarse(coarse), &a.recon, &a.out)
    } else {
        let prompt = a.prompt.unwrap_or_default();
        let req = GenerationRequest {
            mode: Mode::Generate,
            caption: prompt,
            seed: a.backend.seed,
            bundle_png: None,
            controls: schedules(&a.backend, &[])?,
        };
        let bundle = fetch_bundle(&a.backend, &req, &CameraRigSpec::default())?;
        save_bundle_copy(&a.backend, &bundle)?;
        finish_reconstruction(&bundle, InitMesh::default(), &a.recon, &a.out)
    }
}

fn cmd_enhance(a: EnhanceArgs) -> Result<()> {
    output_format(&a.out)?;
    let mesh = normalized(&load_mesh(&a.mesh)?)?;
    let rig = CameraRigSpec::default().with_image_size(a.tile_size);
    let mut rendered = render_bundle(&mesh, &rig)?;
    rendered.meta.caption = a.caption.clone();
    rendered.meta.seed = a.backend.seed;
    let req = GenerationRequest {
        mode: Mode::Enhance,
        caption: a.caption,
        seed: a.backend.seed,
        bundle_png: Some(bundle_io::encode_bundle(&rendered)?),
        controls: schedules(&a.backend, &[ControlType::Tile])?,
    };
    let bundle = fetch_bundle(&a.backend, &req, &rig)?;
    save_bundle_copy(&a.backend, &bundle)?;
    finish_reconstruction(&bundle, InitMesh::Coarse(mesh), &a.recon, &a.out)
}

fn cmd_stub_server(a: StubServerArgs) -> Result<()> {
    let mut config = StubConfig::from_dir(&a.fixtures)?;
    config.fail_status = a.fail_status;
    config.delay = Duration::from_millis(a.delay_ms);
    let server = StubServer::start(config, a.port)?;
    println!("stub backend listening on {}", server.url());
    server.wait();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn control_grammar() {
        let c = parse_control("tile").unwrap();
        assert_eq!((c.strength, c.active_fraction), (0.6, 0.3));
        let c = parse_control("canny").unwrap();
        assert_eq!((c.strength, c.active_fraction), (0.3, 0.5));
        let c = parse_control("normal:0.2").unwrap();
        assert_eq!((c.strength, c.active_fraction), (0.2, 0.3));
        let c = parse_control("tile:0.05:0.7").unwrap();
        assert_eq!((c.control_type, c.strength, c.active_fraction), (ControlType::Tile, 0.05, 0.7));
        for bad in ["", "depth", "tile:x", "tile:1.5", "tile:0.1:0.2:0.3", "tile:0.1:-1"] {
            assert!(parse_control(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn init_grammar() {
        assert_eq!(parse_init("sphere").unwrap(), InitArg::Sphere);
        assert_eq!(parse_init("coarse:a/b.obj").unwrap(), InitArg::Coarse("a/b.obj".into()));
        assert!(parse_init("coarse:").is_err());
        assert!(parse_init("cube").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::MissingFile("x".into())), EXIT_IO);
        assert_eq!(exit_code(&Error::Timeout), EXIT_BACKEND);
        assert_eq!(exit_code(&Error::BackendStatus { status: 500, excerpt: String::new() }), EXIT_BACKEND);
        assert_eq!(exit_code(&Error::Core(bundle3d_core::Error::AllBackground(String::new()))), EXIT_RECON);
        assert_eq!(exit_code(&Error::Core(bundle3d_core::Error::InvalidParameter("x".into()))), EXIT_USAGE);
    }
}
