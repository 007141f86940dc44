#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bundle3d::mesh_io::{save_mesh, MeshFormat};
use bundle3d::png::encode_png;
use bundle3d_core::bundle::{compose_flat_rgb, render_bundle, BundleImage};
use bundle3d_core::camera::CameraRigSpec;
use bundle3d_core::geometry::{compute_vertex_normals, normalize_to_cube, TriMesh};
use bundle3d_core::shapes::make_ellipsoid;
use bundle3d_core::Vec3;

/// Ground-truth ellipsoid, normalized, with normals and a uniform color.
pub fn ellipsoid() -> TriMesh {
    let m = make_ellipsoid(Vec3::new(1.0, 0.7, 0.55), 4).unwrap();
    let (m, _) = normalize_to_cube(&m).unwrap();
    compute_vertex_normals(&m).unwrap().with_uniform_color([0.8, 0.35, 0.2])
}

pub fn rig(size: u32) -> CameraRigSpec {
    CameraRigSpec::default().with_image_size(size)
}

pub fn ellipsoid_bundle(size: u32) -> BundleImage {
    render_bundle(&ellipsoid(), &rig(size)).unwrap()
}

/// Writes `gt.obj` plus the stub's canned replies: flattened RGB-only
/// bundles as a diffusion model would produce them.
pub fn write_fixtures(dir: &Path, size: u32) {
    save_mesh(&ellipsoid(), &dir.join("gt.obj"), MeshFormat::Obj).unwrap();
    let flat = encode_png(&compose_flat_rgb(&ellipsoid_bundle(size)).unwrap()).unwrap();
    std::fs::write(dir.join("generate.png"), &flat).unwrap();
    std::fs::write(dir.join("generate_7.png"), &flat).unwrap();
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bundle3d"));
    c.env_remove("BUNDLE_BACKEND_URL");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Sorted file names in `dir`.
pub fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

/// A loopback URL nothing is listening on.
pub fn dead_endpoint() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}")
}

pub fn path_buf(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
