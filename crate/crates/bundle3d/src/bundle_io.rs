//! Bundle PNG plus its `.meta.json` sidecar.

use std::path::{Path, PathBuf};

use bundle3d_core::bundle::{compose, decompose, BundleImage, BundleMeta};

use crate::error::{Error, Result};
use crate::{fsutil, png};

/// A bundle read from disk. `sidecar_missing` is set when no metadata file
/// was found and defaults were used instead.
#[derive(Debug, Clone)]
pub struct LoadedBundle {
    pub bundle: BundleImage,
    pub sidecar_missing: bool,
}

/// `dir/name.png` → `dir/name.meta.json`.
pub fn sidecar_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("meta.json")
}

pub fn meta_to_json(meta: &BundleMeta) -> String {
    serde_json::to_string_pretty(meta).expect("metadata serializes")
}

pub fn meta_from_json(text: &str, path: &Path) -> Result<BundleMeta> {
    let meta: BundleMeta = serde_json::from_str(text).map_err(|e| Error::format(path, e))?;
    meta.rig.validate().map_err(|e| Error::format(path, e))?;
    Ok(meta)
}

/// PNG bytes of the composed (RGBA) bundle.
pub fn encode_bundle(bundle: &BundleImage) -> Result<Vec<u8>> {
    png::encode_png(&compose(bundle)?)
}

/// Decodes PNG bytes with the given metadata. The rig's image size is taken
/// from the image itself.
pub fn decode_bundle(bytes: &[u8], meta: &BundleMeta) -> std::result::Result<BundleImage, String> {
    let flat = png::decode_png(bytes)?;
    let mut meta = meta.clone();
    meta.rig.image_size = (flat.height / 2) as u32;
    decompose(&flat, &meta).map_err(|e| e.to_string())
}

pub fn write_bundle(bundle: &BundleImage, path: &Path) -> Result<()> {
    let bytes = encode_bundle(bundle)?;
    fsutil::write_atomic(path, &bytes)?;
    fsutil::write_atomic(&sidecar_path(path), meta_to_json(&bundle.meta).as_bytes())
}

pub fn read_bundle(path: &Path) -> Result<LoadedBundle> {
    let bytes = fsutil::read(path)?;
    let side = sidecar_path(path);
    let (meta, sidecar_missing) = match std::fs::read_to_string(&side) {
        Ok(text) => (meta_from_json(&text, &side)?, false),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (BundleMeta::default(), true),
        Err(e) => return Err(Error::io(side, e)),
    };
    let flat = png::decode_png(&bytes).map_err(|e| Error::format(path, e))?;
    let mut meta = meta;
    meta.rig.image_size = (flat.height / 2) as u32;
    let bundle = decompose(&flat, &meta)?;
    Ok(LoadedBundle {
        bundle,
        sidecar_missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bundle3d_core::bundle::{render_bundle, NormalFrame};
    use bundle3d_core::camera::CameraRigSpec;
    use bundle3d_core::geometry::make_icosphere;

    fn sample() -> BundleImage {
        let mut b = render_bundle(
            &make_icosphere(2, 0.8).unwrap(),
            &CameraRigSpec::default().with_image_size(48),
        )
        .unwrap();
        b.meta.caption = "a grey ball — «quoted»".into();
        b.meta.seed = 42;
        b.meta.normal_frame = NormalFrame::World;
        b
    }

    #[test]
    fn write_read_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ball.png");
        let b = sample();
        write_bundle(&b, &p).unwrap();
        assert!(dir.path().join("ball.meta.json").exists());
        let back = read_bundle(&p).unwrap();
        assert!(!back.sidecar_missing);
        assert_eq!(back.bundle, b);
    }

    #[test]
    fn missing_sidecar_uses_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ball.png");
        write_bundle(&sample(), &p).unwrap();
        std::fs::remove_file(sidecar_path(&p)).unwrap();
        let back = read_bundle(&p).unwrap();
        assert!(back.sidecar_missing);
        assert_eq!(back.bundle.meta.caption, "");
        assert_eq!(back.bundle.meta.normal_frame, NormalFrame::Camera);
        assert_eq!(back.bundle.meta.rig.image_size, 48);
    }

    #[test]
    fn missing_png_is_reported() {
        assert!(matches!(read_bundle(Path::new("/nope/x.png")), Err(Error::MissingFile(_))));
    }
}
