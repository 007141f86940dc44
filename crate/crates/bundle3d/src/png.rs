//! PNG encode/decode for [`ImagePlane`].

use std::io::Cursor;
use std::path::Path;

use bundle3d_core::image::ImagePlane;
use image::{DynamicImage, ImageFormat, RgbImage, RgbaImage};

use crate::error::{Error, Result};
use crate::fsutil;

/// Decodes 8-bit RGB or RGBA; other color types are converted to RGBA.
pub fn decode_png(bytes: &[u8]) -> std::result::Result<ImagePlane, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = match img {
        DynamicImage::ImageRgb8(rgb) => ImagePlane::from_raw(w, h, 3, rgb.into_raw()),
        other => ImagePlane::from_raw(w, h, 4, other.into_rgba8().into_raw()),
    };
    plane.map_err(|e| e.to_string())
}

pub fn encode_png(img: &ImagePlane) -> Result<Vec<u8>> {
    let (w, h) = (img.width as u32, img.height as u32);
    let dynamic = match img.channels {
        3 => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, img.data.clone()).expect("buffer size")),
        4 => DynamicImage::ImageRgba8(RgbaImage::from_raw(w, h, img.data.clone()).expect("buffer size")),
        c => return Err(Error::InvalidArgument(format!("cannot encode {c}-channel image as PNG"))),
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::InvalidArgument(format!("PNG encoding failed: {e}")))?;
    Ok(out.into_inner())
}

pub fn read_png(path: &Path) -> Result<ImagePlane> {
    let bytes = fsutil::read(path)?;
    decode_png(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_png(img: &ImagePlane, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, &encode_png(img)?)
}
