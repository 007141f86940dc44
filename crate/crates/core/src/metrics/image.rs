//! PSNR and SSIM on 8-bit images scaled to `[0, 1]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::ImagePlane;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_dims(a: &ImagePlane, b: &ImagePlane) -> Result<()> {
    if a.same_size(b) {
        Ok(())
    } else {
        Err(Error::ImageMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )))
    }
}

/// PSNR over the RGB channels, capped at `cap` dB.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, cap: f64) -> Result<f64> {
    check_dims(a, b)?;
    let mut sum = 0.0;
    for y in 0..a.height {
        for x in 0..a.width {
            let (pa, pb) = (a.rgb(x, y), b.rgb(x, y));
            for c in 0..3 {
                let d = (pa[c] as f64 - pb[c] as f64) / 255.0;
                sum += d * d;
            }
        }
    }
    let n = (a.width * a.height * 3) as f64;
    if n == 0.0 {
        return Err(Error::ImageMismatch("empty image".into()));
    }
    let mse = sum / n;
    if mse == 0.0 {
        return Ok(cap);
    }
    Ok((10.0 * libm::log10(1.0 / mse)).min(cap))
}

/// Rec.601 luma on `[0, 1]`.
fn luma(img: &ImagePlane) -> Vec<f64> {
    (0..img.height)
        .flat_map(|y| (0..img.width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let p = img.rgb(x, y);
            (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0
        })
        .collect()
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable "valid" filtering: output is `(w - 10) × (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * src[y * w + x + i];
            }
            rows[y * ow + x] = s;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean SSIM over all fully-contained 11×11 Gaussian windows of the luma.
pub fn ssim(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = (a.width, a.height);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageMismatch(format!(
            "{w}x{h} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let k = gaussian_kernel();
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let sxx = filter_valid(&xx, w, h, &k);
    let syy = filter_valid(&yy, w, h, &k);
    let sxy = filter_valid(&xy, w, h, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        let num = (2.0 * ux * uy + c1) * (2.0 * cov + c2);
        let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / mx.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(v: u8) -> ImagePlane {
        ImagePlane::filled(32, 32, &[v, v, v])
    }

    #[test]
    fn identical_images_hit_the_caps() {
        let mut img = ImagePlane::new(32, 24, 3);
        for (i, b) in img.data.iter_mut().enumerate() {
            *b = (i * 31 % 256) as u8;
        }
        assert_eq!(psnr(&img, &img, 99.0).unwrap(), 99.0);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn black_versus_white_is_zero_db() {
        assert_eq!(psnr(&uniform(0), &uniform(255), 99.0).unwrap(), 0.0);
    }

    #[test]
    fn ten_level_offset() {
        let expect = 20.0 * libm::log10(255.0) - 10.0 * libm::log10(100.0);
        let got = psnr(&uniform(100), &uniform(110), 99.0).unwrap();
        assert!((got - expect).abs() < 1e-9);
        assert!((got - 28.13).abs() < 0.01);
    }

    #[test]
    fn ssim_drops_with_noise() {
        let a = uniform(128);
        let mut b = a.clone();
        for (i, v) in b.data.iter_mut().enumerate() {
            *v = if (i / 3) % 2 == 0 { 100 } else { 156 };
        }
        let s = ssim(&a, &b).unwrap();
        assert!(s < 0.5 && s >= -1.0);
    }

    #[test]
    fn size_errors() {
        assert!(psnr(&uniform(1), &ImagePlane::new(8, 8, 3), 99.0).is_err());
        let tiny = ImagePlane::new(8, 8, 3);
        assert!(ssim(&tiny, &tiny).is_err());
    }
}
