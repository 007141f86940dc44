//! 8-bit image planes and boolean masks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major interleaved 8-bit image with 3 (RGB) or 4 (RGBA) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImagePlane {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 3 || channels == 4, "channels must be 3 or 4");
        ImagePlane {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Self {
        let mut img = ImagePlane::new(width, height, pixel.len());
        for px in img.data.chunks_exact_mut(pixel.len()) {
            px.copy_from_slice(pixel);
        }
        img
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 3 && channels != 4 {
            return Err(Error::ImageMismatch(format!("{channels} channels")));
        }
        if data.len() != width * height * channels {
            return Err(Error::ImageMismatch(format!(
                "{} bytes for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(ImagePlane {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [u8] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let p = self.pixel(x, y);
        [p[0], p[1], p[2]]
    }

    /// Alpha of a pixel; 255 for RGB images.
    #[inline]
    pub fn alpha(&self, x: usize, y: usize) -> u8 {
        if self.channels == 4 {
            self.pixel(x, y)[3]
        } else {
            255
        }
    }

    pub fn same_size(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copies a `w`×`h` window starting at `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> ImagePlane {
        let mut out = ImagePlane::new(w, h, self.channels);
        let row = w * self.channels;
        for y in 0..h {
            let src = ((y0 + y) * self.width + x0) * self.channels;
            out.data[y * row..(y + 1) * row].copy_from_slice(&self.data[src..src + row]);
        }
        out
    }

    /// Writes `tile` with its top-left corner at `(x0, y0)`; channel counts must match.
    pub fn blit(&mut self, tile: &ImagePlane, x0: usize, y0: usize) {
        debug_assert_eq!(tile.channels, self.channels);
        let row = tile.width * self.channels;
        for y in 0..tile.height {
            let dst = ((y0 + y) * self.width + x0) * self.channels;
            self.data[dst..dst + row].copy_from_slice(&tile.data[y * row..(y + 1) * row]);
        }
    }

    pub fn to_rgba(&self) -> ImagePlane {
        if self.channels == 4 {
            return self.clone();
        }
        let mut out = ImagePlane::new(self.width, self.height, 4);
        for (d, s) in out.data.chunks_exact_mut(4).zip(self.data.chunks_exact(3)) {
            d[..3].copy_from_slice(s);
            d[3] = 255;
        }
        out
    }

    /// Alpha-composites over a solid background, yielding RGB.
    pub fn composite_over(&self, background: [u8; 3]) -> ImagePlane {
        let mut out = ImagePlane::new(self.width, self.height, 3);
        for (i, d) in out.data.chunks_exact_mut(3).enumerate() {
            let s = &self.data[i * self.channels..(i + 1) * self.channels];
            let a = if self.channels == 4 { s[3] as u32 } else { 255 };
            for c in 0..3 {
                let v = s[c] as u32 * a + background[c] as u32 * (255 - a);
                d[c] = ((v + 127) / 255) as u8;
            }
        }
        out
    }

    /// Coverage from the alpha channel (`alpha >= 128`); all-true for RGB.
    pub fn alpha_mask(&self) -> Mask {
        let mut m = Mask::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                m.set(x, y, self.alpha(x, y) >= 128);
            }
        }
        m
    }
}

/// Boolean coverage plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Pixels that differ between two equal-sized masks.
    pub fn disagreement(&self, other: &Mask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Chebyshev dilation by `radius` pixels.
    pub fn dilate(&self, radius: usize) -> Mask {
        let r = radius as i64;
        // Separable: rows then columns.
        let mut rows = Mask::new(self.width, self.height);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let hit = (-r..=r).any(|dx| self.get_signed(x + dx, y));
                rows.set(x as usize, y as usize, hit);
            }
        }
        let mut out = Mask::new(self.width, self.height);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let hit = (-r..=r).any(|dy| rows.get_signed(x, y + dy));
                out.set(x as usize, y as usize, hit);
            }
        }
        out
    }
}

/// Signed Euclidean distance to a mask's boundary, in pixels: positive
/// outside the mask, negative inside, zero halfway between a foreground and
/// a background pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DistanceField {
    pub fn from_mask(mask: &Mask) -> Self {
        let outside = squared_edt(mask, true);
        let inside = squared_edt(mask, false);
        let data = mask
            .data
            .iter()
            .zip(outside.iter().zip(&inside))
            .map(|(&m, (&o, &i))| {
                if m {
                    0.5 - libm::sqrt(i)
                } else {
                    libm::sqrt(o) - 0.5
                }
            })
            .collect();
        DistanceField {
            width: mask.width,
            height: mask.height,
            data,
        }
    }

    #[inline]
    fn at(&self, x: i64, y: i64) -> f64 {
        let cx = x.clamp(0, self.width as i64 - 1);
        let cy = y.clamp(0, self.height as i64 - 1);
        let d = self.data[cy as usize * self.width + cx as usize];
        let off = libm::sqrt(((x - cx) * (x - cx) + (y - cy) * (y - cy)) as f64);
        d + off
    }

    /// Bilinear sample at continuous pixel coordinates (centers at `i + 0.5`).
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (x - 0.5, y - 0.5);
        let (x0, y0) = (libm::floor(u), libm::floor(v));
        let (fx, fy) = (u - x0, v - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let top = self.at(x0, y0) * (1.0 - fx) + self.at(x0 + 1, y0) * fx;
        let bottom = self.at(x0, y0 + 1) * (1.0 - fx) + self.at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Squared distance from every pixel to the nearest pixel whose mask value
/// equals `target` (Felzenszwalb–Huttenlocher, two separable passes).
fn squared_edt(mask: &Mask, target: bool) -> Vec<f64> {
    let (w, h) = (mask.width, mask.height);
    let big = ((w * w + h * h) as f64) * 4.0 + 1.0;
    let mut grid: Vec<f64> = mask.data.iter().map(|&m| if m == target { 0.0 } else { big }).collect();
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        grid[y * w..(y + 1) * w].copy_from_slice(&d[..w]);
    }
    grid
}

fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola_cut = |p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
        let mut s = parabola_cut(v[k]);
        while s <= z[k] {
            k -= 1;
            s = parabola_cut(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *out = dq * dq + f[v[k]];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_field_matches_brute_force() {
        let mut m = Mask::new(23, 17);
        for y in 0..17 {
            for x in 0..23 {
                m.set(x, y, (x * 7 + y * 3) % 11 < 2 || (x > 8 && x < 15 && y > 4 && y < 12));
            }
        }
        let df = DistanceField::from_mask(&m);
        for y in 0..17i64 {
            for x in 0..23i64 {
                let here = m.get(x as usize, y as usize);
                let mut best = f64::INFINITY;
                for yy in 0..17i64 {
                    for xx in 0..23i64 {
                        if m.get(xx as usize, yy as usize) != here {
                            best = best.min((((x - xx).pow(2) + (y - yy).pow(2)) as f64).sqrt());
                        }
                    }
                }
                let expect = if here { 0.5 - best } else { best - 0.5 };
                assert!((df.data[(y * 23 + x) as usize] - expect).abs() < 1e-12, "{x},{y}");
            }
        }
        assert!((df.sample(10.5, 6.5) - df.data[6 * 23 + 10]).abs() < 1e-12);
    }

    #[test]
    fn crop_and_blit_round_trip() {
        let mut img = ImagePlane::new(8, 4, 4);
        for (i, b) in img.data.iter_mut().enumerate() {
            *b = (i * 7 % 251) as u8;
        }
        let tile = img.crop(4, 0, 4, 4);
        let mut other = ImagePlane::new(8, 4, 4);
        other.blit(&tile, 4, 0);
        assert_eq!(other.crop(4, 0, 4, 4), tile);
    }

    #[test]
    fn composite_over_white_keeps_opaque_pixels() {
        let mut img = ImagePlane::new(2, 1, 4);
        img.pixel_mut(0, 0).copy_from_slice(&[10, 20, 30, 255]);
        let rgb = img.composite_over([255, 255, 255]);
        assert_eq!(rgb.rgb(0, 0), [10, 20, 30]);
        assert_eq!(rgb.rgb(1, 0), [255, 255, 255]);
    }

    #[test]
    fn dilation_grows_by_radius() {
        let mut m = Mask::new(9, 9);
        m.set(4, 4, true);
        let d = m.dilate(2);
        assert_eq!(d.count(), 25);
        assert!(d.get(2, 6) && !d.get(1, 4));
    }
}
