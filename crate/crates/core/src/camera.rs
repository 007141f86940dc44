//! The fixed multi-view camera rig and pinhole projection.
//!
//! World frame is right-handed and Y-up. Azimuth 0 sits on +Z and grows
//! toward +X. Camera space is x right, y up, z toward the viewer. Pixel
//! coordinates are continuous with y growing downward; pixel `(i, j)` has
//! its center at `(i + 0.5, j + 0.5)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{deg_to_rad, Mat3, Vec3};

/// Points closer than this to the camera plane do not project.
pub const NEAR_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraRigSpec {
    pub distance: f64,
    pub fov_vertical_deg: f64,
    pub elevation_deg: f64,
    pub azimuths_deg: Vec<f64>,
    pub image_size: u32,
}

impl Default for CameraRigSpec {
    fn default() -> Self {
        CameraRigSpec {
            distance: 4.5,
            fov_vertical_deg: 30.0,
            elevation_deg: 5.0,
            azimuths_deg: vec![0.0, 90.0, 180.0, 270.0],
            image_size: 512,
        }
    }
}

impl CameraRigSpec {
    pub fn with_image_size(mut self, size: u32) -> Self {
        self.image_size = size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::InvalidRig(format!("distance {} must be positive", self.distance)));
        }
        if !(self.fov_vertical_deg > 0.0 && self.fov_vertical_deg < 180.0) {
            return Err(Error::InvalidRig(format!(
                "field of view {} outside (0, 180)",
                self.fov_vertical_deg
            )));
        }
        if !self.elevation_deg.is_finite() || self.elevation_deg.abs() >= 90.0 {
            return Err(Error::InvalidRig(format!(
                "elevation {} outside (-90, 90)",
                self.elevation_deg
            )));
        }
        if self.image_size == 0 {
            return Err(Error::InvalidRig("image size must be positive".into()));
        }
        if self.azimuths_deg.is_empty() {
            return Err(Error::InvalidRig("no azimuths".into()));
        }
        if let Some(a) = self.azimuths_deg.iter().find(|a| !(0.0..360.0).contains(*a)) {
            return Err(Error::InvalidRig(format!("azimuth {a} outside [0, 360)")));
        }
        Ok(())
    }

    /// Index of the front view (azimuth 0), or the first view when no
    /// azimuth is exactly 0.
    pub fn front_view(&self) -> usize {
        self.azimuths_deg.iter().position(|&a| a == 0.0).unwrap_or(0)
    }

    /// View indices sorted by azimuth (ties by index).
    pub fn azimuth_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.azimuths_deg.len()).collect();
        idx.sort_by(|&a, &b| {
            self.azimuths_deg[a]
                .total_cmp(&self.azimuths_deg[b])
                .then(a.cmp(&b))
        });
        idx
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    /// World-to-camera rotation; rows are the camera's right, up and back axes.
    pub rotation: Mat3,
    pub intrinsics: Intrinsics,
}

impl Camera {
    /// Camera at `position` looking at the world origin with +Y up.
    pub fn look_at_origin(position: Vec3, fov_vertical_deg: f64, size: usize) -> Result<Camera> {
        let back = position
            .try_normalize()
            .ok_or_else(|| Error::InvalidRig("camera at the origin".into()))?;
        let right = Vec3::Y
            .cross(back)
            .try_normalize()
            .ok_or_else(|| Error::InvalidRig("camera looks straight along the up axis".into()))?;
        let up = back.cross(right);
        let half = size as f64 / 2.0;
        Ok(Camera {
            position,
            rotation: Mat3::from_rows(right, up, back),
            intrinsics: Intrinsics {
                focal: half / libm::tan(deg_to_rad(fov_vertical_deg) / 2.0),
                cx: half,
                cy: half,
                width: size,
                height: size,
            },
        })
    }

    /// Same pose with intrinsics rescaled to a `size`×`size` image.
    pub fn resized(&self, size: usize) -> Camera {
        let s = size as f64 / self.intrinsics.width as f64;
        Camera {
            intrinsics: Intrinsics {
                focal: self.intrinsics.focal * s,
                cx: self.intrinsics.cx * s,
                cy: self.intrinsics.cy * s,
                width: size,
                height: size,
            },
            ..*self
        }
    }

    #[inline]
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p - self.position)
    }

    /// Distance along the viewing axis; positive in front of the camera.
    #[inline]
    pub fn depth(&self, p: Vec3) -> f64 {
        -self.to_camera(p).z
    }

    /// Continuous pixel coordinates of `p`, or `None` when `p` is at or
    /// behind the camera plane.
    #[inline]
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let c = self.to_camera(p);
        let depth = -c.z;
        if depth <= NEAR_EPSILON {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.cx + k.focal * c.x / depth, k.cy - k.focal * c.y / depth))
    }

    /// Unit direction from the camera center toward `p`.
    #[inline]
    pub fn view_dir(&self, p: Vec3) -> Vec3 {
        (p - self.position).try_normalize().unwrap_or(-self.rotation.rows[2])
    }

    pub fn to_camera_normal(&self, world_normal: Vec3) -> Result<Vec3> {
        let n = world_normal.try_normalize().ok_or(Error::ZeroNormal)?;
        Ok(self.rotation.mul_vec(n))
    }

    #[inline]
    pub fn to_world_normal(&self, camera_normal: Vec3) -> Vec3 {
        self.rotation.transpose_mul_vec(camera_normal)
    }
}

/// Point on a sphere of radius `distance` at the given azimuth and elevation.
pub fn spherical_position(azimuth_deg: f64, elevation_deg: f64, distance: f64) -> Vec3 {
    let (az, el) = (deg_to_rad(azimuth_deg), deg_to_rad(elevation_deg));
    Vec3::new(
        libm::cos(el) * libm::sin(az),
        libm::sin(el),
        libm::cos(el) * libm::cos(az),
    ) * distance
}

/// One camera per azimuth, in spec order.
pub fn build_rig(spec: &CameraRigSpec) -> Result<Vec<Camera>> {
    spec.validate()?;
    spec.azimuths_deg
        .iter()
        .map(|&az| {
            Camera::look_at_origin(
                spherical_position(az, spec.elevation_deg, spec.distance),
                spec.fov_vertical_deg,
                spec.image_size as usize,
            )
        })
        .collect()
}
