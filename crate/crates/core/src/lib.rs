//! Geometry, rasterization, reconstruction and evaluation for tiled
//! multi-view "bundle" images (four RGB views plus four normal maps).
//!
//! The crate is `no_std` + `alloc`. Enable `parallel` to spread per-row and
//! per-point work over rayon; results are bitwise identical either way.

#![no_std]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod bundle;
pub mod camera;
pub mod error;
pub mod geometry;
pub mod image;
pub mod math;
pub mod metrics;
pub mod raster;
pub mod recon;
pub mod schedule;
pub mod shapes;
pub mod texturing;

pub use error::{Error, Result};
pub use math::{Mat3, Vec3};
