//! File formats, the diffusion backend client and the command-line front end
//! for 3D bundle images. Geometry and reconstruction live in
//! `bundle3d_core`.

pub mod bundle_io;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod fsutil;
pub mod mesh_io;
pub mod png;
pub mod report;

pub use error::{Error, Result};
