//! Non-neural core of a selfie-to-neutral-pose portrait pipeline.
//!
//! The pipeline aligns a dense-pose (IUV) map and its image on a fixed
//! canvas, retrieves the nearest neutral poses, moves pixels through a UV
//! body atlas, completes the atlas coordinates and composites the warped body
//! over a hole-filled background.

pub mod align;
pub mod atlas;
pub mod compose;
pub mod config;
pub mod error;
pub mod index;
pub mod inpaint;
pub mod io;
pub mod iuv;
pub mod pipeline;
pub mod provenance;
pub mod raster;
pub mod search;
pub mod synth;
pub mod synthetic;
pub mod warp;

pub use error::{Error, Result};
