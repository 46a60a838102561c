//! Synthetic paper ECG image generation.
//!
//! The crate turns multi-lead ECG time-series into images that look like
//! scanned or photographed paper records. Every image comes with a
//! ground-truth sidecar (pixel polylines, the applied transform, artifact
//! boxes, stage timings), and [`eval`] digitizes generated images back into
//! time-series so the generator can be checked end to end.
//!
//! Stage order is fixed: render, printed text, handwriting, creases,
//! wrinkles, perspective, imaging noise. See [`pipeline`].

pub mod crease;
pub mod ecg_io;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod noise;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod text;

pub use error::{Error, Result};
pub use raster::{RasterImage, Rgb};
