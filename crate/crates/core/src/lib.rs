//! Data model and image-level machinery for color sketch-based retrieval.
//!
//! The crate covers three areas:
//!
//! - [`catalog`] and [`toy`]: photo catalogs, their line-delimited manifests
//!   and a procedural stand-in dataset of flat colored shapes.
//! - [`imageproc`]: color variants, synthetic color sketches, canvas
//!   normalization and training-time augmentation.
//! - [`colorfeat`]: quantized RGB histograms and the tf-idf color similarity
//!   used by the histogram-fusion baselines.

pub mod catalog;
pub mod colorfeat;
pub mod error;
pub mod imageproc;
pub mod raster;
pub mod seed;
pub mod toy;

pub use catalog::{Catalog, CatalogItem, ColorGroup, Origin};
pub use error::{Error, Result};
pub use raster::RasterImage;
pub use toy::{generate_toy_catalog, ToyConfig, ToyDataset};
