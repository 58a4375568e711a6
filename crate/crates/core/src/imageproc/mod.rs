//! Image pipeline: color variants, synthetic color sketches, canvas
//! normalization and augmentation.
//!
//! Every operation is a pure function of its input, parameters and seed.

pub mod augment;
pub mod canny;
pub mod canvas;
pub mod color;
pub mod kmeans;
pub mod resize;
pub mod sketch;
pub mod smooth;
pub mod variants;

pub use augment::{augment, AugmentConfig, AugmentDraw};
pub use canny::{detect_edges, EdgeMask};
pub use canvas::{normalize_canvas, CanvasKind, NormalizedCanvas};
pub use color::hue_shift;
pub use kmeans::flatten_colors;
pub use sketch::{synthesize_color_sketch, SketchSynthParams, SynthesizedSketch};
pub use smooth::{smooth_edge_preserving, SmoothingParams};
pub use variants::{make_variants, GrayVariantParams, VariantKind};
