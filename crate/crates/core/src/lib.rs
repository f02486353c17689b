//! Top-down coarse-to-fine segmentation of grayscale images.
//!
//! The input is shrunk into a pyramid of 2x2 block averages; the small top
//! level is segmented by region growing, and the label map is carried back
//! down level by level, refining border pixels and spawning regions that only
//! become visible at finer scales. Every region at every level is recorded in
//! an [`ObjectRegistry`], which a [`KnowledgeBase`] of externally authored
//! object templates can then annotate.

pub mod cli;
pub mod config;
pub mod density;
pub mod image;
pub mod knowledge;
pub mod pgm;
pub mod pipeline;
pub mod pyramid;
pub mod registry;
pub mod segment;

pub use config::{ScaleSelection, SegmentationConfig};
pub use density::{density_curve, information_density, select_working_scale, DensityCurve};
pub use image::{Image, ImageError};
pub use knowledge::{annotate, load_knowledge_base, Annotation, KnowledgeBase};
pub use pipeline::{run_pipeline, LevelSegmentation, SegmentationResult};
pub use pyramid::{build_pyramid, downsample_once, Pyramid};
pub use registry::{ObjectRegistry, Parent, RegionRecord};
pub use segment::{expand_maps, refine_level, segment_top, Label, LabelMap, RegionMeans};
