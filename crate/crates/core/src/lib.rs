//! Story detection for edited videos.
//!
//! Shots are described by perceptual and semantic features, mapped into an
//! embedding space learned with a triplet loss, and grouped into contiguous
//! stories by a penalized dynamic program. The crate also scores
//! segmentations against human annotations, finds the segmentation that best
//! agrees with several annotators, and ranks stories and thumbnails for a
//! text query.

pub mod agreement;
pub mod embedding;
pub mod error;
pub mod features;
pub mod metric;
pub mod pipeline;
pub mod retrieval;
pub mod segment;
pub mod types;

pub use error::{Error, Result};
pub use metric::{interval_iou, mean_iou, segmentation_iou, segmentation_iou_shots};
pub use types::{
    AnnotationSet, BlockMap, FeatureBlock, FeatureVector, Interval, Segmentation, ShotRecord, Story, Tensor3,
    Timeline, Video, VideoFeatures,
};
