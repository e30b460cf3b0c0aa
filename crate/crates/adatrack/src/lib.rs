//! Deterministic patch-level tracking of deformable regions in video.
//!
//! The pipeline runs two stages per frame: inter-frame matching (dense
//! correlation-volume optical flow with confidence and occlusion detection)
//! extracts a coarse region of interest, then adaptive-template anchor
//! matching refines the target box against a motion-compensated,
//! appearance-fused template. A synthetic sequence generator with analytic
//! ground truth and an evaluation/diagnostics module make every stage
//! verifiable in isolation.
//!
//! All numeric code is generic over the scalar type ([`Scalar`]); `f32`
//! aliases are provided at the crate root for the common case.

pub mod error;
pub mod eval;
pub mod features;
pub mod flow;
pub mod geometry;
pub mod image;
pub mod matcher;
pub mod scalar;
pub mod synth;
pub mod template;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision aliases for the common concrete instantiation.
pub type BBoxF = geometry::BBox<f32>;
pub type Point2F = geometry::Point2<f32>;
pub type ImageF = image::Image<f32>;
pub type FeatureMapF = features::FeatureMap<f32>;
pub type FlowFieldF = flow::FlowField<f32>;
pub type ConfidenceMapF = flow::ConfidenceMap<f32>;
pub type CostVolumeF = flow::CostVolume<f32>;
pub type TrackerConfigF = tracker::TrackerConfig<f32>;
pub type TrackResultF = tracker::TrackResult<f32>;
pub type SynthSpecF = synth::SynthSpec<f32>;

/// Double-precision aliases.
pub type BBoxD = geometry::BBox<f64>;
pub type Point2D = geometry::Point2<f64>;
pub type ImageD = image::Image<f64>;
pub type FlowFieldD = flow::FlowField<f64>;
