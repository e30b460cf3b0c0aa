//! Dense optical flow with confidence and occlusion machinery.
//!
//! The backend is pluggable through [`FlowEstimator`]; the built-in
//! [`CorrelationFlow`] refines a correlation cost volume coarse-to-fine with
//! deterministic soft-argmax lookups.

mod cost;
mod estimator;
mod field;
mod format;

pub use cost::{build_cost_volume, CostVolume};
pub use estimator::{BidirectionalFlow, CorrelationFlow, FlowEstimator, FlowParams};
pub use field::{
    compose_flow, fb_occlusion, occlusion_fraction, ConfidenceMap, ConsistencyParams, FlowField,
    OcclusionMap,
};
pub use format::{read_flow, write_flow};
