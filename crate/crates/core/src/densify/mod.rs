//! Sparse-to-dense depth: two-view inlier extraction, propagation along
//! iso-depth contours, prior-guided estimation across them, validation and
//! edge-aware total-variation smoothing.

mod claim;
mod config;
mod inliers;
mod keyframe;
mod propagate;
mod sequence;
mod state;
mod tv;
mod validate;

pub use self::config::{DensifyConfig, Validation};
pub use self::inliers::extract_inliers;
pub use self::keyframe::{densify_keyframe, DensifyOutput, DensifyStats, IterationStats, KeyframeInputs};
pub use self::propagate::{estimate_along_gradient, propagate, propagate_from};
pub use self::sequence::{keyframe_cues, reconstruct_sequence, KeyframeData, KeyframeResult, SequenceOptions, SequenceOutput};
pub use self::state::{DensifyState, Provenance};
pub use self::tv::{tv_minimize, tv_objective, tv_smooth, tv_weights, TvResult};
pub use self::validate::validate;
