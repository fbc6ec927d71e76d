//! Synthetic polarization scenes with full ground truth, plus simulated
//! sparse seeds and relative depth priors.

mod fixtures;
mod render;
mod sample;
mod scene;

pub use self::fixtures::{fixture, keyframes, Fixture, FIXTURE_NAMES};
pub use self::render::{add_channel_noise, render_scene, GroundTruth};
pub use self::sample::{sample_sparse_seeds, simulate_relative_prior, PriorWarp, SurfaceBias};
pub use self::scene::{Albedo, Light, Material, Shape, Surface, SyntheticScene};
