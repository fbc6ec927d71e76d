#![doc = include_str!("../../../book/src/introduction.md")]

pub mod camera;
pub mod cloud;
pub mod densify;
pub mod depth;
pub mod error;
pub mod eval;
pub mod image;
pub mod polarization;
pub mod prior;
pub mod synth;

pub use camera::{backproject, reproject, CameraModel};
pub use cloud::PointCloud;
pub use depth::{DepthMap, DepthRange, NormalMap};
pub use error::{Error, Result};
pub use image::{gradient, Gradient, ImageGrid};
pub mod io;

/// Book chapters compiled as doctests so their snippets cannot drift.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/polarization.md")]
    struct Polarization;
    #[doc = include_str!("../../../book/src/prior.md")]
    struct Prior;
    #[doc = include_str!("../../../book/src/densify.md")]
    struct Densify;
    #[doc = include_str!("../../../book/src/smoothing.md")]
    struct Smoothing;
    #[doc = include_str!("../../../book/src/synth.md")]
    struct Synth;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
