//! On-disk formats: PFM float maps, 16-bit PNG polarizer channels and 8-bit
//! label visualizations.

mod pfm;
mod png;

pub use self::pfm::{read_depth_pfm, read_pfm, write_depth_pfm, write_pfm};
pub use self::png::{
    channel_path, read_polar_frame, write_azimuth_wheel, write_labels_png, write_polar_frame,
    write_u8_png, FrameSidecar, LABEL_DIFFUSE, LABEL_INVALID, LABEL_SPECULAR,
};
