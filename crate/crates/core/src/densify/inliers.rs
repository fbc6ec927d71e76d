use crate::camera::{reproject, CameraModel};
use crate::depth::DepthMap;
use crate::error::{Error, Result};

use super::config::DensifyConfig;

/// Keeps the pixels of `z_t` that agree with `z_prev` reprojected into
/// view `t` to within `consistency_frac` of `z_t`'s depth range span.
///
/// Pixels the reprojection does not reach are dropped. An empty result is
/// legal.
pub fn extract_inliers(
    z_t: &DepthMap,
    z_prev: &DepthMap,
    cam_t: &CameraModel,
    cam_prev: &CameraModel,
    cfg: &DensifyConfig,
) -> Result<DepthMap> {
    if z_t.dims() != z_prev.dims() {
        return Err(Error::DimensionMismatch {
            expected: z_t.dims(),
            actual: z_prev.dims(),
        });
    }
    let warped = reproject(z_prev, cam_prev, cam_t)?;
    let threshold = cfg.consistency_frac * z_t.range().span();
    let kept: Vec<Option<f64>> = (0..z_t.len())
        .map(|i| match (z_t.depth(i), warped.depth(i)) {
            (Some(z), Some(r)) if (z - r).abs() <= threshold => Some(z),
            _ => None,
        })
        .collect();
    DepthMap::from_options(z_t.width(), z_t.height(), &kept, z_t.range())
}
