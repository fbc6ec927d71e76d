//! Depth maps, depth ranges and normal maps.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageGrid;

/// Declared metric depth range `[min, max]` of a scene, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RangeRecord")]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RangeRecord {
    min: f64,
    max: f64,
}

impl TryFrom<RangeRecord> for DepthRange {
    type Error = Error;

    fn try_from(r: RangeRecord) -> Result<Self> {
        DepthRange::new(r.min, r.max)
    }
}

impl DepthRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && max > min && max.is_finite()) {
            return Err(Error::invalid(format!(
                "depth range needs 0 < min < max, got [{min}, {max}]"
            )));
        }
        Ok(DepthRange { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    #[inline]
    pub fn contains(&self, z: f64) -> bool {
        z >= self.min && z <= self.max
    }

    pub fn clamp(&self, z: f64) -> f64 {
        z.clamp(self.min, self.max)
    }
}

/// Per-pixel metric (or relative) depth with a validity mask.
///
/// Invalid pixels store `0.0`, which doubles as the on-disk encoding: any
/// non-positive value in a PFM file reads back as invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    grid: ImageGrid,
    valid: Vec<bool>,
    range: DepthRange,
}

impl DepthMap {
    pub fn new(grid: ImageGrid, valid: Vec<bool>, range: DepthRange) -> Result<Self> {
        grid.require_single_channel("depth map")?;
        if valid.len() != grid.len() {
            return Err(Error::invalid("validity mask length differs from grid"));
        }
        let (w, h) = grid.dims();
        let mut data = grid.into_data();
        for (i, (z, &ok)) in data.iter_mut().zip(&valid).enumerate() {
            if ok {
                if !range.contains(*z) {
                    return Err(Error::invalid(format!(
                        "depth {z} at pixel {i} outside range [{}, {}]",
                        range.min, range.max
                    )));
                }
            } else {
                *z = 0.0;
            }
        }
        Ok(DepthMap {
            grid: ImageGrid::new(w, h, 1, data)?,
            valid,
            range,
        })
    }

    /// Depths where `values[i] > 0` are valid; everything else is invalid.
    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<f64>,
        range: DepthRange,
    ) -> Result<Self> {
        let valid = values.iter().map(|&z| z > 0.0).collect();
        let grid = ImageGrid::new(width, height, 1, values)?;
        Self::new(grid, valid, range)
    }

    pub fn from_options(
        width: usize,
        height: usize,
        values: &[Option<f64>],
        range: DepthRange,
    ) -> Result<Self> {
        let valid = values.iter().map(Option::is_some).collect();
        let grid = ImageGrid::new(
            width,
            height,
            1,
            values.iter().map(|z| z.unwrap_or(0.0)).collect(),
        )?;
        Self::new(grid, valid, range)
    }

    pub fn empty(width: usize, height: usize, range: DepthRange) -> Result<Self> {
        Self::new(
            ImageGrid::filled(width, height, 0.0)?,
            vec![false; width * height],
            range,
        )
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn range(&self) -> DepthRange {
        self.range
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    /// Raw samples with `0.0` at invalid pixels.
    pub fn values(&self) -> &[f64] {
        self.grid.data()
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    #[inline]
    pub fn depth(&self, idx: usize) -> Option<f64> {
        self.valid[idx].then(|| self.grid.at(idx))
    }

    #[inline]
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        self.depth(y * self.width() + x)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// `(pixel index, depth)` for every valid pixel in index order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.valid
            .iter()
            .zip(self.grid.data())
            .enumerate()
            .filter_map(|(i, (&ok, &z))| ok.then_some((i, z)))
    }

    /// Min and max over valid pixels, or `None` when nothing is valid.
    pub fn value_bounds(&self) -> Option<(f64, f64)> {
        self.iter_valid().fold(None, |acc, (_, z)| match acc {
            None => Some((z, z)),
            Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
        })
    }

    pub fn with_range(&self, range: DepthRange) -> Result<Self> {
        Self::new(self.grid.clone(), self.valid.clone(), range)
    }
}

/// Unit surface normals in camera coordinates, oriented with a non-negative
/// z component (pointing away from the viewer, into the scene).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    grid: ImageGrid,
    valid: Vec<bool>,
}

impl NormalMap {
    pub const UNIT_TOLERANCE: f64 = 1e-6;

    pub fn new(grid: ImageGrid, valid: Vec<bool>) -> Result<Self> {
        if grid.channels() != 3 {
            return Err(Error::invalid("normal map must have 3 channels"));
        }
        if valid.len() != grid.len() {
            return Err(Error::invalid("validity mask length differs from grid"));
        }
        for (i, &ok) in valid.iter().enumerate() {
            if !ok {
                continue;
            }
            let n = grid.pixel(i);
            let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            if (norm - 1.0).abs() > Self::UNIT_TOLERANCE {
                return Err(Error::invalid(format!(
                    "normal at pixel {i} has length {norm}"
                )));
            }
            if n[2] < 0.0 {
                return Err(Error::invalid(format!(
                    "normal at pixel {i} has negative z component"
                )));
            }
        }
        Ok(NormalMap { grid, valid })
    }

    pub fn from_options(width: usize, height: usize, normals: &[Option<Vector3<f64>>]) -> Result<Self> {
        let mut data = Vec::with_capacity(normals.len() * 3);
        for n in normals {
            let n = n.unwrap_or_else(Vector3::zeros);
            data.extend_from_slice(&[n.x, n.y, n.z]);
        }
        let valid = normals.iter().map(Option::is_some).collect();
        Self::new(ImageGrid::new(width, height, 3, data)?, valid)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn normal(&self, idx: usize) -> Option<Vector3<f64>> {
        self.valid[idx].then(|| {
            let n = self.grid.pixel(idx);
            Vector3::new(n[0], n[1], n[2])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_validation() {
        assert!(DepthRange::new(0.0, 1.0).is_err());
        assert!(DepthRange::new(2.0, 1.0).is_err());
        assert!(DepthRange::new(0.5, 4.0).is_ok());
    }

    #[test]
    fn non_positive_values_are_invalid() {
        let r = DepthRange::new(0.5, 4.0).unwrap();
        let d = DepthMap::from_values(2, 2, vec![1.0, 0.0, -3.0, 2.0], r).unwrap();
        assert_eq!(d.valid_count(), 2);
        assert_eq!(d.depth(2), None);
        assert_eq!(d.values()[2], 0.0);
    }

    #[test]
    fn out_of_range_valid_depth_rejected() {
        let r = DepthRange::new(0.5, 4.0).unwrap();
        assert!(DepthMap::from_values(2, 2, vec![1.0, 5.0, 1.0, 1.0], r).is_err());
    }

    #[test]
    fn normal_map_invariants() {
        let up = Some(Vector3::new(0.0, 0.0, 1.0));
        assert!(NormalMap::from_options(2, 2, &[up, up, None, up]).is_ok());
        let short = Some(Vector3::new(0.0, 0.0, 0.9));
        assert!(NormalMap::from_options(2, 2, &[up, up, short, up]).is_err());
        let back = Some(Vector3::new(0.0, 0.0, -1.0));
        assert!(NormalMap::from_options(2, 2, &[up, back, up, up]).is_err());
    }
}
