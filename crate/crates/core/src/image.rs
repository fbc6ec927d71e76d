//! Dense row-major scalar images and finite-difference gradients.

use crate::error::{Error, Result};

/// A row-major grid of `f64` samples with one or more interleaved channels.
///
/// Pixel `(x, y)` has its center at integer coordinates; `x` grows to the
/// right and `y` grows downward from the top-left corner.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        if channels == 0 {
            return Err(Error::invalid("image must have at least one channel"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(ImageGrid {
            width,
            height,
            channels,
            data,
        })
    }

    /// A single-channel grid filled with `value`.
    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, 1, vec![value; width * height])
    }

    /// A single-channel grid from a per-pixel function of `(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Sample of a single-channel grid by linear pixel index.
    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.data[idx * self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels]
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub(crate) fn require_single_channel(&self, what: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::invalid(format!(
                "{what} must be single-channel, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }

    pub(crate) fn require_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}

/// Per-pixel first derivatives of a single-channel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dx: ImageGrid,
    pub dy: ImageGrid,
}

impl Gradient {
    #[inline]
    pub fn at(&self, idx: usize) -> (f64, f64) {
        (self.dx.at(idx), self.dy.at(idx))
    }

    #[inline]
    pub fn magnitude(&self, idx: usize) -> f64 {
        self.dx.at(idx).hypot(self.dy.at(idx))
    }
}

/// Central differences in the interior and one-sided differences on the
/// border, in value units per pixel. Exact on affine fields.
pub fn gradient(grid: &ImageGrid) -> Result<Gradient> {
    grid.require_single_channel("gradient input")?;
    let (w, h) = grid.dims();
    let v = grid.data();
    let mut dx = vec![0.0; w * h];
    let mut dy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            dx[i] = if x == 0 {
                v[i + 1] - v[i]
            } else if x == w - 1 {
                v[i] - v[i - 1]
            } else {
                0.5 * (v[i + 1] - v[i - 1])
            };
            dy[i] = if y == 0 {
                v[i + w] - v[i]
            } else if y == h - 1 {
                v[i] - v[i - w]
            } else {
                0.5 * (v[i + w] - v[i - w])
            };
        }
    }
    Ok(Gradient {
        dx: ImageGrid::new(w, h, 1, dx)?,
        dy: ImageGrid::new(w, h, 1, dy)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageGrid::new(1, 4, 1, vec![0.0; 4]).is_err());
        assert!(ImageGrid::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImageGrid::new(2, 2, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(ImageGrid::new(2, 2, 3, vec![0.0; 12]).is_ok());
    }

    #[test]
    fn constant_grid_has_zero_gradient() {
        let g = gradient(&ImageGrid::filled(5, 4, 3.25).unwrap()).unwrap();
        assert!(g.dx.data().iter().chain(g.dy.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_in_x() {
        let g = gradient(&ImageGrid::from_fn(6, 5, |x, _| x as f64).unwrap()).unwrap();
        for i in 0..30 {
            assert_eq!(g.at(i), (1.0, 0.0));
        }
    }

    #[test]
    fn ramp_in_y() {
        let g = gradient(&ImageGrid::from_fn(6, 5, |_, y| 2.0 * y as f64).unwrap()).unwrap();
        for i in 0..30 {
            assert_eq!(g.at(i), (0.0, 2.0));
        }
    }

    #[test]
    fn multichannel_gradient_rejected() {
        let g = ImageGrid::new(2, 2, 3, vec![0.0; 12]).unwrap();
        assert!(gradient(&g).is_err());
    }
}
