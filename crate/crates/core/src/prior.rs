//! Surface normals from a relative depth prior and prior-guided resolution
//! of the polarimetric azimuth ambiguities.
//!
//! A relative prior is trusted only for the *direction* of its gradient
//! within a surface. That direction picks one of the four azimuth
//! candidates, which in turn fixes the reflection model and therefore the
//! zenith inversion to use.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::depth::{DepthMap, NormalMap};
use crate::error::{Error, Result};
use crate::image::{Gradient, ImageGrid};
use crate::polarization::{
    angular_distance, azimuth_candidates, wrap, PolarCues, PolarMeasurement, Reflection,
    ZenithSolver,
};

/// How the prior's values relate to depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSpace {
    /// Values grow with depth (depth up to scale).
    #[default]
    Depth,
    /// Values shrink with depth; they are inverted before any geometry.
    Disparity,
}

/// Reference direction the prior zenith is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewingModel {
    /// Angle to the optical axis, `atan2(|n_xy|, n_z)`; the convention the
    /// polarization zenith and the renderer use.
    #[default]
    OpticalAxis,
    /// Angle to the pixel's viewing ray.
    ViewRay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOptions {
    pub space: PriorSpace,
    pub viewing: ViewingModel,
    /// Gradient magnitudes below this fraction of the prior's value range
    /// are treated as directionless.
    pub min_gradient_rel: f64,
}

impl Default for PriorOptions {
    fn default() -> Self {
        PriorOptions {
            space: PriorSpace::Depth,
            viewing: ViewingModel::OpticalAxis,
            min_gradient_rel: 1e-4,
        }
    }
}

impl PriorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_gradient_rel >= 0.0 && self.min_gradient_rel.is_finite()) {
            return Err(Error::invalid(format!(
                "min_gradient_rel must be non-negative, got {}",
                self.min_gradient_rel
            )));
        }
        Ok(())
    }
}

/// Geometry derived from a relative depth prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorField {
    /// The prior as supplied.
    pub zprime: DepthMap,
    /// Depth-like values (the prior, inverted if it was disparity); `0` where
    /// the prior is invalid.
    pub depthlike: Vec<f64>,
    /// Gradient of `depthlike`, zero where undefined.
    pub grad: Gradient,
    pub normal: NormalMap,
    /// Prior zenith in `[0, π/2]`.
    pub zenith_prior: ImageGrid,
    pub valid: Vec<bool>,
    /// Gradient magnitude below which a pixel's direction is not trusted.
    pub min_gradient: f64,
}

impl PriorField {
    pub fn dims(&self) -> (usize, usize) {
        self.zprime.dims()
    }

    /// Image-plane direction the prior implies for the surface normal,
    /// `atan2(-∇y, -∇x)` wrapped into `[0, 2π)`.
    pub fn direction(&self, idx: usize) -> Option<f64> {
        let (gx, gy) = self.grad.at(idx);
        (self.valid[idx] && gx.hypot(gy) > self.min_gradient)
            .then(|| wrap((-gy).atan2(-gx), TAU))
    }
}

/// [`normals_from_prior_with`] for a depth-space prior and default options.
pub fn normals_from_prior(zprime: &DepthMap, cam: &CameraModel) -> Result<PriorField> {
    normals_from_prior_with(zprime, cam, &PriorOptions::default())
}

/// Perspective normals `n' = [-f∇x z', -f∇y z', (x-x₀)∇x z' + (y-y₀)∇y z' + z']`
/// of the prior, normalized, together with the prior zenith.
///
/// A pixel is kept only if it and its in-bounds 4-neighbors are valid, the
/// normal is non-degenerate and faces away from the camera (`n_z ≥ 0`).
pub fn normals_from_prior_with(
    zprime: &DepthMap,
    cam: &CameraModel,
    opts: &PriorOptions,
) -> Result<PriorField> {
    opts.validate()?;
    let (w, h) = zprime.dims();
    if cam.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected: cam.dims(),
            actual: (w, h),
        });
    }
    let depthlike: Vec<f64> = (0..w * h)
        .map(|i| match (zprime.depth(i), opts.space) {
            (Some(v), PriorSpace::Depth) => v,
            (Some(v), PriorSpace::Disparity) => 1.0 / v,
            (None, _) => 0.0,
        })
        .collect();
    let ok = |x: usize, y: usize| zprime.is_valid(y * w + x);
    let neighborhood_ok = |i: usize| {
        let (x, y) = (i % w, i / w);
        ok(x, y)
            && (x == 0 || ok(x - 1, y))
            && (x + 1 == w || ok(x + 1, y))
            && (y == 0 || ok(x, y - 1))
            && (y + 1 == h || ok(x, y + 1))
    };
    let f = cam.focal();
    let (x0, y0) = cam.principal();

    let per_pixel: Vec<(f64, f64, Option<Vector3<f64>>, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if !neighborhood_ok(i) {
                return (0.0, 0.0, None, 0.0);
            }
            let (x, y) = (i % w, i / w);
            let gx = edge_aware_difference(&depthlike, i, x, w, 1);
            let gy = edge_aware_difference(&depthlike, i, y, h, w);
            let (u, v) = (x as f64 - x0, y as f64 - y0);
            let n = Vector3::new(-f * gx, -f * gy, u * gx + v * gy + depthlike[i]);
            let norm = n.norm();
            if !(norm >= 1e-12) || n.z < 0.0 {
                return (gx, gy, None, 0.0);
            }
            let n = n / norm;
            let zenith = match opts.viewing {
                ViewingModel::OpticalAxis => n.xy().norm().atan2(n.z),
                ViewingModel::ViewRay => {
                    let ray = Vector3::new(u / f, v / f, 1.0).normalize();
                    n.dot(&ray).clamp(-1.0, 1.0).acos()
                }
            };
            (gx, gy, Some(n), zenith.clamp(0.0, FRAC_PI_2))
        })
        .collect();

    let normals: Vec<Option<Vector3<f64>>> = per_pixel.iter().map(|p| p.2).collect();
    let valid: Vec<bool> = normals.iter().map(Option::is_some).collect();
    let (lo, hi) = depthlike
        .iter()
        .zip(zprime.mask())
        .filter(|(_, &m)| m)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 0.0 };
    Ok(PriorField {
        zprime: zprime.clone(),
        grad: Gradient {
            dx: ImageGrid::new(w, h, 1, per_pixel.iter().map(|p| p.0).collect())?,
            dy: ImageGrid::new(w, h, 1, per_pixel.iter().map(|p| p.1).collect())?,
        },
        normal: NormalMap::from_options(w, h, &normals)?,
        zenith_prior: ImageGrid::new(w, h, 1, per_pixel.iter().map(|p| p.3).collect())?,
        depthlike,
        valid,
        min_gradient: opts.min_gradient_rel * span,
    })
}

/// Derivative along one axis (`stride` 1 for x, `width` for y).
///
/// Central where the two one-sided differences agree within a factor of
/// three; otherwise the smaller one, so a depth jump on one side does not
/// leak into the slope of the surface the pixel belongs to.
fn edge_aware_difference(v: &[f64], i: usize, coord: usize, extent: usize, stride: usize) -> f64 {
    let back = (coord > 0).then(|| v[i] - v[i - stride]);
    let fwd = (coord + 1 < extent).then(|| v[i + stride] - v[i]);
    match (back, fwd) {
        (Some(b), Some(f)) => {
            let (sb, sf) = (b.abs(), f.abs());
            if sb.max(sf) <= 3.0 * sb.min(sf) || sb.max(sf) < 1e-300 {
                0.5 * (b + f)
            } else if sb < sf {
                b
            } else {
                f
            }
        }
        (Some(b), None) => b,
        (None, Some(f)) => f,
        (None, None) => 0.0,
    }
}

/// Largest alignment error tolerated between the winning candidate and the
/// prior direction.
pub const MAX_ALIGNMENT: f64 = FRAC_PI_4;
/// Score margin below which a diffuse candidate wins a tie.
const TIE_MARGIN: f64 = 1e-9;

/// Picks, per pixel, the azimuth candidate best aligned with the prior's
/// gradient direction, labels the reflection by the model that produced it,
/// and inverts DoLP for the zenith (choosing the specular root nearer the
/// prior zenith).
///
/// Pixels with an invalid measurement, invalid prior, flat prior or an
/// alignment error above [`MAX_ALIGNMENT`] are invalid in the result.
pub fn disambiguate(meas: &PolarMeasurement, field: &PriorField, eta: f64) -> Result<PolarCues> {
    let dims = meas.dims();
    if field.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            actual: field.dims(),
        });
    }
    let solver = ZenithSolver::new(eta)?;
    let (w, h) = dims;
    let picks: Vec<Option<(f64, f64, Reflection)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if !meas.valid[i] {
                return None;
            }
            let target = field.direction(i)?;
            let mut best: Option<(f64, usize)> = None;
            let candidates = azimuth_candidates(meas.aolp.at(i));
            for (k, c) in candidates.iter().enumerate() {
                let score = angular_distance(c.azimuth, target);
                if best.map_or(true, |(s, _)| score < s - TIE_MARGIN) {
                    best = Some((score, k));
                }
            }
            let (score, k) = best?;
            if score > MAX_ALIGNMENT {
                return None;
            }
            let c = candidates[k];
            let dolp = meas.dolp.at(i);
            let zenith = match c.model {
                Reflection::Diffuse => solver.zenith_diffuse(dolp).theta,
                Reflection::Specular => solver
                    .zenith_specular(dolp)
                    .closest_to(field.zenith_prior.at(i)),
            };
            Some((c.azimuth, zenith, c.model))
        })
        .collect();

    Ok(PolarCues {
        azimuth: ImageGrid::new(w, h, 1, picks.iter().map(|p| p.map_or(0.0, |p| p.0)).collect())?,
        zenith: ImageGrid::new(w, h, 1, picks.iter().map(|p| p.map_or(0.0, |p| p.1)).collect())?,
        reflection: picks
            .iter()
            .map(|p| p.map_or(Reflection::Diffuse, |p| p.2))
            .collect(),
        valid: picks.iter().map(Option::is_some).collect(),
    })
}
