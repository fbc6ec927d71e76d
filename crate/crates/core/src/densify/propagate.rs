use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::polarization::{angular_distance, PolarCues};
use crate::prior::PriorField;

use super::claim::ClaimMap;
use super::config::DensifyConfig;
use super::state::{DensifyState, Provenance};

/// Per-step offset for walking a discrete line at `angle`: the dominant
/// axis advances by exactly one pixel, so rounding `k·step` visits an
/// 8-connected pixel sequence.
#[inline]
fn step_vector(angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    let m = c.abs().max(s.abs());
    (c / m, s / m)
}

#[inline]
fn offset(x: usize, y: usize, k: f64, step: (f64, f64), w: usize, h: usize) -> Option<(usize, i64, i64)> {
    let dx = (k * step.0).round() as i64;
    let dy = (k * step.1).round() as i64;
    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
    (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
        .then(|| (ny as usize * w + nx as usize, dx, dy))
}

fn check_dims(state: &DensifyState, dims: (usize, usize)) -> Result<()> {
    if (state.width, state.height) != dims {
        return Err(Error::DimensionMismatch {
            expected: (state.width, state.height),
            actual: dims,
        });
    }
    Ok(())
}

/// Transports the depth of every known pixel along the two directions
/// perpendicular to its azimuth.
pub fn propagate(state: &DensifyState, cues: &PolarCues, cfg: &DensifyConfig) -> Result<DensifyState> {
    let sources: Vec<usize> = (0..state.len()).filter(|&i| state.known[i]).collect();
    Ok(propagate_from(state, cues, cfg, &sources)?.0)
}

/// [`propagate`] restricted to walks starting at `sources`; also returns
/// the pixels that received a depth, in index order.
///
/// A walk visits the rounded points `p + k·d±` and stops at the image
/// border, at a pixel without valid cues, at a seed, or where the azimuth
/// of consecutive pixels differs by more than `cfg.azimuth_stop`. Known
/// pixels are crossed without being overwritten. When several walks reach
/// one unknown pixel the shortest walk wins, then the smallest source index.
pub fn propagate_from(
    state: &DensifyState,
    cues: &PolarCues,
    cfg: &DensifyConfig,
    sources: &[usize],
) -> Result<(DensifyState, Vec<usize>)> {
    check_dims(state, cues.dims())?;
    let (w, h) = (state.width, state.height);
    let claims = ClaimMap::new(state.len());
    let az = cues.azimuth.data();
    sources.par_iter().for_each(|&p| {
        if !state.known[p] || !cues.valid[p] {
            return;
        }
        let (x, y) = (p % w, p / w);
        for turn in [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2] {
            let step = step_vector(az[p] + turn);
            let mut prev = p;
            for k in 1.. {
                let Some((q, dx, dy)) = offset(x, y, k as f64, step, w, h) else {
                    break;
                };
                if !cues.valid[q]
                    || state.seedmask[q]
                    || angular_distance(az[q], az[prev]) > cfg.azimuth_stop
                {
                    break;
                }
                if !state.known[q] {
                    claims.offer(q, (dx * dx + dy * dy) as u32, p);
                }
                prev = q;
            }
        }
    });
    let mut next = state.clone();
    let mut added = Vec::new();
    for (q, p) in claims.winners() {
        next.set(q, state.values[p], Provenance::Propagated, p);
        added.push(q);
    }
    Ok((next, added))
}

/// Extends every known pixel one step along `±(cos φ, sin φ)`, scaling the
/// prior's depth step by the ratio of polarimetric to prior zenith sines:
/// `z(q) = z(p)·(z'(p) + sin θ(p)/sin θ'(p)·(z'(q) - z'(p)))/z'(p)`.
pub fn estimate_along_gradient(
    state: &DensifyState,
    cues: &PolarCues,
    field: &PriorField,
    cfg: &DensifyConfig,
) -> Result<DensifyState> {
    let sources: Vec<usize> = (0..state.len()).filter(|&i| state.known[i]).collect();
    Ok(estimate_from(state, cues, field, cfg, &sources)?.0)
}

/// Sine of the prior zenith below which the correction ratio is not formed.
const MIN_PRIOR_SINE: f64 = 1e-6;

pub(crate) fn estimate_from(
    state: &DensifyState,
    cues: &PolarCues,
    field: &PriorField,
    _cfg: &DensifyConfig,
    sources: &[usize],
) -> Result<(DensifyState, Vec<usize>)> {
    check_dims(state, cues.dims())?;
    check_dims(state, field.dims())?;
    let (w, h) = (state.width, state.height);
    let range = state.range();
    let dl = &field.depthlike;
    let prior_ok = field.zprime.mask();
    let estimate = |p: usize, q: usize| -> Option<f64> {
        let k = cues.zenith.at(p).sin() / field.zenith_prior.at(p).sin();
        let z = state.values[p] * (dl[p] + k * (dl[q] - dl[p])) / dl[p];
        (z.is_finite() && range.contains(z)).then_some(z)
    };
    let claims = ClaimMap::new(state.len());
    sources.par_iter().for_each(|&p| {
        if !state.known[p]
            || !cues.valid[p]
            || !field.valid[p]
            || field.zenith_prior.at(p).sin() < MIN_PRIOR_SINE
        {
            return;
        }
        let (x, y) = (p % w, p / w);
        let phi = cues.azimuth.at(p);
        for sign in [1.0, -1.0] {
            let Some((q, dx, dy)) = offset(x, y, sign, step_vector(phi), w, h) else {
                continue;
            };
            if state.known[q] || !prior_ok[q] || estimate(p, q).is_none() {
                continue;
            }
            claims.offer(q, (dx * dx + dy * dy) as u32, p);
        }
    });
    let mut next = state.clone();
    let mut added = Vec::new();
    for (q, p) in claims.winners() {
        let z = estimate(p, q).expect("claims are only offered for in-range estimates");
        next.set(q, z, Provenance::Estimated, p);
        added.push(q);
    }
    Ok((next, added))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::{DepthMap, DepthRange};
    use crate::image::ImageGrid;
    use crate::polarization::Reflection;
    use std::f64::consts::PI;

    fn cues(w: usize, h: usize, az: impl Fn(usize, usize) -> f64) -> PolarCues {
        PolarCues {
            azimuth: ImageGrid::from_fn(w, h, |x, y| az(x, y)).unwrap(),
            zenith: ImageGrid::filled(w, h, 0.5).unwrap(),
            reflection: vec![Reflection::Diffuse; w * h],
            valid: vec![true; w * h],
        }
    }

    fn single_seed(w: usize, h: usize, at: usize, z: f64) -> DensifyState {
        let mut v = vec![None; w * h];
        v[at] = Some(z);
        DensifyState::from_seeds(
            &DepthMap::from_options(w, h, &v, DepthRange::new(0.5, 10.0).unwrap()).unwrap(),
        )
    }

    #[test]
    fn azimuth_zero_fills_the_column() {
        let (w, h) = (7, 9);
        let s = single_seed(w, h, 4 * w + 3, 2.0);
        let out = propagate(&s, &cues(w, h, |_, _| 0.0), &DensifyConfig::default()).unwrap();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                assert_eq!(out.known[i], x == 3, "({x},{y})");
                if x == 3 {
                    assert_eq!(out.values[i], 2.0);
                }
            }
        }
    }

    #[test]
    fn crease_stops_the_walk() {
        let (w, h) = (5, 9);
        let s = single_seed(w, h, 2 * w + 2, 2.0);
        let c = cues(w, h, |_, y| if y < 5 { 0.0 } else { PI / 2.0 });
        let out = propagate(&s, &c, &DensifyConfig::default()).unwrap();
        for y in 0..h {
            assert_eq!(out.known[y * w + 2], y < 5, "row {y}");
        }
    }

    #[test]
    fn walks_never_overwrite_seeds_and_stop_there() {
        let (w, h) = (3, 7);
        let mut v = vec![None; w * h];
        v[w + 1] = Some(2.0);
        v[3 * w + 1] = Some(3.0);
        let s = DensifyState::from_seeds(
            &DepthMap::from_options(w, h, &v, DepthRange::new(0.5, 10.0).unwrap()).unwrap(),
        );
        let out = propagate(&s, &cues(w, h, |_, _| 0.0), &DensifyConfig::default()).unwrap();
        assert_eq!(out.values[w + 1], 2.0);
        assert_eq!(out.values[3 * w + 1], 3.0);
        assert_eq!(out.values[1], 2.0);
        assert_eq!(out.values[2 * w + 1], 2.0, "tie at equal distance goes to the smaller source");
        assert_eq!(out.values[6 * w + 1], 3.0);
    }

    #[test]
    fn diagonal_walk_is_eight_connected() {
        let (w, h) = (6, 6);
        let s = single_seed(w, h, 0, 2.0);
        // Normal along (1,-1) puts the iso-depth direction on the diagonal.
        let out = propagate(&s, &cues(w, h, |_, _| -PI / 4.0 + 2.0 * PI), &DensifyConfig::default()).unwrap();
        for k in 0..6 {
            assert!(out.known[k * w + k]);
        }
        assert_eq!(out.known_count(), 6);
    }

    #[test]
    fn step_vector_dominant_axis_is_unit() {
        for a in [0.0, 0.3, 1.0, 2.0, 4.0] {
            let (sx, sy) = step_vector(a);
            assert!((sx.abs().max(sy.abs()) - 1.0).abs() < 1e-15);
        }
    }
}
