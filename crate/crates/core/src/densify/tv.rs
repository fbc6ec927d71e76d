//! Edge-weighted total-variation smoothing of the known depths,
//! `min_z ½‖z − f‖² + λ Σ_p τ_p |∇z_p|`, solved with the Chambolle-Pock
//! primal-dual scheme.
//!
//! Differences are forward differences between pairs of known pixels; a
//! pair with an unknown member contributes nothing, and unknown pixels are
//! never written.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{gradient, ImageGrid};

use super::config::DensifyConfig;
use super::state::DensifyState;

/// Weights `τ = exp(−ζ·|∇I|)` of the image min-max normalized to `[0, 1]`.
pub fn tv_weights(image: &ImageGrid, zeta: f64) -> Result<Vec<f64>> {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    let g = gradient(&image.map(|v| (v - lo) * scale)?)?;
    Ok((0..image.len()).map(|i| (-zeta * g.magnitude(i)).exp()).collect())
}

/// The smoothed values and the objective after each iteration, starting
/// with the input's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TvResult {
    pub values: Vec<f64>,
    pub objective: Vec<f64>,
}

struct Grid<'a> {
    w: usize,
    h: usize,
    known: &'a [bool],
    tau: &'a [f64],
}

impl Grid<'_> {
    #[inline]
    fn has_x(&self, p: usize) -> bool {
        p % self.w + 1 < self.w && self.known[p] && self.known[p + 1]
    }

    #[inline]
    fn has_y(&self, p: usize) -> bool {
        p + self.w < self.w * self.h && self.known[p] && self.known[p + self.w]
    }

    #[inline]
    fn grad(&self, z: &[f64], p: usize) -> (f64, f64) {
        let gx = if self.has_x(p) { z[p + 1] - z[p] } else { 0.0 };
        let gy = if self.has_y(p) { z[p + self.w] - z[p] } else { 0.0 };
        (gx, gy)
    }

    /// `(Kᵀy)_p` for `K z = τ ∇z`.
    #[inline]
    fn adjoint(&self, yx: &[f64], yy: &[f64], p: usize) -> f64 {
        let mut d = 0.0;
        if self.has_x(p) {
            d -= self.tau[p] * yx[p];
        }
        if p % self.w > 0 && self.has_x(p - 1) {
            d += self.tau[p - 1] * yx[p - 1];
        }
        if self.has_y(p) {
            d -= self.tau[p] * yy[p];
        }
        if p >= self.w && self.has_y(p - self.w) {
            d += self.tau[p - self.w] * yy[p - self.w];
        }
        d
    }

    fn objective(&self, z: &[f64], f: &[f64], lambda: f64) -> f64 {
        let rows: Vec<f64> = (0..self.h)
            .into_par_iter()
            .map(|y| {
                let mut acc = 0.0;
                for p in y * self.w..(y + 1) * self.w {
                    if !self.known[p] {
                        continue;
                    }
                    let r = z[p] - f[p];
                    let (gx, gy) = self.grad(z, p);
                    acc += 0.5 * r * r + lambda * self.tau[p] * gx.hypot(gy);
                }
                acc
            })
            .collect();
        // Row sums are combined in a fixed order for thread-count independence.
        rows.iter().sum()
    }
}

fn check(f: &[f64], known: &[bool], tau: &[f64], w: usize, h: usize) -> Result<()> {
    if f.len() != w * h || known.len() != w * h || tau.len() != w * h {
        return Err(Error::invalid("TV inputs must all have width·height entries"));
    }
    if !tau.iter().all(|t| (0.0..=1.0).contains(t)) {
        return Err(Error::invalid("TV weights must lie in [0, 1]"));
    }
    Ok(())
}

/// Value of the weighted-TV objective at `z` for data `f`.
pub fn tv_objective(
    z: &[f64],
    f: &[f64],
    known: &[bool],
    tau: &[f64],
    width: usize,
    height: usize,
    lambda: f64,
) -> Result<f64> {
    check(f, known, tau, width, height)?;
    let g = Grid { w: width, h: height, known, tau };
    Ok(g.objective(z, f, lambda))
}

/// Runs `iters` primal-dual iterations from `z = f`.
///
/// The primal-dual iterates themselves need not decrease the objective, so
/// the returned estimate after each iteration is the best iterate so far;
/// its objective trace is non-increasing by construction.
pub fn tv_minimize(
    f: &[f64],
    known: &[bool],
    tau: &[f64],
    width: usize,
    height: usize,
    lambda: f64,
    iters: usize,
) -> Result<TvResult> {
    check(f, known, tau, width, height)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("`lambda` must be non-negative, got {lambda}")));
    }
    let g = Grid { w: width, h: height, known, tau };
    let f0 = g.objective(f, f, lambda);
    let mut best = f.to_vec();
    let mut trace = vec![f0];
    let max_tau = tau.iter().copied().fold(0.0f64, f64::max);
    if lambda == 0.0 || max_tau == 0.0 {
        trace.resize(iters + 1, f0);
        return Ok(TvResult { values: best, objective: trace });
    }
    // ‖K‖² ≤ 8·max τ², and σ·t·‖K‖² < 1 guarantees convergence.
    let step = 0.99 / (8.0f64.sqrt() * max_tau);
    let (sigma, t) = (step, step);
    let n = width * height;
    let mut z = f.to_vec();
    let mut zbar = f.to_vec();
    let mut yx = vec![0.0; n];
    let mut yy = vec![0.0; n];
    let mut z_next = vec![0.0; n];
    let mut best_obj = f0;

    for _ in 0..iters {
        yx.par_iter_mut()
            .zip(yy.par_iter_mut())
            .enumerate()
            .for_each(|(p, (ax, ay))| {
                let (gx, gy) = g.grad(&zbar, p);
                let ux = *ax + sigma * tau[p] * gx;
                let uy = *ay + sigma * tau[p] * gy;
                let norm = ux.hypot(uy);
                let s = if norm > lambda { lambda / norm } else { 1.0 };
                *ax = ux * s;
                *ay = uy * s;
            });
        z_next.par_iter_mut().enumerate().for_each(|(p, out)| {
            *out = if known[p] {
                f[p] + (z[p] - f[p] - t * g.adjoint(&yx, &yy, p)) / (1.0 + t)
            } else {
                z[p]
            };
        });
        zbar.par_iter_mut()
            .zip(z_next.par_iter())
            .zip(z.par_iter())
            .for_each(|((b, &zn), &zo)| *b = 2.0 * zn - zo);
        std::mem::swap(&mut z, &mut z_next);
        let obj = g.objective(&z, f, lambda);
        if obj <= best_obj {
            best_obj = obj;
            best.copy_from_slice(&z);
        }
        trace.push(best_obj);
    }
    Ok(TvResult { values: best, objective: trace })
}

/// One smoothing pass over the known depths of `state` with weights from
/// the keyframe's mean intensity `image`.
pub fn tv_smooth(state: &DensifyState, image: &ImageGrid, cfg: &DensifyConfig) -> Result<DensifyState> {
    if image.dims() != (state.width, state.height) {
        return Err(Error::DimensionMismatch {
            expected: (state.width, state.height),
            actual: image.dims(),
        });
    }
    let tau = tv_weights(image, cfg.zeta)?;
    let data: Vec<f64> = if cfg.log_depth {
        state
            .values
            .iter()
            .zip(&state.known)
            .map(|(&z, &k)| if k { z.ln() } else { 0.0 })
            .collect()
    } else {
        state.values.clone()
    };
    let res = tv_minimize(&data, &state.known, &tau, state.width, state.height, cfg.lambda, cfg.tv_iters)?;
    let mut next = state.clone();
    let range = state.range();
    for (i, v) in res.values.into_iter().enumerate() {
        if state.known[i] {
            next.values[i] = range.clamp(if cfg.log_depth { v.exp() } else { v });
        }
    }
    Ok(next)
}
