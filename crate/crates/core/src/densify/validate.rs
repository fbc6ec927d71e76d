use rayon::prelude::*;

use crate::depth::DepthMap;
use crate::error::Result;

use super::config::{DensifyConfig, Validation};
use super::state::DensifyState;

const WINDOW_RADIUS: usize = 2;
/// Known neighbors required before the median test is applied.
const MIN_NEIGHBORS: usize = 3;
/// Scale from median absolute deviation to a Gaussian standard deviation.
const MAD_TO_SIGMA: f64 = 1.4826;

/// Removes the pixels in `candidates` whose depth is inconsistent, and
/// returns how many were removed.
///
/// With a `reference` (the previous view's depth warped into this one) a
/// pixel it covers must agree to within `consistency_frac` of the range
/// span. Every other candidate faces the median test: its depth must lie
/// within that same threshold plus three robust standard deviations of the
/// median of its known 5×5 neighbors. Seeds are never removed.
pub fn validate(
    state: &mut DensifyState,
    candidates: &[usize],
    reference: Option<&DepthMap>,
    cfg: &DensifyConfig,
) -> Result<usize> {
    let threshold = cfg.consistency_frac * state.range().span();
    let reference = match cfg.validation {
        Validation::TwoView => reference,
        Validation::Median => None,
    };
    let (w, h) = (state.width, state.height);
    let snapshot = &*state;
    let reject: Vec<usize> = candidates
        .par_iter()
        .copied()
        .filter(|&i| {
            if snapshot.seedmask[i] || !snapshot.known[i] {
                return false;
            }
            let z = snapshot.values[i];
            if let Some(r) = reference.and_then(|r| r.depth(i)) {
                return (z - r).abs() > threshold;
            }
            let (x, y) = (i % w, i / w);
            let mut window = Vec::with_capacity(24);
            for ny in y.saturating_sub(WINDOW_RADIUS)..(y + WINDOW_RADIUS + 1).min(h) {
                for nx in x.saturating_sub(WINDOW_RADIUS)..(x + WINDOW_RADIUS + 1).min(w) {
                    let j = ny * w + nx;
                    if j != i && snapshot.known[j] {
                        window.push(snapshot.values[j]);
                    }
                }
            }
            if window.len() < MIN_NEIGHBORS {
                return false;
            }
            let med = median(&mut window);
            let mut dev: Vec<f64> = window.iter().map(|v| (v - med).abs()).collect();
            let mad = median(&mut dev);
            (z - med).abs() > threshold + 3.0 * MAD_TO_SIGMA * mad
        })
        .collect();
    for &i in &reject {
        state.clear(i);
    }
    Ok(reject.len())
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
