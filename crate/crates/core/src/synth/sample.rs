use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::depth::{DepthMap, DepthRange};
use crate::error::{Error, Result};
use crate::image::gradient;
use crate::prior::PriorSpace;

use super::render::GroundTruth;

/// Floor added to the normalized image-gradient weight so textureless pixels
/// can still be drawn.
const TEXTURELESS_WEIGHT: f64 = 0.05;

/// Draws `⌈fraction·M⌉` of the `M` valid ground-truth pixels as sparse
/// seeds, favoring strong image gradients, and perturbs each depth by a
/// factor `1 + ε` with `ε ~ N(0, noise_rel)`.
///
/// Weighted sampling without replacement uses exponential keys
/// `ln(u)/w`; the same `seed` always selects the same pixels.
pub fn sample_sparse_seeds(
    gt: &GroundTruth,
    fraction: f64,
    noise_rel: f64,
    seed: u64,
) -> Result<DepthMap> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("seed fraction must be in (0, 1], got {fraction}")));
    }
    if !(noise_rel >= 0.0) {
        return Err(Error::invalid("seed noise must be non-negative"));
    }
    let grad = gradient(&gt.radiance)?;
    let peak = (0..grad.dx.len())
        .map(|i| grad.magnitude(i))
        .fold(0.0f64, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut keyed: Vec<(f64, usize)> = gt
        .depth
        .iter_valid()
        .map(|(i, _)| {
            let w = TEXTURELESS_WEIGHT + if peak > 0.0 { grad.magnitude(i) / peak } else { 0.0 };
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    let take = (fraction * keyed.len() as f64).ceil() as usize;
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = keyed[..take.min(keyed.len())].iter().map(|k| k.1).collect();
    chosen.sort_unstable();

    let range = gt.depth.range();
    let noise = Normal::new(0.0, noise_rel).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = vec![None; gt.depth.len()];
    for i in chosen {
        let z = gt.depth.depth(i).expect("chosen from valid pixels");
        let z = if noise_rel > 0.0 {
            range.clamp(z * (1.0 + noise.sample(&mut rng)))
        } else {
            z
        };
        out[i] = Some(z);
    }
    DepthMap::from_options(gt.depth.width(), gt.depth.height(), &out, range)
}

/// Strictly monotone map from metric depth to relative prior values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriorWarp {
    /// `z' = z`.
    Identity,
    /// `z' = factor·z`.
    Scale { factor: f64 },
    /// `z' = a / (z + b)`, a disparity-like value that shrinks with depth.
    Disparity { a: f64, b: f64 },
}

impl PriorWarp {
    /// The space the warped values live in.
    pub fn space(&self) -> PriorSpace {
        match self {
            PriorWarp::Identity | PriorWarp::Scale { .. } => PriorSpace::Depth,
            PriorWarp::Disparity { .. } => PriorSpace::Disparity,
        }
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            PriorWarp::Identity => z,
            PriorWarp::Scale { factor } => factor * z,
            PriorWarp::Disparity { a, b } => a / (z + b),
        }
    }

    /// Rejects parameters that are not strictly monotone and positive on
    /// the depth range.
    pub fn validate(&self, range: DepthRange) -> Result<()> {
        match *self {
            PriorWarp::Identity => Ok(()),
            PriorWarp::Scale { factor } if factor > 0.0 && factor.is_finite() => Ok(()),
            PriorWarp::Scale { factor } => Err(Error::invalid(format!(
                "scale warp needs a positive factor, got {factor}"
            ))),
            PriorWarp::Disparity { a, b } if a > 0.0 && range.min + b > 0.0 => Ok(()),
            PriorWarp::Disparity { a, b } => Err(Error::invalid(format!(
                "disparity warp a/(z+b) is not monotone and positive on [{}, {}] for a={a}, b={b}",
                range.min, range.max
            ))),
        }
    }
}

/// Per-surface offsets added to the warped prior, emulating a monocular
/// network that gets the ordering between surfaces wrong while keeping each
/// surface internally consistent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SurfaceBias {
    #[default]
    None,
    /// Offset for surface `k` is `offsets[k]` (0 past the end).
    Offsets { offsets: Vec<f64> },
    /// Offsets drawn uniformly from `±amplitude` times the warped value
    /// span, one per surface.
    Random { amplitude: f64 },
}

/// Relative depth prior derived from ground truth: warped, then offset per
/// surface.
pub fn simulate_relative_prior(
    gt: &GroundTruth,
    warp: PriorWarp,
    bias: &SurfaceBias,
    seed: u64,
) -> Result<DepthMap> {
    warp.validate(gt.depth.range())?;
    let warped: Vec<Option<f64>> = (0..gt.depth.len())
        .map(|i| gt.depth.depth(i).map(|z| warp.apply(z)))
        .collect();
    let n_surfaces = gt.surface.iter().flatten().max().map_or(0, |m| m + 1);
    let offsets: Vec<f64> = match bias {
        SurfaceBias::None => vec![0.0; n_surfaces],
        SurfaceBias::Offsets { offsets } => (0..n_surfaces)
            .map(|k| offsets.get(k).copied().unwrap_or(0.0))
            .collect(),
        SurfaceBias::Random { amplitude } => {
            let (lo, hi) = warped
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let span = (hi - lo).max(0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_surfaces)
                .map(|_| rng.random_range(-1.0..=1.0) * amplitude * span)
                .collect()
        }
    };
    let values: Vec<Option<f64>> = warped
        .iter()
        .zip(&gt.surface)
        .map(|(v, s)| v.map(|v| v + s.map_or(0.0, |k| offsets[k])))
        .collect();
    let (lo, hi) = values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 0.0) {
        return Err(Error::invalid(
            "warp and surface bias produce non-positive prior values",
        ));
    }
    let range = DepthRange::new(lo, if hi > lo { hi } else { lo * (1.0 + 1e-9) })?;
    DepthMap::from_options(gt.depth.width(), gt.depth.height(), &values, range)
}
