use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::eval::absrel;
use crate::image::ImageGrid;
use crate::polarization::PolarCues;
use crate::prior::PriorField;

use super::config::DensifyConfig;
use super::propagate::{estimate_from, propagate_from};
use super::state::{DensifyState, Provenance};
use super::tv::tv_smooth;
use super::validate::validate;

/// Everything one keyframe's densification reads.
#[derive(Debug, Clone, Copy)]
pub struct KeyframeInputs<'a> {
    pub seeds: &'a DepthMap,
    pub cues: &'a PolarCues,
    pub field: &'a PriorField,
    /// Mean channel intensity, for the TV edge weights.
    pub image: &'a ImageGrid,
    /// Another view's depth already warped into this keyframe.
    pub reference: Option<&'a DepthMap>,
    /// Enables per-iteration AbsRel in the statistics.
    pub ground_truth: Option<&'a DepthMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub propagated: usize,
    pub estimated: usize,
    pub rejected: usize,
    /// Known pixels after validation.
    pub total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absrel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensifyStats {
    pub seeds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_absrel: Option<f64>,
    pub iterations: Vec<IterationStats>,
    /// The growth ratio fell below the threshold before the iteration cap.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensifyOutput {
    pub depth: DepthMap,
    pub provenance: Vec<Provenance>,
    /// Source pixel of each propagated or estimated depth.
    pub origin: Vec<Option<usize>>,
    pub stats: DensifyStats,
}

/// Grows `seeds` into a dense depth map.
///
/// Each outer iteration propagates from the pixels added in the previous
/// one (initially the seeds), estimates one step along the azimuth from
/// every known pixel, validates the additions and smooths. It stops when an
/// iteration adds nothing, when `added / total < convergence_ratio`, or at
/// `max_outer_iters`.
pub fn densify_keyframe(inputs: KeyframeInputs<'_>, cfg: &DensifyConfig) -> Result<DensifyOutput> {
    cfg.validate()?;
    let seeds = inputs.seeds;
    if seeds.valid_count() == 0 {
        return Err(Error::Degenerate("no seed depths to densify".into()));
    }
    let dims = seeds.dims();
    for (what, d) in [
        ("cues", inputs.cues.dims()),
        ("prior", inputs.field.dims()),
        ("image", inputs.image.dims()),
    ] {
        if d != dims {
            return Err(Error::invalid(format!(
                "{what} are {}x{}, seeds are {}x{}",
                d.0, d.1, dims.0, dims.1
            )));
        }
    }
    let score = |s: &DensifyState| -> Result<Option<f64>> {
        inputs.ground_truth.map(|gt| absrel(&s.depth()?, gt)).transpose()
    };

    let mut state = DensifyState::from_seeds(seeds);
    let mut stats = DensifyStats {
        seeds: seeds.valid_count(),
        seed_absrel: score(&state)?,
        iterations: Vec::new(),
        converged: false,
    };
    let mut frontier: Vec<usize> = seeds.iter_valid().map(|(i, _)| i).collect();

    for iteration in 1..=cfg.max_outer_iters {
        state.iteration = iteration;
        let (propagated, prop_added) = propagate_from(&state, inputs.cues, cfg, &frontier)?;
        let known: Vec<usize> = (0..propagated.len()).filter(|&i| propagated.known[i]).collect();
        let (mut estimated, est_added) = estimate_from(&propagated, inputs.cues, inputs.field, cfg, &known)?;
        let mut added = prop_added.clone();
        added.extend_from_slice(&est_added);
        added.sort_unstable();
        let rejected = validate(&mut estimated, &added, inputs.reference, cfg)?;
        let net = added.len() - rejected;
        state = if net > 0 {
            tv_smooth(&estimated, inputs.image, cfg)?
        } else {
            estimated
        };
        let total = state.known_count();
        stats.iterations.push(IterationStats {
            iteration,
            propagated: prop_added.len(),
            estimated: est_added.len(),
            rejected,
            total,
            absrel: score(&state)?,
        });
        if (net as f64) < cfg.convergence_ratio * total as f64 {
            stats.converged = true;
            break;
        }
        frontier = added.into_iter().filter(|&i| state.known[i]).collect();
    }
    Ok(DensifyOutput {
        depth: state.depth()?,
        provenance: state.provenance,
        origin: state.origin,
        stats,
    })
}
