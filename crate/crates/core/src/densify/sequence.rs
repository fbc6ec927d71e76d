use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{backproject, reproject, CameraModel};
use crate::cloud::{merge_voxel, PointCloud};
use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::polarization::{stokes_from_channels, PolarCues, PolarFrame, DEFAULT_ETA};
use crate::prior::{disambiguate, normals_from_prior_with, PriorField, PriorOptions};

use super::config::DensifyConfig;
use super::inliers::extract_inliers;
use super::keyframe::{densify_keyframe, DensifyOutput, KeyframeInputs};

/// Inputs of one keyframe.
#[derive(Debug, Clone)]
pub struct KeyframeData {
    pub frame: PolarFrame,
    pub camera: CameraModel,
    /// Sparse metric depths (multi-view stereo output).
    pub seeds: DepthMap,
    /// Dense relative depth prior.
    pub prior: DepthMap,
    pub ground_truth: Option<DepthMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceOptions {
    pub densify: DensifyConfig,
    pub prior: PriorOptions,
    pub eta: f64,
    /// Stokes noise floor as a fraction of the frame's peak channel radiance.
    pub noise_floor: f64,
    /// Edge of the deduplication voxel for the merged cloud, meters.
    pub voxel: f64,
}

impl Default for SequenceOptions {
    fn default() -> Self {
        SequenceOptions {
            densify: DensifyConfig::default(),
            prior: PriorOptions::default(),
            eta: DEFAULT_ETA,
            noise_floor: 1e-3,
            voxel: 0.01,
        }
    }
}

impl SequenceOptions {
    pub fn validate(&self) -> Result<()> {
        self.densify.validate()?;
        self.prior.validate()?;
        crate::polarization::ZenithSolver::new(self.eta)
            .map_err(|_| Error::invalid(format!("`eta` must lie in [1.3, 1.8], got {}", self.eta)))?;
        if !(self.noise_floor >= 0.0 && self.noise_floor < 1.0) {
            return Err(Error::invalid(format!("`noise_floor` must be in [0, 1), got {}", self.noise_floor)));
        }
        if !(self.voxel > 0.0 && self.voxel.is_finite()) {
            return Err(Error::invalid(format!("`voxel` must be positive, got {}", self.voxel)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KeyframeResult {
    pub cues: PolarCues,
    /// Seeds after the two-view consistency filter (the raw seeds for the
    /// first keyframe).
    pub inliers: DepthMap,
    pub output: DensifyOutput,
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub keyframes: Vec<KeyframeResult>,
    /// All keyframes in world coordinates, voxel-deduplicated.
    pub cloud: PointCloud,
}

/// Prior field and disambiguated cues of one keyframe. The Stokes noise
/// floor scales with the frame's peak channel radiance.
pub fn keyframe_cues(
    frame: &PolarFrame,
    prior: &DepthMap,
    camera: &CameraModel,
    opts: &SequenceOptions,
) -> Result<(PriorField, PolarCues)> {
    let peak = frame
        .channels()
        .iter()
        .flat_map(|c| c.data().iter().copied())
        .fold(0.0f64, f64::max);
    let meas = stokes_from_channels(frame, opts.noise_floor * peak)?;
    let field = normals_from_prior_with(prior, camera, &opts.prior)?;
    let cues = disambiguate(&meas, &field, opts.eta)?;
    Ok((field, cues))
}

/// Reconstructs keyframes in order. From the second keyframe on, seeds are
/// filtered against the previous dense result and in-loop validation
/// compares against it.
pub fn reconstruct_sequence(frames: &[KeyframeData], opts: &SequenceOptions) -> Result<SequenceOutput> {
    opts.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("no keyframes"));
    }
    let mut results: Vec<KeyframeResult> = Vec::with_capacity(frames.len());
    let mut clouds = Vec::with_capacity(frames.len());
    for (t, kf) in frames.iter().enumerate() {
        let (field, cues) = keyframe_cues(&kf.frame, &kf.prior, &kf.camera, opts)?;
        let (inliers, reference) = match t.checked_sub(1) {
            None => (kf.seeds.clone(), None),
            Some(prev) => {
                let prev_depth = &results[prev].output.depth;
                let prev_cam = &frames[prev].camera;
                (
                    extract_inliers(&kf.seeds, prev_depth, &kf.camera, prev_cam, &opts.densify)?,
                    Some(reproject(prev_depth, prev_cam, &kf.camera)?),
                )
            }
        };
        if inliers.valid_count() == 0 {
            return Err(Error::Degenerate(format!(
                "keyframe {t}: no seed survived the two-view consistency check"
            )));
        }
        let image = kf.frame.mean_intensity();
        let output = densify_keyframe(
            KeyframeInputs {
                seeds: &inliers,
                cues: &cues,
                field: &field,
                image: &image,
                reference: reference.as_ref(),
                ground_truth: kf.ground_truth.as_ref(),
            },
            &opts.densify,
        )?;
        clouds.push(keyframe_cloud(&output.depth, &cues, &kf.camera)?);
        results.push(KeyframeResult { cues, inliers, output });
    }
    Ok(SequenceOutput {
        keyframes: results,
        cloud: merge_voxel(&clouds, opts.voxel)?,
    })
}

/// World-frame points of one keyframe with polarimetric normals where the
/// cues are valid.
pub(crate) fn keyframe_cloud(depth: &DepthMap, cues: &PolarCues, cam: &CameraModel) -> Result<PointCloud> {
    let local = backproject(depth, cam)?;
    let mut with_normals = PointCloud::default();
    for (p, pix) in local.points.iter().zip(&local.pixels) {
        let normal = pix.filter(|&i| cues.valid[i]).map(|i| {
            let (phi, theta) = (cues.azimuth.at(i), cues.zenith.at(i));
            Vector3::new(phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos())
        });
        with_normals.push(*p, normal, *pix);
    }
    Ok(with_normals.transformed(&cam.pose().inverse()))
}
