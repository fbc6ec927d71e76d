//! `reconstruct`: densifies every keyframe and merges the clouds.

use std::io::Write;
use std::path::{Path, PathBuf};

use polardepth::densify::{reconstruct_sequence, DensifyStats, KeyframeData};
use polardepth::io::{read_polar_frame, write_azimuth_wheel, write_labels_png, write_u8_png};
use serde::{Deserialize, Serialize};

use crate::config::{Config, KeyframePaths};
use crate::error::{at, CliError, CliResult, Phase};
use crate::files::{
    create_dir, create_file, kf_file, kf_stem, load_depth, load_prior, read_toml, save_depth, save_grid, write_toml,
    CamerasFile, CAMERAS_FILE, CLOUD_FILE, STATS_FILE,
};
use crate::manifest::Run;

const STAGE: &str = "reconstruct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeStats {
    pub index: usize,
    /// Seeds read from disk, before the two-view consistency filter.
    pub input_seeds: usize,
    pub valid: usize,
    pub densify: DensifyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub keyframe: Vec<KeyframeStats>,
}

/// Keyframe files and the camera file, from explicit paths or a render
/// directory.
pub fn keyframe_sources(cfg: &Config) -> CliResult<(Vec<KeyframePaths>, PathBuf)> {
    let inputs = &cfg.inputs;
    let cameras = inputs
        .cameras
        .clone()
        .or_else(|| inputs.render_dir.as_ref().map(|d| d.join(CAMERAS_FILE)));
    let Some(cameras) = cameras else {
        return Err(CliError::config(
            "`inputs.cameras` is required when `inputs.render_dir` is not set",
        ));
    };
    if !inputs.keyframes.is_empty() {
        return Ok((inputs.keyframes.clone(), cameras));
    }
    let Some(dir) = &inputs.render_dir else {
        return Err(CliError::config(
            "`inputs.render_dir` or `inputs.keyframes` must be set",
        ));
    };
    Ok((render_dir_keyframes(dir, None), cameras))
}

/// The layout `render` writes. With `count` unset, keyframes are listed
/// while their seed files exist.
pub fn render_dir_keyframes(dir: &Path, count: Option<usize>) -> Vec<KeyframePaths> {
    (0..)
        .take_while(|&k| count.map_or_else(|| kf_file(dir, k, "seeds.pfm").exists(), |n| k < n))
        .map(|k| KeyframePaths {
            channels: Some(kf_stem(dir, k)),
            seeds: Some(kf_file(dir, k, "seeds.pfm")),
            prior: Some(kf_file(dir, k, "prior.pfm")),
            ground_truth: Some(kf_file(dir, k, "gt_depth.pfm")).filter(|p| p.exists()),
            labels: Some(kf_file(dir, k, "gt_surface.pfm")).filter(|p| p.exists()),
        })
        .collect()
}

fn required<'a>(p: &'a Option<PathBuf>, k: usize, key: &str) -> CliResult<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| CliError::config(format!("`inputs.keyframes[{k}].{key}` is required")))
}

pub fn reconstruct(cfg: &Config, out: &Path, run: &mut Run) -> CliResult<()> {
    let (sources, cameras_path) = keyframe_sources(cfg)?;
    if sources.is_empty() {
        return Err(CliError::io(STAGE, "no keyframe found in `inputs.render_dir`"));
    }
    let cameras_file: CamerasFile = read_toml(run, STAGE, &cameras_path)?;
    let cameras = cameras_file.cameras(STAGE)?;
    if cameras.len() < sources.len() {
        return Err(CliError::io(
            STAGE,
            format!(
                "`{}` has {} camera(s) for {} keyframe(s)",
                cameras_path.display(),
                cameras.len(),
                sources.len()
            ),
        ));
    }
    let range = cameras_file.depth_range;

    let mut frames = Vec::with_capacity(sources.len());
    for (k, (src, camera)) in sources.iter().zip(cameras).enumerate() {
        let stem = required(&src.channels, k, "channels")?;
        for c in 0..4 {
            run.input(polardepth::io::channel_path(stem, c));
        }
        let frame = read_polar_frame(stem).map_err(at(STAGE, Phase::Load))?;
        let seeds = load_depth(run, STAGE, required(&src.seeds, k, "seeds")?, range)?;
        let prior = load_prior(run, STAGE, required(&src.prior, k, "prior")?)?;
        let ground_truth = match &src.ground_truth {
            Some(p) => Some(load_depth(run, STAGE, p, range)?),
            None => None,
        };
        frames.push(KeyframeData { frame, camera, seeds, prior, ground_truth });
    }

    let result = reconstruct_sequence(&frames, &cfg.reconstruct).map_err(at(STAGE, Phase::Compute))?;

    create_dir(STAGE, out)?;
    let mut stats = Vec::with_capacity(frames.len());
    for (k, (kf, res)) in frames.iter().zip(&result.keyframes).enumerate() {
        let (w, h) = kf.camera.dims();
        let depth = &res.output.depth;
        save_depth(run, STAGE, kf_file(out, k, "depth.pfm"), depth)?;
        save_depth(run, STAGE, kf_file(out, k, "inliers.pfm"), &res.inliers)?;
        let codes: Vec<u8> = res.output.provenance.iter().map(|p| p.code()).collect();
        let path = run.output(kf_file(out, k, "provenance.png"));
        write_u8_png(&path, w, h, &codes).map_err(at(STAGE, Phase::Load))?;
        save_grid(run, STAGE, kf_file(out, k, "azimuth.pfm"), &res.cues.azimuth)?;
        save_grid(run, STAGE, kf_file(out, k, "zenith.pfm"), &res.cues.zenith)?;
        let path = run.output(kf_file(out, k, "reflection.png"));
        write_labels_png(&path, w, h, &res.cues.reflection, &res.cues.valid).map_err(at(STAGE, Phase::Load))?;
        let path = run.output(kf_file(out, k, "azimuth.png"));
        write_azimuth_wheel(&path, &res.cues.azimuth, &res.cues.valid).map_err(at(STAGE, Phase::Load))?;
        stats.push(KeyframeStats {
            index: k,
            input_seeds: kf.seeds.valid_count(),
            valid: depth.valid_count(),
            densify: res.output.stats.clone(),
        });
    }
    let path = run.output(out.join(CLOUD_FILE));
    let mut ply = create_file(STAGE, &path)?;
    result.cloud.write_ply(&mut ply).map_err(at(STAGE, Phase::Load))?;
    ply.flush()
        .map_err(|e| CliError::io(STAGE, format!("cannot write `{}`: {e}", path.display())))?;
    write_toml(run, STAGE, out.join(STATS_FILE), &StatsFile { keyframe: stats })?;
    // Evaluation needs the cameras next to the depth maps.
    write_toml(run, STAGE, out.join(CAMERAS_FILE), &cameras_file)
}
