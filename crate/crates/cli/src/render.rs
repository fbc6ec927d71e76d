//! `render`: synthesizes polarizer channels, ground truth, sparse seeds and
//! a relative prior for every keyframe of a scene.

use std::path::Path;

use polardepth::camera::CameraRecord;
use polardepth::image::ImageGrid;
use polardepth::io::{write_labels_png, write_polar_frame};
use polardepth::synth::{
    add_channel_noise, fixture, render_scene, sample_sparse_seeds, simulate_relative_prior, SyntheticScene,
};
use polardepth::CameraModel;

use crate::config::Config;
use crate::error::{at, CliError, CliResult, Phase};
use crate::files::{create_dir, kf_file, kf_stem, read_toml, save_depth, save_grid, write_toml, CamerasFile, SceneFile};
use crate::files::{CAMERAS_FILE, SCENE_FILE};
use crate::manifest::Run;

const STAGE: &str = "render";

/// Independent random streams, one per use.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Channels = 1,
    Seeds = 2,
    Prior = 3,
}

/// Seed of `stream` for keyframe `k`, a SplitMix64 hash of the root seed.
fn derive_seed(root: u64, stream: Stream, k: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(root ^ mix(((stream as u64) << 32) | k as u64))
}

/// Scene and cameras named by the configuration.
pub fn load_scene(cfg: &Config, run: &mut Run) -> CliResult<(SyntheticScene, Vec<CameraModel>)> {
    let r = &cfg.render;
    match &r.scene_file {
        Some(path) => {
            let file: SceneFile = read_toml(run, STAGE, path)?;
            let cams = file
                .camera
                .into_iter()
                .map(|c| CameraModel::try_from(c).map_err(at(STAGE, Phase::Load)))
                .collect::<CliResult<Vec<_>>>()?;
            if cams.is_empty() {
                return Err(CliError::io(STAGE, format!("`{}` lists no camera", path.display())));
            }
            Ok((file.scene, cams))
        }
        None => {
            let fx = fixture(&r.fixture, r.width, r.height).map_err(at(STAGE, Phase::Config))?;
            Ok((fx.scene, fx.cameras))
        }
    }
}

pub fn render(cfg: &Config, out: &Path, run: &mut Run) -> CliResult<()> {
    let r = &cfg.render;
    let (scene, cameras) = load_scene(cfg, run)?;
    scene.validate().map_err(at(STAGE, Phase::Load))?;
    r.prior
        .validate(scene.range)
        .map_err(|e| CliError::config(format!("`render.prior`: {e}")))?;
    create_dir(STAGE, out)?;

    for (k, cam) in cameras.iter().enumerate() {
        let (frame, gt) = render_scene(&scene, cam).map_err(at(STAGE, Phase::Compute))?;
        let frame = if r.channel_noise > 0.0 {
            add_channel_noise(&frame, r.channel_noise, derive_seed(r.seed, Stream::Channels, k))
                .map_err(at(STAGE, Phase::Compute))?
        } else {
            frame
        };
        let stem = kf_stem(out, k);
        write_polar_frame(&frame, &stem).map_err(at(STAGE, Phase::Load))?;
        for c in 0..4 {
            run.output(polardepth::io::channel_path(&stem, c));
        }
        run.output(kf_file(out, k, "polar.toml"));

        save_depth(run, STAGE, kf_file(out, k, "gt_depth.pfm"), &gt.depth)?;
        save_grid(run, STAGE, kf_file(out, k, "gt_aolp.pfm"), &gt.aolp)?;
        save_grid(run, STAGE, kf_file(out, k, "gt_dolp.pfm"), &gt.dolp)?;
        save_grid(run, STAGE, kf_file(out, k, "gt_zenith.pfm"), &gt.zenith_true)?;
        save_grid(run, STAGE, kf_file(out, k, "gt_azimuth.pfm"), &gt.azimuth_true)?;
        let (w, h) = cam.dims();
        let labels = run.output(kf_file(out, k, "gt_labels.png"));
        write_labels_png(&labels, w, h, &gt.reflection, gt.depth.mask()).map_err(at(STAGE, Phase::Load))?;
        let surface = ImageGrid::new(
            w,
            h,
            1,
            gt.surface.iter().map(|s| s.map_or(-1.0, |i| i as f64)).collect(),
        )
        .map_err(at(STAGE, Phase::Compute))?;
        save_grid(run, STAGE, kf_file(out, k, "gt_surface.pfm"), &surface)?;

        let seeds = sample_sparse_seeds(&gt, r.seed_fraction, r.seed_noise, derive_seed(r.seed, Stream::Seeds, k))
            .map_err(at(STAGE, Phase::Compute))?;
        save_depth(run, STAGE, kf_file(out, k, "seeds.pfm"), &seeds)?;
        let prior = simulate_relative_prior(&gt, r.prior, &r.surface_bias, derive_seed(r.seed, Stream::Prior, k))
            .map_err(at(STAGE, Phase::Compute))?;
        save_depth(run, STAGE, kf_file(out, k, "prior.pfm"), &prior)?;
    }

    write_toml(run, STAGE, out.join(CAMERAS_FILE), &CamerasFile::new(scene.range, &cameras))?;
    let scene_file = SceneFile {
        scene,
        camera: cameras.into_iter().map(CameraRecord::from).collect(),
        render: Some(r.clone()),
    };
    write_toml(run, STAGE, out.join(SCENE_FILE), &scene_file)
}
