//! File names shared by the subcommands and the structured-text files
//! that travel between them.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use polardepth::camera::CameraRecord;
use polardepth::image::ImageGrid;
use polardepth::io::{read_depth_pfm, read_pfm, write_depth_pfm, write_pfm};
use polardepth::synth::SyntheticScene;
use polardepth::{CameraModel, DepthMap, DepthRange};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RenderConfig;
use crate::error::{at, CliError, CliResult, Phase};
use crate::manifest::Run;

pub const CAMERAS_FILE: &str = "cameras.toml";
pub const SCENE_FILE: &str = "scene.toml";
pub const STATS_FILE: &str = "stats.toml";
pub const REPORT_FILE: &str = "report.toml";
pub const CURVES_FILE: &str = "plane_curves.csv";
pub const CLOUD_FILE: &str = "cloud.ply";

/// `<dir>/kf<k>_<suffix>`.
pub fn kf_file(dir: &Path, k: usize, suffix: &str) -> PathBuf {
    dir.join(format!("kf{k}_{suffix}"))
}

/// Stem of keyframe `k`'s channel PNGs.
pub fn kf_stem(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("kf{k}"))
}

/// Depth range plus one camera per keyframe, in capture order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamerasFile {
    pub depth_range: DepthRange,
    pub keyframe: Vec<CameraRecord>,
}

impl CamerasFile {
    pub fn new(range: DepthRange, cameras: &[CameraModel]) -> Self {
        CamerasFile {
            depth_range: range,
            keyframe: cameras.iter().cloned().map(CameraRecord::from).collect(),
        }
    }

    pub fn cameras(&self, stage: &'static str) -> CliResult<Vec<CameraModel>> {
        self.keyframe
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, r)| {
                CameraModel::try_from(r)
                    .map_err(|e| CliError::io(stage, format!("camera of keyframe {k}: {e}")))
            })
            .collect()
    }
}

/// A scene with its cameras; `render` also records the parameters it ran
/// with, which are ignored on input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub scene: SyntheticScene,
    pub camera: Vec<CameraRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub render: Option<RenderConfig>,
}

pub fn read_toml<T: DeserializeOwned>(run: &mut Run, stage: &'static str, path: &Path) -> CliResult<T> {
    let path = run.input(path.to_path_buf());
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::io(stage, format!("cannot read `{}`: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        CliError::io(stage, format!("malformed `{}`: {}", path.display(), e.message()))
    })
}

pub fn write_toml<T: Serialize>(run: &mut Run, stage: &'static str, path: PathBuf, value: &T) -> CliResult<()> {
    let path = run.output(path);
    let text = toml::to_string(value)
        .map_err(|e| CliError::io(stage, format!("cannot serialize `{}`: {e}", path.display())))?;
    fs::write(&path, text).map_err(|e| CliError::io(stage, format!("cannot write `{}`: {e}", path.display())))
}

pub fn create_dir(stage: &'static str, dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(stage, format!("cannot create `{}`: {e}", dir.display())))
}

pub fn create_file(stage: &'static str, path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(stage, format!("cannot create `{}`: {e}", path.display())))
}

/// Prefixes library I/O errors with the file they concern.
fn with_path<'a>(stage: &'static str, path: &'a Path) -> impl Fn(polardepth::Error) -> CliError + 'a {
    move |e| {
        let mut err = CliError::from_core(stage, Phase::Load, e);
        if !err.message.contains(&*path.to_string_lossy()) {
            err.message = format!("`{}`: {}", path.display(), err.message);
        }
        err
    }
}

pub fn save_depth(run: &mut Run, stage: &'static str, path: PathBuf, depth: &DepthMap) -> CliResult<()> {
    let path = run.output(path);
    write_depth_pfm(depth, &path).map_err(with_path(stage, &path))
}

pub fn save_grid(run: &mut Run, stage: &'static str, path: PathBuf, grid: &ImageGrid) -> CliResult<()> {
    let path = run.output(path);
    let file = create_file(stage, &path)?;
    write_pfm(grid, file).map_err(with_path(stage, &path))
}

pub fn load_depth(run: &mut Run, stage: &'static str, path: &Path, range: DepthRange) -> CliResult<DepthMap> {
    let path = run.input(path.to_path_buf());
    read_depth_pfm(&path, range).map_err(with_path(stage, &path))
}

pub fn load_grid(run: &mut Run, stage: &'static str, path: &Path) -> CliResult<ImageGrid> {
    let path = run.input(path.to_path_buf());
    let file = File::open(&path).map_err(|e| CliError::io(stage, format!("cannot open `{}`: {e}", path.display())))?;
    read_pfm(file).map_err(with_path(stage, &path))
}

/// A relative prior has no metric range; its own positive value bounds
/// serve as one.
pub fn load_prior(run: &mut Run, stage: &'static str, path: &Path) -> CliResult<DepthMap> {
    let grid = load_grid(run, stage, path)?;
    let (lo, hi) = grid
        .data()
        .iter()
        .filter(|v| **v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return Err(CliError::io(stage, format!("prior `{}` has no positive samples", path.display())));
    }
    let range = DepthRange::new(lo, if hi > lo { hi } else { lo * (1.0 + 1e-9) }).map_err(at(stage, Phase::Load))?;
    let (w, h) = grid.dims();
    DepthMap::from_values(w, h, grid.into_data(), range).map_err(with_path(stage, path))
}

/// Plane labels: non-negative samples are label indices, the rest none.
pub fn load_labels(run: &mut Run, stage: &'static str, path: &Path) -> CliResult<(usize, usize, Vec<Option<usize>>)> {
    let grid = load_grid(run, stage, path)?;
    let (w, h) = grid.dims();
    let labels = grid
        .data()
        .iter()
        .map(|&v| (v >= 0.0 && v.is_finite()).then(|| v.round() as usize))
        .collect();
    Ok((w, h, labels))
}
