//! `evaluate`: AbsRel, density trace and plane-accuracy curves of a
//! reconstruction against ground truth.

use std::path::{Path, PathBuf};

use polardepth::eval::{absrel, plane_accuracy, plane_accuracy_against, EvalReport, Plane, TracePoint};
use polardepth::{backproject, CameraModel};
use serde::Serialize;

use crate::config::{Config, KeyframePaths};
use crate::error::{at, CliError, CliResult, Phase};
use crate::files::{
    create_dir, kf_file, load_depth, load_labels, read_toml, write_toml, CamerasFile, SceneFile, CAMERAS_FILE,
    CURVES_FILE, REPORT_FILE, SCENE_FILE, STATS_FILE,
};
use crate::manifest::Run;
use crate::reconstruct::{render_dir_keyframes, KeyframeStats, StatsFile};

const STAGE: &str = "evaluate";

/// Which planes the curves measure distances to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Planes of the synthetic scene.
    Truth,
    /// Robust fits to each labeled point set.
    Fitted,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyframeReport {
    pub index: usize,
    pub reference: Reference,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    /// Depth span the relative thresholds are scaled by, meters.
    pub depth_span_m: f64,
    pub thresholds_m: Vec<f64>,
    pub keyframe: Vec<KeyframeReport>,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    keyframe: usize,
    label: usize,
    reference: Reference,
    threshold_m: f64,
    inlier_fraction: f64,
    points: usize,
    depth_span_m: f64,
}

fn trace(stats: &KeyframeStats) -> Vec<TracePoint> {
    let d = &stats.densify;
    std::iter::once(TracePoint { iteration: 0, count: d.seeds, absrel: d.seed_absrel })
        .chain(d.iterations.iter().map(|it| TracePoint {
            iteration: it.iteration,
            count: it.total,
            absrel: it.absrel,
        }))
        .collect()
}

pub fn evaluate(cfg: &Config, out: &Path, run: &mut Run) -> CliResult<()> {
    let inputs = &cfg.inputs;
    let Some(recon) = &inputs.reconstruction_dir else {
        return Err(CliError::config("`inputs.reconstruction_dir` is required"));
    };
    let stats: StatsFile = read_toml(run, STAGE, &recon.join(STATS_FILE))?;
    let n = stats.keyframe.len();
    let cameras_path = inputs.cameras.clone().unwrap_or_else(|| recon.join(CAMERAS_FILE));
    let cameras_file: CamerasFile = read_toml(run, STAGE, &cameras_path)?;
    let cameras = cameras_file.cameras(STAGE)?;
    let range = cameras_file.depth_range;
    if cameras.len() < n {
        return Err(CliError::io(STAGE, format!("`{}` has fewer cameras than keyframes", cameras_path.display())));
    }

    let truth: Vec<KeyframePaths> = if !inputs.keyframes.is_empty() {
        inputs.keyframes.clone()
    } else if let Some(dir) = &inputs.render_dir {
        render_dir_keyframes(dir, Some(n))
    } else {
        return Err(CliError::config("`inputs.render_dir` or `inputs.keyframes` must name the ground truth"));
    };
    let scene = match &inputs.render_dir {
        Some(dir) if dir.join(SCENE_FILE).exists() => Some(read_toml::<SceneFile>(run, STAGE, &dir.join(SCENE_FILE))?.scene),
        _ => None,
    };

    let span = range.span();
    let thresholds: Vec<f64> = cfg.evaluate.threshold_fracs.iter().map(|f| f * span).collect();
    let mut reports = Vec::with_capacity(n);
    for (k, stat) in stats.keyframe.iter().enumerate() {
        let src = truth
            .get(k)
            .ok_or_else(|| CliError::config(format!("`inputs.keyframes` lists {} entries for {n} keyframes", truth.len())))?;
        let Some(gt_path) = &src.ground_truth else {
            return Err(CliError::config(format!("`inputs.keyframes[{k}].ground_truth` is required")));
        };
        let depth = load_depth(run, STAGE, &kf_file(recon, k, "depth.pfm"), range)?;
        let gt = load_depth(run, STAGE, gt_path, range)?;
        let cam = &cameras[k];
        let planes = match &scene {
            Some(s) => Some(s.planes_in(cam).map_err(at(STAGE, Phase::Load))?),
            None => None,
        };
        let (reference, plane_curves) =
            curves(run, cam, &depth, src.labels.as_ref(), planes.as_deref(), &thresholds)?;
        reports.push(KeyframeReport {
            index: k,
            reference,
            report: EvalReport {
                absrel: absrel(&depth, &gt).map_err(at(STAGE, Phase::Compute))?,
                valid_count: depth.valid_count(),
                depth_range: (range.min, range.max),
                trace: trace(stat),
                plane_curves,
            },
        });
    }

    create_dir(STAGE, out)?;
    let path = run.output(out.join(CURVES_FILE));
    let mut csv = csv::Writer::from_path(&path)
        .map_err(|e| CliError::io(STAGE, format!("cannot create `{}`: {e}", path.display())))?;
    for kr in &reports {
        for c in &kr.report.plane_curves {
            for p in &c.curve {
                csv.serialize(CurveRow {
                    keyframe: kr.index,
                    label: c.label,
                    reference: kr.reference,
                    threshold_m: p.threshold,
                    inlier_fraction: p.inlier_fraction,
                    points: c.points,
                    depth_span_m: span,
                })
                .map_err(|e| CliError::io(STAGE, format!("`{}`: {e}", path.display())))?;
            }
        }
    }
    csv.flush()
        .map_err(|e| CliError::io(STAGE, format!("`{}`: {e}", path.display())))?;
    let report = ReportFile { depth_span_m: span, thresholds_m: thresholds, keyframe: reports };
    write_toml(run, STAGE, out.join(REPORT_FILE), &report)
}

/// Plane curves of one keyframe. With known scene planes only labels of
/// flat surfaces are measured.
fn curves(
    run: &mut Run,
    cam: &CameraModel,
    depth: &polardepth::DepthMap,
    labels: Option<&PathBuf>,
    planes: Option<&[Option<Plane>]>,
    thresholds: &[f64],
) -> CliResult<(Reference, Vec<polardepth::eval::PlaneCurve>)> {
    let reference = if planes.is_some() { Reference::Truth } else { Reference::Fitted };
    let Some(labels) = labels else {
        return Ok((reference, Vec::new()));
    };
    let (w, h, per_pixel) = load_labels(run, STAGE, labels)?;
    if (w, h) != depth.dims() {
        return Err(CliError::io(
            STAGE,
            format!("labels `{}` are {w}x{h}, the depth map is {:?}", labels.display(), depth.dims()),
        ));
    }
    let cloud = backproject(depth, cam).map_err(at(STAGE, Phase::Compute))?;
    let point_labels: Vec<Option<usize>> = cloud
        .pixels
        .iter()
        .map(|p| {
            let l = p.and_then(|i| per_pixel[i])?;
            match planes {
                Some(planes) => planes.get(l).copied().flatten().map(|_| l),
                None => Some(l),
            }
        })
        .collect();
    let curves = match planes {
        Some(planes) => plane_accuracy_against(&cloud.points, &point_labels, planes, thresholds),
        None => plane_accuracy(&cloud.points, &point_labels, thresholds),
    }
    .map_err(at(STAGE, Phase::Compute))?;
    Ok((reference, curves))
}
