//! Command-line flags. Every flag is turned into a dotted-key override of
//! the configuration, so flags and files share one validation path.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use crate::config::{parse_override, KeyframePaths};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "polardepth", version, about = "Polarimetric dense depth reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic scene: channels, ground truth, seeds and prior.
    Render(RenderArgs),
    /// Densify sparse seeds into dense depth maps.
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against ground truth.
    Evaluate(EvaluateArgs),
    /// Render, reconstruct and evaluate in one run.
    Pipeline(PipelineArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Render(_) => "render",
            Command::Reconstruct(_) => "reconstruct",
            Command::Evaluate(_) => "evaluate",
            Command::Pipeline(_) => "pipeline",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Render(a) => &a.common,
            Command::Reconstruct(a) => &a.common,
            Command::Evaluate(a) => &a.common,
            Command::Pipeline(a) => &a.common,
        }
    }

    /// Overrides in increasing precedence: `--set` first, then typed flags.
    pub fn overrides(&self) -> CliResult<Vec<(String, Value)>> {
        let common = self.common();
        let mut out: Vec<(String, Value)> = common
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<CliResult<_>>()?;
        push(&mut out, "threads", common.threads.map(|n| n as i64));
        match self {
            Command::Render(a) => a.scene.push_to(&mut out),
            Command::Reconstruct(a) => {
                a.densify.push_to(&mut out);
                a.inputs.push_to(&mut out)?;
            }
            Command::Evaluate(a) => {
                a.eval.push_to(&mut out);
                a.inputs.push_to(&mut out)?;
            }
            Command::Pipeline(a) => {
                a.scene.push_to(&mut out);
                a.densify.push_to(&mut out);
                a.eval.push_to(&mut out);
            }
        }
        Ok(out)
    }
}

fn push<V: Into<Value>>(out: &mut Vec<(String, Value)>, key: &str, v: Option<V>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.into()));
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.to_string_lossy().into_owned())
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (TOML), or a manifest of an earlier run to replay.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
    /// Override any configuration key, e.g. `--set render.seed=7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory; the run manifest is written here.
    #[arg(long, value_name = "DIR", default_value = "polardepth-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SceneFlags {
    /// Built-in scene: plane, two-plane, two-wall, sphere, box, room [default: two-plane]
    #[arg(long)]
    pub fixture: Option<String>,
    /// Scene description file, as written to scene.toml by `render`.
    #[arg(long, value_name = "FILE")]
    pub scene_file: Option<PathBuf>,
    /// Image width in pixels [default: 640]
    #[arg(long)]
    pub width: Option<usize>,
    /// Image height in pixels [default: 480]
    #[arg(long)]
    pub height: Option<usize>,
    /// Root seed of all random streams [default: 0]
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Fraction of valid pixels sampled as seeds [default: 0.01]
    #[arg(long)]
    pub seed_fraction: Option<f64>,
    /// Relative standard deviation of seed-depth noise [default: 0]
    #[arg(long)]
    pub seed_noise: Option<f64>,
    /// Channel noise standard deviation relative to peak radiance [default: 0]
    #[arg(long)]
    pub channel_noise: Option<f64>,
}

impl SceneFlags {
    fn push_to(&self, out: &mut Vec<(String, Value)>) {
        push(out, "render.fixture", self.fixture.clone());
        push(out, "render.scene_file", path_value(&self.scene_file));
        push(out, "render.width", self.width.map(|v| v as i64));
        push(out, "render.height", self.height.map(|v| v as i64));
        push(out, "render.seed", self.seed.map(|v| v as i64));
        push(out, "render.seed_fraction", self.seed_fraction);
        push(out, "render.seed_noise", self.seed_noise);
        push(out, "render.channel_noise", self.channel_noise);
    }
}

/// Densification parameters. The bracketed defaults are checked against
/// the library defaults by a unit test.
#[derive(Debug, Args)]
pub struct DensifyFlags {
    /// Consistency threshold as a fraction of the depth range [default: 0.01]
    #[arg(long, allow_negative_numbers = true)]
    pub consistency_frac: Option<f64>,
    /// Largest azimuth change a propagation walk crosses, radians [default: 0.5235987755982989]
    #[arg(long, allow_negative_numbers = true)]
    pub azimuth_stop: Option<f64>,
    /// TV regularization weight [default: 0.3]
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Edge sensitivity of the TV weights [default: 3]
    #[arg(long, allow_negative_numbers = true)]
    pub zeta: Option<f64>,
    /// Primal-dual iterations per smoothing pass [default: 3]
    #[arg(long)]
    pub tv_iters: Option<usize>,
    /// Stop once added/total falls below this [default: 0.1]
    #[arg(long, allow_negative_numbers = true)]
    pub convergence_ratio: Option<f64>,
    /// Cap on outer iterations [default: 20]
    #[arg(long)]
    pub max_outer_iters: Option<usize>,
    /// In-loop validation: two-view or median [default: two-view]
    #[arg(long)]
    pub validation: Option<String>,
    /// Smooth log-depth instead of depth [default: false]
    #[arg(long, value_name = "BOOL")]
    pub log_depth: Option<bool>,
    /// Refractive index [default: 1.5]
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Stokes noise floor relative to peak radiance [default: 0.001]
    #[arg(long, allow_negative_numbers = true)]
    pub noise_floor: Option<f64>,
    /// How prior values relate to depth: depth or disparity [default: disparity]
    #[arg(long)]
    pub prior_space: Option<String>,
    /// Prior zenith reference: optical-axis or view-ray [default: optical-axis]
    #[arg(long)]
    pub viewing: Option<String>,
    /// Prior gradients below this fraction of its range have no direction [default: 0.0001]
    #[arg(long, allow_negative_numbers = true)]
    pub min_gradient_rel: Option<f64>,
    /// Voxel edge for merging keyframe clouds, meters [default: 0.01]
    #[arg(long, allow_negative_numbers = true)]
    pub voxel: Option<f64>,
}

impl DensifyFlags {
    fn push_to(&self, out: &mut Vec<(String, Value)>) {
        let d = "reconstruct.densify";
        push(out, &format!("{d}.consistency_frac"), self.consistency_frac);
        push(out, &format!("{d}.azimuth_stop"), self.azimuth_stop);
        push(out, &format!("{d}.lambda"), self.lambda);
        push(out, &format!("{d}.zeta"), self.zeta);
        push(out, &format!("{d}.tv_iters"), self.tv_iters.map(|v| v as i64));
        push(out, &format!("{d}.convergence_ratio"), self.convergence_ratio);
        push(out, &format!("{d}.max_outer_iters"), self.max_outer_iters.map(|v| v as i64));
        push(out, &format!("{d}.validation"), self.validation.clone());
        push(out, &format!("{d}.log_depth"), self.log_depth);
        push(out, "reconstruct.eta", self.eta);
        push(out, "reconstruct.noise_floor", self.noise_floor);
        push(out, "reconstruct.prior.space", self.prior_space.clone());
        push(out, "reconstruct.prior.viewing", self.viewing.clone());
        push(out, "reconstruct.prior.min_gradient_rel", self.min_gradient_rel);
        push(out, "reconstruct.voxel", self.voxel);
    }
}

#[derive(Debug, Args)]
pub struct EvalFlags {
    /// Plane-distance thresholds as fractions of the depth span
    /// [default: 0.0025,0.005,0.01,0.02,0.03,0.05]
    #[arg(long, value_delimiter = ',')]
    pub threshold_fracs: Option<Vec<f64>>,
}

impl EvalFlags {
    fn push_to(&self, out: &mut Vec<(String, Value)>) {
        push(
            out,
            "evaluate.threshold_fracs",
            self.threshold_fracs.as_ref().map(|v| Value::Array(v.iter().map(|&t| t.into()).collect())),
        );
    }
}

#[derive(Debug, Args)]
pub struct ReconstructInputs {
    /// Output directory of `render`; supplies every input below.
    #[arg(long, value_name = "DIR")]
    pub render_dir: Option<PathBuf>,
    /// Camera file: depth_range plus one [[keyframe]] record per frame.
    #[arg(long, value_name = "FILE")]
    pub cameras: Option<PathBuf>,
    /// Single keyframe: stem of <STEM>_p000.png … <STEM>_p135.png.
    #[arg(long, value_name = "STEM", requires_all = ["seeds", "prior"])]
    pub channels: Option<PathBuf>,
    /// Single keyframe: sparse seed depth PFM.
    #[arg(long, value_name = "FILE", requires = "channels")]
    pub seeds: Option<PathBuf>,
    /// Single keyframe: relative depth prior PFM.
    #[arg(long, value_name = "FILE", requires = "channels")]
    pub prior: Option<PathBuf>,
    /// Single keyframe: ground-truth depth PFM, enables AbsRel in the stats.
    #[arg(long, value_name = "FILE", requires = "channels")]
    pub gt: Option<PathBuf>,
}

impl ReconstructInputs {
    fn push_to(&self, out: &mut Vec<(String, Value)>) -> CliResult<()> {
        push(out, "inputs.render_dir", path_value(&self.render_dir));
        push(out, "inputs.cameras", path_value(&self.cameras));
        if self.channels.is_some() {
            let kf = KeyframePaths {
                channels: self.channels.clone(),
                seeds: self.seeds.clone(),
                prior: self.prior.clone(),
                ground_truth: self.gt.clone(),
                labels: None,
            };
            out.push(("inputs.keyframes".into(), keyframes_value(kf)?));
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct EvaluateInputs {
    /// Output directory of `reconstruct`.
    #[arg(long, value_name = "DIR")]
    pub reconstruction: Option<PathBuf>,
    /// Output directory of `render`; supplies ground truth and scene planes.
    #[arg(long, value_name = "DIR")]
    pub render_dir: Option<PathBuf>,
    /// Camera file; defaults to the one next to the reconstruction.
    #[arg(long, value_name = "FILE")]
    pub cameras: Option<PathBuf>,
    /// Single keyframe: ground-truth depth PFM.
    #[arg(long, value_name = "FILE")]
    pub gt: Option<PathBuf>,
    /// Single keyframe: plane label PFM, negative for unlabeled pixels.
    #[arg(long, value_name = "FILE", requires = "gt")]
    pub labels: Option<PathBuf>,
}

impl EvaluateInputs {
    fn push_to(&self, out: &mut Vec<(String, Value)>) -> CliResult<()> {
        push(out, "inputs.reconstruction_dir", path_value(&self.reconstruction));
        push(out, "inputs.render_dir", path_value(&self.render_dir));
        push(out, "inputs.cameras", path_value(&self.cameras));
        if self.gt.is_some() {
            let kf = KeyframePaths {
                ground_truth: self.gt.clone(),
                labels: self.labels.clone(),
                ..KeyframePaths::default()
            };
            out.push(("inputs.keyframes".into(), keyframes_value(kf)?));
        }
        Ok(())
    }
}

fn keyframes_value(kf: KeyframePaths) -> CliResult<Value> {
    let table = Value::try_from(kf).map_err(|e| CliError::config(format!("keyframe paths: {e}")))?;
    Ok(Value::Array(vec![table]))
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scene: SceneFlags,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub densify: DensifyFlags,
    #[command(flatten)]
    pub inputs: ReconstructInputs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub eval: EvalFlags,
    #[command(flatten)]
    pub inputs: EvaluateInputs,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub scene: SceneFlags,
    #[command(flatten)]
    pub densify: DensifyFlags,
    #[command(flatten)]
    pub eval: EvalFlags,
}
