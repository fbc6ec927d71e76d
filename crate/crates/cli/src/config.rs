//! Run configuration: a TOML file layered over the defaults, with
//! command-line overrides layered over the file.
//!
//! Layers are merged as TOML tables before deserialization, so every
//! default has one source and unknown keys are reported with their full
//! dotted path. Tables carrying a `kind` tag (tagged enums such as
//! `render.prior`) are replaced wholesale instead of merged.

use std::fs;
use std::path::{Path, PathBuf};

use polardepth::densify::SequenceOptions;
use polardepth::prior::{PriorOptions, PriorSpace};
use polardepth::synth::{PriorWarp, SurfaceBias, FIXTURE_NAMES};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Worker threads; 0 picks one per core. Never changes results.
    pub threads: usize,
    pub render: RenderConfig,
    pub reconstruct: SequenceOptions,
    pub evaluate: EvaluateConfig,
    pub inputs: Inputs,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            threads: 0,
            render: RenderConfig::default(),
            // Monocular networks predict disparity-like values.
            reconstruct: SequenceOptions {
                prior: PriorOptions {
                    space: PriorSpace::Disparity,
                    ..PriorOptions::default()
                },
                ..SequenceOptions::default()
            },
            evaluate: EvaluateConfig::default(),
            inputs: Inputs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    /// Built-in scene name; ignored when `scene_file` is set.
    pub fixture: String,
    /// TOML scene description (`scene` plus `camera` list), as written to
    /// `scene.toml` by `render`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_file: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    /// Root of every random stream of the run.
    pub seed: u64,
    pub seed_fraction: f64,
    /// Relative standard deviation of the multiplicative seed-depth noise.
    pub seed_noise: f64,
    /// Channel noise standard deviation as a fraction of the peak radiance.
    pub channel_noise: f64,
    pub prior: PriorWarp,
    pub surface_bias: SurfaceBias,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            fixture: "two-plane".into(),
            scene_file: None,
            width: 640,
            height: 480,
            seed: 0,
            seed_fraction: 0.01,
            seed_noise: 0.0,
            channel_noise: 0.0,
            prior: PriorWarp::Disparity { a: 1.0, b: 0.0 },
            surface_bias: SurfaceBias::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Plane-distance thresholds as fractions of the scene's depth span.
    pub threshold_fracs: Vec<f64>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            threshold_fracs: vec![0.0025, 0.005, 0.01, 0.02, 0.03, 0.05],
        }
    }
}

/// Input locations. `render_dir` names a `render` output directory and
/// supplies everything a reconstruction needs; explicit paths describe
/// external data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction_dir: Option<PathBuf>,
    /// Camera file: depth range plus one `keyframe` record per frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cameras: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub keyframes: Vec<KeyframePaths>,
}

/// Files of one keyframe. `reconstruct` needs the first three; `evaluate`
/// reads the last two.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyframePaths {
    /// Stem of `<stem>_p000.png` … `<stem>_p135.png` and `<stem>_polar.toml`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    /// Per-pixel plane label PFM (negative for none).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

impl Config {
    /// Range and consistency checks not expressible in the types. Messages
    /// name the offending key.
    pub fn validate(&self) -> CliResult<()> {
        self.reconstruct
            .validate()
            .map_err(|e| CliError::config(format!("in [reconstruct]: {}", strip(&e))))?;
        let r = &self.render;
        if r.scene_file.is_none() && !FIXTURE_NAMES.contains(&r.fixture.as_str()) {
            return Err(CliError::config(format!(
                "`render.fixture` must be one of {}, got `{}`",
                FIXTURE_NAMES.join(", "),
                r.fixture
            )));
        }
        if r.width < 8 || r.height < 8 {
            return Err(CliError::config(format!(
                "`render.width` and `render.height` must be at least 8, got {}x{}",
                r.width, r.height
            )));
        }
        // Manifests store the seed as a TOML integer.
        if r.seed > i64::MAX as u64 {
            return Err(CliError::config(format!("`render.seed` must be at most {}, got {}", i64::MAX, r.seed)));
        }
        if !(r.seed_fraction > 0.0 && r.seed_fraction <= 1.0) {
            return Err(CliError::config(format!(
                "`render.seed_fraction` must be in (0, 1], got {}",
                r.seed_fraction
            )));
        }
        for (key, v) in [("seed_noise", r.seed_noise), ("channel_noise", r.channel_noise)] {
            if !(v >= 0.0 && v < 1.0) {
                return Err(CliError::config(format!("`render.{key}` must be in [0, 1), got {v}")));
            }
        }
        let fracs = &self.evaluate.threshold_fracs;
        if fracs.is_empty() || fracs.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::config(
                "`evaluate.threshold_fracs` must be a non-empty list of positive numbers",
            ));
        }
        Ok(())
    }
}

fn strip(e: &polardepth::Error) -> String {
    match e {
        polardepth::Error::InvalidInput(m) => m.clone(),
        other => other.to_string(),
    }
}

/// One `key=value` override; `value` is parsed as a TOML value and falls
/// back to a bare string.
pub fn parse_override(text: &str) -> CliResult<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config(format!("override `{text}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Parses `text` as a config file. A run manifest is accepted as well, in
/// which case its `config` table is used and `command` must match.
pub fn parse_layer(text: &str, origin: &Path, command: &str) -> CliResult<Table> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config(format!("{}: {}", origin.display(), e.message())))?;
    if let Some(cmd) = table.get("command") {
        if cmd.as_str() != Some(command) {
            return Err(CliError::config(format!(
                "{} is a manifest of `{}`, not `{command}`",
                origin.display(),
                cmd
            )));
        }
        return match table.remove("config") {
            Some(Value::Table(t)) => Ok(t),
            _ => Err(CliError::config(format!(
                "{} is a manifest without a `config` table (the run failed before configuring)",
                origin.display()
            ))),
        };
    }
    Ok(table)
}

/// Resolves the configuration: defaults, then the file, then overrides.
pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)], command: &str) -> CliResult<Config> {
    let mut table = Table::try_from(Config::default())
        .map_err(|e| CliError::config(format!("cannot serialize defaults: {e}")))?;
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io("config", format!("cannot read `{}`: {e}", path.display())))?;
        merge(&mut table, parse_layer(&text, path, command)?);
    }
    for (key, value) in overrides {
        set_path(&mut table, key, value.clone())?;
    }
    let config: Config = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

fn merge(base: &mut Table, layer: Table) {
    for (k, v) in layer {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(l)) if !l.contains_key("kind") => merge(b, l),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(table: &mut Table, key: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for (depth, part) in parts.iter().enumerate() {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(CliError::config(format!(
                    "`{}` is not a table, cannot set `{key}`",
                    parts[..=depth].join(".")
                )))
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn to_toml<T: Serialize>(value: &T) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::io("write", format!("cannot serialize: {e}")))
}
