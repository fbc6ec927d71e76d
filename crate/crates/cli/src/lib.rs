//! Command-line front end of `polardepth`.
//!
//! Four subcommands share one configuration model ([`config::Config`]) and
//! one bookkeeping type ([`manifest::Run`]). Every invocation writes
//! `<out>/manifest.toml`, whether it succeeds or not, and exits with
//! 0 on success, 2 on configuration errors, 3 on I/O errors and 4 on
//! numerical failures.

pub mod args;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod files;
pub mod manifest;
pub mod reconstruct;
pub mod render;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use toml::Value;

use crate::args::Cli;
use crate::config::{Config, Inputs};
use crate::error::{CliError, CliResult};
use crate::manifest::Run;

/// Runs `command` with resolved overrides and returns the outcome together
/// with the bookkeeping. The manifest is written before returning.
pub fn execute(command: &str, out: &Path, config_file: Option<&Path>, overrides: &[(String, Value)]) -> (CliResult<()>, Run) {
    let mut run = Run::new(command, out);
    let mut result = dispatch(&mut run, config_file, overrides);
    if let Err(e) = run.write_manifest(&result) {
        if result.is_ok() {
            result = Err(e);
        }
    }
    (result, run)
}

fn dispatch(run: &mut Run, config_file: Option<&Path>, overrides: &[(String, Value)]) -> CliResult<()> {
    if let Some(path) = config_file {
        run.input(path.to_path_buf());
    }
    let cfg = config::resolve(config_file, overrides, &run.command)?;
    run.config = Some(cfg.clone());
    run.threads = cfg.threads;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config(format!("`threads`: {e}")))?;
    let out = run.out.clone();
    pool.install(|| match run.command.as_str() {
        "render" => run.stage("render", |run| render::render(&cfg, &out, run)),
        "reconstruct" => run.stage("reconstruct", |run| reconstruct::reconstruct(&cfg, &out, run)),
        "evaluate" => run.stage("evaluate", |run| evaluate::evaluate(&cfg, &out, run)),
        "pipeline" => pipeline(&cfg, &out, run),
        other => Err(CliError::config(format!("unknown command `{other}`"))),
    })
}

/// Render into `out/render`, reconstruct from the files written there into
/// `out/reconstruct`, evaluate into `out/evaluate`.
pub fn pipeline(cfg: &Config, out: &Path, run: &mut Run) -> CliResult<()> {
    if cfg.inputs != Inputs::default() {
        return Err(CliError::config("`inputs` is not used by `pipeline`; it renders its own"));
    }
    if cfg.render.prior.space() != cfg.reconstruct.prior.space {
        return Err(CliError::config(format!(
            "`reconstruct.prior.space` is {:?} but `render.prior` produces {:?} values",
            cfg.reconstruct.prior.space,
            cfg.render.prior.space()
        )));
    }
    let (render_dir, recon_dir) = (out.join("render"), out.join("reconstruct"));
    run.stage("render", |run| render::render(cfg, &render_dir, run))?;

    let mut stage_cfg = cfg.clone();
    stage_cfg.inputs.render_dir = Some(render_dir);
    run.stage("reconstruct", |run| reconstruct::reconstruct(&stage_cfg, &recon_dir, run))?;

    stage_cfg.inputs.reconstruction_dir = Some(recon_dir);
    run.stage("evaluate", |run| evaluate::evaluate(&stage_cfg, &out.join("evaluate"), run))
}

/// Entry point: parses `args` and runs the command. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return argument_failure(&args, e.to_string());
        }
    };
    let common = cli.command.common();
    let (result, run) = match cli.command.overrides() {
        Ok(ov) => execute(cli.command.name(), &common.out, common.config.as_deref(), &ov),
        Err(e) => {
            let run = Run::new(cli.command.name(), &common.out);
            let result = Err(e);
            let _ = run.write_manifest(&result);
            (result, run)
        }
    };
    match result {
        Ok(()) => {
            eprintln!("{} finished; manifest at {}", run.command, run.out.join(manifest::MANIFEST_FILE).display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// A command line clap rejected still gets a manifest when the subcommand
/// is recognizable, in the `--out` directory if one was given.
fn argument_failure(args: &[OsString], message: String) -> i32 {
    let err = CliError::config(message.trim_end().to_string());
    let words: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(command) = words
        .iter()
        .skip(1)
        .find(|w| ["render", "reconstruct", "evaluate", "pipeline"].contains(&w.as_str()))
    else {
        return err.exit_code();
    };
    let out = words
        .iter()
        .position(|w| w == "--out")
        .and_then(|i| words.get(i + 1).cloned())
        .or_else(|| words.iter().find_map(|w| w.strip_prefix("--out=").map(str::to_string)))
        .unwrap_or_else(|| "polardepth-out".to_string());
    let run = Run::new(command, &PathBuf::from(out));
    let _ = run.write_manifest(&Err(err.clone()));
    err.exit_code()
}
