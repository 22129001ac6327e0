//! Command-line front end for the `vee-ww` model library.

pub mod config;
pub mod error;
pub mod run;
pub mod svg;

use std::io::Write;
use std::path::Path;

pub use config::{Mode, Overrides, Preset, RunConfig};
pub use error::CliError;

/// Where the unresolved configuration comes from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Defaults,
    File(&'a Path),
    Preset(Preset),
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(CliError::Io)
}

/// Resolves the configuration, runs `mode` and writes its outputs.
pub fn execute(mode: Mode, source: Source<'_>, overrides: &Overrides, svg: Option<&Path>) -> Result<(), CliError> {
    let raw = match source {
        Source::Defaults => RunConfig::default(),
        Source::File(p) => config::load_config(p)?,
        Source::Preset(p) => config::preset(p),
    };
    let cfg = config::resolve(raw, mode, overrides)?;
    if svg.is_some() && mode != Mode::TauCurve {
        return Err(CliError::Config("--svg is only available in tau-curve mode".into()));
    }
    let body = run::render(&cfg)?;
    let plot = svg.map(|_| run::tau_curve_svg(&cfg)).transpose()?;
    match &cfg.output.path {
        Some(p) => write_file(p, &body)?,
        None => std::io::stdout().lock().write_all(body.as_bytes())?,
    }
    if let (Some(path), Some(plot)) = (svg, plot) {
        write_file(path, &plot)?;
    }
    Ok(())
}
