//! Run configuration: JSON file, built-in presets, and flag overrides.
//!
//! A resolved config has every default filled in. Its JSON serialization is
//! the echo embedded in each output file, and feeding an output file back in
//! as `--config` reproduces it exactly.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vee_ww::bath::{gamma_from_dipole, FieldConstants};
use vee_ww::markov::ModelParams;
use vee_ww::RateForm;

use crate::error::{config_err, CliError};

/// Prefix of the echo line in CSV outputs.
pub const CSV_ECHO_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    WeakValue,
    TauCurve,
    Evolve,
    Mc,
    Compare,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::WeakValue => "weak-value",
            Mode::TauCurve => "tau-curve",
            Mode::Evolve => "evolve",
            Mode::Mc => "mc",
            Mode::Compare => "compare",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Fig2,
    Fig3,
}

impl Preset {
    fn source(self) -> &'static str {
        match self {
            Preset::Fig2 => include_str!("../presets/fig2.json"),
            Preset::Fig3 => include_str!("../presets/fig3.json"),
        }
    }
}

/// Parameters in units of gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NaturalParams {
    pub delta_over_gamma: f64,
    pub epsilon: f64,
    pub form: RateForm,
}

impl Default for NaturalParams {
    fn default() -> Self {
        Self {
            delta_over_gamma: 0.1,
            epsilon: 0.2,
            form: RateForm::SmallEpsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub hbar: f64,
    pub epsilon0: f64,
    pub c: f64,
}

impl Default for Constants {
    fn default() -> Self {
        let si = FieldConstants::<f64>::si();
        Self {
            hbar: si.hbar,
            epsilon0: si.epsilon0,
            c: si.c,
        }
    }
}

/// Physical parameters; gamma follows from the dipole strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiParams {
    /// Carrier frequency (rad/s).
    pub omega: f64,
    /// Dipole matrix element magnitude (C m).
    pub eta: f64,
    /// Excited-state splitting (rad/s).
    pub delta: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub form: RateForm,
    #[serde(default)]
    pub constants: Constants,
}

fn default_epsilon() -> f64 {
    NaturalParams::default().epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Either an explicit list of angles or a range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

impl Grid {
    fn range(min: f64, max: f64, count: usize, spacing: Spacing) -> Self {
        Self {
            values: None,
            min: Some(min),
            max: Some(max),
            count: Some(count),
            spacing: Some(spacing),
        }
    }

    /// Validates the grid and fills in the default spacing.
    fn resolve(mut self) -> Result<Self, CliError> {
        let ranged = self.min.is_some() || self.max.is_some() || self.count.is_some() || self.spacing.is_some();
        match (&self.values, ranged) {
            (Some(_), true) => return Err(config_err("grid: give either `values` or a range, not both")),
            (Some(v), false) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(config_err("grid: `values` must be a non-empty list of finite numbers"));
                }
                return Ok(self);
            }
            (None, _) => {}
        }
        let (Some(min), Some(max), Some(count)) = (self.min, self.max, self.count) else {
            return Err(config_err("grid: a range needs `min`, `max` and `count`"));
        };
        let spacing = *self.spacing.get_or_insert(Spacing::Linear);
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(config_err(format!("grid: need finite min <= max, got [{min}, {max}]")));
        }
        if count == 0 || (count == 1 && min != max) {
            return Err(config_err("grid: `count` must be >= 2 for a non-degenerate range"));
        }
        if spacing == Spacing::Log && min <= 0.0 {
            return Err(config_err(format!("grid: log spacing requires min > 0, got {min}")));
        }
        Ok(self)
    }

    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let (min, max, count) = (
            self.min.unwrap_or(0.0),
            self.max.unwrap_or(0.0),
            self.count.unwrap_or(0),
        );
        if count == 1 {
            return vec![min];
        }
        let last = (count - 1) as f64;
        (0..count)
            .map(|i| {
                // Pin the endpoints instead of trusting exp(ln(x)).
                if i == 0 {
                    return min;
                }
                if i + 1 == count {
                    return max;
                }
                let s = i as f64 / last;
                match self.spacing.unwrap_or_default() {
                    Spacing::Linear => min + (max - min) * s,
                    Spacing::Log => (min.ln() + (max.ln() - min.ln()) * s).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Modes,
    Kernel,
    Markov,
}

/// Discretized-bath settings, in units of gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSettings {
    pub cutoff_over_gamma: f64,
    pub n_modes: usize,
    pub dt_gamma: f64,
    pub t_end_gamma: f64,
    pub carrier_over_gamma: f64,
    pub postselect: bool,
    pub integrator: Integrator,
}

impl Default for BathSettings {
    fn default() -> Self {
        Self {
            cutoff_over_gamma: 50.0,
            n_modes: 4096,
            dt_gamma: 0.002,
            t_end_gamma: 3.0,
            carrier_over_gamma: 1000.0,
            postselect: true,
            integrator: Integrator::Modes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McModel {
    /// Exponential law of the post-selected amplitude.
    #[default]
    Markov,
    /// Photodetection density conditioned on the rotated polarization.
    Conditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub n: usize,
    pub seed: u64,
    pub stream: u64,
    /// Thread count; 0 uses all cores. Results do not depend on it.
    pub workers: usize,
    pub model: McModel,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n: 100_000,
            seed: 42,
            stream: 0,
            workers: 0,
            model: McModel::Markov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    /// Destination; stdout when absent. Not part of the echo, so an output
    /// does not depend on where it was written.
    #[serde(default, skip_serializing)]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<NaturalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si: Option<SiParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub bath: BathSettings,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub delta_over_gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub form: Option<RateForm>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
}

/// Parses a config document. Also accepts a previous output, CSV or JSON,
/// and extracts its embedded echo.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let trimmed = text.trim_start_matches('\u{feff}');
    if trimmed.starts_with('#') {
        let echo = trimmed
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix(CSV_ECHO_PREFIX))
            .ok_or_else(|| config_err("no config echo found in CSV header"))?;
        return serde_json::from_str(echo).map_err(|e| config_err(format!("echoed config: {e}")));
    }
    let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| config_err(e.to_string()))?;
    let value = match value {
        serde_json::Value::Object(mut map) if map.get("config").is_some_and(|c| c.is_object()) => {
            map.remove("config").unwrap_or_default()
        }
        other => other,
    };
    serde_json::from_value(value).map_err(|e| config_err(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn preset(p: Preset) -> RunConfig {
    parse_config(p.source()).expect("built-in preset parses")
}

fn default_grid(mode: Mode) -> Option<Grid> {
    match mode {
        Mode::TauCurve => Some(Grid::range(1e-3, FRAC_PI_2, 200, Spacing::Log)),
        Mode::Compare => Some(Grid::range(0.2, FRAC_PI_2, 8, Spacing::Linear)),
        _ => None,
    }
}

fn check_format(mode: Mode, format: Format) -> Result<(), CliError> {
    let ok = match mode {
        Mode::WeakValue => format == Format::Json,
        Mode::Evolve => format == Format::Csv,
        Mode::TauCurve | Mode::Mc | Mode::Compare => true,
    };
    if ok {
        Ok(())
    } else {
        Err(config_err(format!("mode {mode} cannot write {format:?} output")))
    }
}

/// Applies overrides and defaults and validates the result.
pub fn resolve(mut cfg: RunConfig, mode: Mode, ov: &Overrides) -> Result<RunConfig, CliError> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(config_err(format!("config is for mode {m}, not {mode}")));
        }
    }
    cfg.mode = Some(mode);

    match (&mut cfg.params, &mut cfg.si) {
        (Some(_), Some(_)) => return Err(config_err("`params` and `si` blocks are mutually exclusive")),
        (None, None) => cfg.params = Some(NaturalParams::default()),
        _ => {}
    }
    if let Some(p) = cfg.params.as_mut() {
        if let Some(v) = ov.delta_over_gamma {
            p.delta_over_gamma = v;
        }
        if let Some(v) = ov.epsilon {
            p.epsilon = v;
        }
        if let Some(v) = ov.form {
            p.form = v;
        }
    }
    if let Some(s) = cfg.si.as_mut() {
        if ov.delta_over_gamma.is_some() {
            return Err(config_err(
                "--delta-over-gamma conflicts with an `si` block; set `si.delta` instead",
            ));
        }
        if let Some(v) = ov.epsilon {
            s.epsilon = v;
        }
        if let Some(v) = ov.form {
            s.form = v;
        }
        let positive = [s.omega, s.eta, s.constants.hbar, s.constants.epsilon0, s.constants.c]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !positive || !(s.delta.is_finite() && s.delta >= 0.0) {
            return Err(config_err("si: omega, eta and constants must be positive, delta >= 0"));
        }
    }

    cfg.grid = match cfg.grid.take().or_else(|| default_grid(mode)) {
        Some(g) => Some(g.resolve()?),
        None => None,
    };

    if let Some(v) = ov.seed {
        cfg.mc.seed = v;
    }
    if let Some(v) = ov.n {
        cfg.mc.n = v;
    }
    if let Some(p) = &ov.out {
        cfg.output.path = Some(p.clone());
    }
    let format = *cfg.output.format.get_or_insert(match mode {
        Mode::WeakValue => Format::Json,
        Mode::Mc => Format::Json,
        _ => Format::Csv,
    });
    check_format(mode, format)?;

    let b = &cfg.bath;
    if ![b.cutoff_over_gamma, b.dt_gamma, b.t_end_gamma, b.carrier_over_gamma]
        .iter()
        .all(|x| x.is_finite() && *x > 0.0)
    {
        return Err(config_err(
            "bath: cutoff, dt, t_end and carrier must be finite and positive",
        ));
    }
    Ok(cfg)
}

/// The model point a resolved config describes.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub params: ModelParams<f64>,
    pub form: RateForm,
    /// Gamma in 1/s when an `si` block is present.
    pub gamma_si: Option<f64>,
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::WeakValue)
    }

    pub fn point(&self) -> Result<Point, CliError> {
        if let Some(s) = &self.si {
            let c = FieldConstants::new(s.constants.hbar, s.constants.epsilon0, s.constants.c)?;
            let gamma = gamma_from_dipole(s.omega, s.eta, &c);
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(config_err(format!("si block gives gamma = {gamma}")));
            }
            let params = ModelParams::natural(s.delta / gamma, s.epsilon)?;
            return Ok(Point {
                params,
                form: s.form,
                gamma_si: Some(gamma),
            });
        }
        let p = self.params.unwrap_or_default();
        Ok(Point {
            params: ModelParams::natural(p.delta_over_gamma, p.epsilon)?,
            form: p.form,
            gamma_si: None,
        })
    }

    pub fn grid_points(&self) -> Result<Vec<f64>, CliError> {
        self.grid
            .as_ref()
            .map(Grid::points)
            .ok_or_else(|| config_err(format!("mode {} needs a `grid`", self.mode())))
    }

    /// Single-line JSON echo.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
