use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vee_ww::RateForm;
use vee_ww_sim::{execute, Mode, Overrides, Preset, Source};

/// Post-selected V-atom emission: weak values, mean scattering times,
/// bath simulations and Monte Carlo arrival times.
#[derive(Parser)]
#[command(name = "vee-ww-sim", version)]
struct Cli {
    mode: Mode,

    /// JSON run configuration, or a previous output to reproduce.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in configuration.
    #[arg(long, value_enum)]
    preset: Option<Preset>,

    #[arg(long, allow_hyphen_values = true)]
    delta_over_gamma: Option<f64>,

    /// Post-selection angle in radians.
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,

    /// Rate expression: cot or small.
    #[arg(long)]
    form: Option<RateForm>,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    /// Monte Carlo sample count.
    #[arg(long)]
    n: Option<usize>,

    /// Also render the curve as SVG (tau-curve only).
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let source = match (&cli.config, cli.preset) {
        (Some(p), _) => Source::File(p),
        (None, Some(p)) => Source::Preset(p),
        (None, None) => Source::Defaults,
    };
    let overrides = Overrides {
        delta_over_gamma: cli.delta_over_gamma,
        epsilon: cli.epsilon,
        form: cli.form,
        out: cli.out.clone(),
        seed: cli.seed,
        n: cli.n,
    };
    match execute(cli.mode, source, &overrides, cli.svg.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vee-ww-sim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
