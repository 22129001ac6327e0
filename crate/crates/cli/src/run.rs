//! Mode implementations. Each renders its whole output to a string so that
//! nothing partial is written on failure.

use std::fmt::Write as _;
use std::num::NonZeroUsize;

use rayon::prelude::*;
use serde_json::{json, Value};
use vee_ww::bath::{build_bath, evolve_kernel, evolve_modes, BathGrid, Postselection};
use vee_ww::markov::{
    effective_rate, markov_trajectory, mean_scattering_time, tau_curve, AmplitudeTrajectory, ModelParams, TauPoint,
};
use vee_ww::qstate::{postselect_state, sigma_z, symmetric_state, weak_value};
use vee_ww::trajectory::{
    sample_conditional_arrivals_par, scattering_time_samples, ConditionalArrival, SampleSummary, DEFAULT_BINS,
};
use vee_ww::{Error, RngSpec};

use crate::config::{Format, Integrator, McModel, Mode, Point, RunConfig, CSV_ECHO_PREFIX};
use crate::error::{config_err, CliError};
use crate::svg;

/// Shortest representation that parses back to the same bits.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_preamble(cfg: &RunConfig, header: &[&str]) -> String {
    format!("{CSV_ECHO_PREFIX}{}\n{}\n", cfg.echo(), header.join(","))
}

fn json_document(cfg: &RunConfig, mut body: Value) -> String {
    let config: Value = serde_json::from_str(&cfg.echo()).expect("echo is JSON");
    if let Value::Object(map) = &mut body {
        map.insert("config".into(), config);
    }
    let mut s = serde_json::to_string_pretty(&body).expect("output serializes");
    s.push('\n');
    s
}

fn workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1)
    }
}

/// Renders the primary output of a resolved config.
pub fn render(cfg: &RunConfig) -> Result<String, CliError> {
    match cfg.mode() {
        Mode::WeakValue => weak_value_mode(cfg),
        Mode::TauCurve => tau_curve_mode(cfg),
        Mode::Evolve => evolve_mode(cfg),
        Mode::Mc => mc_mode(cfg),
        Mode::Compare => compare_mode(cfg),
    }
}

fn format(cfg: &RunConfig) -> Format {
    cfg.output.format.unwrap_or(Format::Csv)
}

fn weak_value_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let point = cfg.point()?;
    let eps = point.params.epsilon();
    let wv = weak_value(&sigma_z(), &symmetric_state(), &postselect_state(eps)?)?;
    Ok(json_document(
        cfg,
        json!({
            "epsilon": eps,
            "re": wv.value.re,
            "im": wv.value.im,
            "overlap_re": wv.overlap.re,
            "overlap_im": wv.overlap.im,
        }),
    ))
}

fn tau_rows(cfg: &RunConfig) -> Result<(Point, Vec<TauPoint<f64>>), CliError> {
    let point = cfg.point()?;
    let rows = tau_curve(point.params.weakness_ratio(), &cfg.grid_points()?, point.form)?;
    Ok((point, rows))
}

fn tau_curve_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let (point, rows) = tau_rows(cfg)?;
    let g = point.gamma_si;
    match format(cfg) {
        Format::Csv => {
            let mut header = vec!["epsilon", "tau_gamma", "rate_over_gamma", "physical"];
            if g.is_some() {
                header.extend(["tau_s", "rate_per_s"]);
            }
            let mut out = csv_preamble(cfg, &header);
            for r in &rows {
                let _ = write!(
                    out,
                    "{},{},{},{}",
                    num(r.epsilon),
                    opt(r.tau_gamma),
                    num(r.rate_over_gamma),
                    r.physical
                );
                if let Some(g) = g {
                    let _ = write!(
                        out,
                        ",{},{}",
                        opt(r.tau_gamma.map(|t| t / g)),
                        num(r.rate_over_gamma * g)
                    );
                }
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    let mut v = json!({
                        "epsilon": r.epsilon,
                        "tau_gamma": r.tau_gamma,
                        "rate_over_gamma": r.rate_over_gamma,
                        "physical": r.physical,
                    });
                    if let Some(g) = g {
                        v["tau_s"] = json!(r.tau_gamma.map(|t| t / g));
                        v["rate_per_s"] = json!(r.rate_over_gamma * g);
                    }
                    v
                })
                .collect();
            Ok(json_document(cfg, json!({ "gamma_si": g, "rows": rows })))
        }
    }
}

/// Plot of the curve described by a tau-curve config.
pub fn tau_curve_svg(cfg: &RunConfig) -> Result<String, CliError> {
    let (point, rows) = tau_rows(cfg)?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.tau_gamma.map(|t| (r.epsilon, t)))
        .collect();
    let title = format!(
        "mean scattering time, delta/gamma = {}, {} form",
        point.params.weakness_ratio(),
        point.form
    );
    Ok(svg::log_y_plot(&pts, &title, "epsilon (rad)", "tau * gamma"))
}

fn bath_for(cfg: &RunConfig) -> Result<BathGrid<f64>, CliError> {
    let b = &cfg.bath;
    Ok(build_bath(1.0, b.carrier_over_gamma, b.cutoff_over_gamma, b.n_modes)?)
}

fn evolve_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let point = cfg.point()?;
    let b = &cfg.bath;
    let postselect = if b.postselect {
        Postselection::On(point.form)
    } else {
        Postselection::Off
    };
    if b.postselect {
        // Scalar request: refuse to integrate a growing amplitude.
        mean_scattering_time(&point.params, point.form)?;
    }
    let traj: AmplitudeTrajectory<f64> = match b.integrator {
        Integrator::Markov => {
            let params = if b.postselect {
                point.params
            } else {
                ModelParams::natural(0.0, point.params.epsilon())?
            };
            markov_trajectory(&params, point.form, Some(b.dt_gamma), Some(b.t_end_gamma))?
        }
        Integrator::Modes => evolve_modes(&bath_for(cfg)?, &point.params, b.t_end_gamma, b.dt_gamma, postselect)?,
        Integrator::Kernel => evolve_kernel(&bath_for(cfg)?, &point.params, b.t_end_gamma, b.dt_gamma, postselect)?,
    };
    let g = point.gamma_si;
    let mut header = vec!["t_gamma"];
    if g.is_some() {
        header.push("t_s");
    }
    header.extend(["alpha_re", "alpha_im", "survival"]);
    let mut out = csv_preamble(cfg, &header);
    for ((t, a), s) in traj.times.iter().zip(&traj.alpha).zip(&traj.survival) {
        out.push_str(&num(*t));
        if let Some(g) = g {
            let _ = write!(out, ",{}", num(t / g));
        }
        let _ = writeln!(out, ",{},{},{}", num(a.re), num(a.im), num(*s));
    }
    Ok(out)
}

struct McRun {
    samples: Vec<f64>,
    summary: SampleSummary<f64>,
    analytic_mean: f64,
    extra: Value,
}

fn run_mc(cfg: &RunConfig, point: &Point) -> Result<McRun, CliError> {
    let mc = &cfg.mc;
    let spec = RngSpec::new(mc.seed, mc.stream);
    let k = workers(mc.workers);
    match mc.model {
        McModel::Markov => {
            let tau = mean_scattering_time(&point.params, point.form)?.tau;
            let samples = scattering_time_samples(&point.params, point.form, mc.n, spec, k)?;
            let summary = SampleSummary::from_samples(&samples, 1.0, DEFAULT_BINS)?;
            Ok(McRun {
                samples,
                summary,
                analytic_mean: tau,
                extra: json!({ "form": point.form }),
            })
        }
        McModel::Conditional => {
            let model = ConditionalArrival::new(&point.params)?;
            let run = sample_conditional_arrivals_par(&point.params, mc.n, spec, k)?;
            Ok(McRun {
                analytic_mean: model.mean(),
                extra: json!({
                    "acceptance_rate": run.acceptance_rate,
                    "proposals": run.proposals,
                    "envelope": format!("{:?}", run.envelope).to_lowercase(),
                }),
                samples: run.samples,
                summary: run.summary,
            })
        }
    }
}

fn mc_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let point = cfg.point()?;
    let run = run_mc(cfg, &point)?;
    let g = point.gamma_si;
    match format(cfg) {
        Format::Csv => {
            let mut header = vec!["t_over_gamma_inv"];
            if g.is_some() {
                header.push("t_s");
            }
            let mut out = csv_preamble(cfg, &header);
            for t in &run.samples {
                out.push_str(&num(*t));
                if let Some(g) = g {
                    let _ = write!(out, ",{}", num(t / g));
                }
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => {
            let s = &run.summary;
            let mut body = s.to_json();
            body["model"] = json!(cfg.mc.model);
            body["analytic_mean"] = json!(run.analytic_mean);
            body["z_score"] = json!((s.mean - run.analytic_mean) / s.stderr);
            body["gamma_si"] = json!(g);
            body["mean_s"] = json!(g.map(|g| s.mean / g));
            if let (Value::Object(b), Value::Object(e)) = (&mut body, run.extra) {
                b.extend(e);
            }
            Ok(json_document(cfg, body))
        }
    }
}

#[derive(Debug, Clone, Default)]
struct CompareRow {
    epsilon: f64,
    physical: bool,
    rate_markov: f64,
    rate_bath: Option<f64>,
    tau_markov: Option<f64>,
    mc_mean: Option<f64>,
    mc_stderr: Option<f64>,
    conditional_mean: Option<f64>,
}

impl CompareRow {
    fn rel_dev_bath(&self) -> Option<f64> {
        self.rate_bath.map(|r| r / self.rate_markov - 1.0)
    }

    fn rel_dev_mc(&self) -> Option<f64> {
        Some(self.mc_mean? / self.tau_markov? - 1.0)
    }
}

/// Smallest post-selected rate whose fit window `[0.5, 3]/rate` still fits
/// in the bath's `10/gamma` horizon closely enough to be meaningful.
const MIN_BATH_RATE: f64 = 0.1;

fn compare_point(
    cfg: &RunConfig,
    point: &Point,
    bath: &BathGrid<f64>,
    index: usize,
    eps: f64,
) -> Result<CompareRow, CliError> {
    let params = point.params.with_epsilon(eps)?;
    let rate = effective_rate(&params, point.form);
    let conditional_mean = match ConditionalArrival::new(&params) {
        Ok(m) => Some(m.mean()),
        Err(Error::Domain(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut row = CompareRow {
        epsilon: eps,
        physical: rate > 0.0,
        rate_markov: rate,
        conditional_mean,
        ..Default::default()
    };
    if !row.physical {
        return Ok(row);
    }
    row.tau_markov = Some(rate.recip());
    if rate >= MIN_BATH_RATE {
        let t_end = (3.0 / rate).min(10.0);
        let b = &cfg.bath;
        let ps = Postselection::On(point.form);
        let traj = match b.integrator {
            Integrator::Kernel => evolve_kernel(bath, &params, t_end, b.dt_gamma, ps)?,
            _ => evolve_modes(bath, &params, t_end, b.dt_gamma, ps)?,
        };
        row.rate_bath = Some(traj.fitted_decay_rate(0.5 / rate, t_end)?);
    }
    let spec = RngSpec::new(cfg.mc.seed, cfg.mc.stream.wrapping_add(index as u64));
    let samples = scattering_time_samples(&params, point.form, cfg.mc.n, spec, 1)?;
    let s = SampleSummary::from_samples(&samples, 1.0, DEFAULT_BINS)?;
    row.mc_mean = Some(s.mean);
    row.mc_stderr = Some(s.stderr);
    Ok(row)
}

fn compare_mode(cfg: &RunConfig) -> Result<String, CliError> {
    let point = cfg.point()?;
    if cfg.bath.integrator == Integrator::Markov {
        return Err(config_err("compare needs a bath integrator (modes or kernel)"));
    }
    let grid = cfg.grid_points()?;
    let bath = bath_for(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(cfg.mc.workers))
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    // Indexed collect keeps rows in grid order whatever finishes first.
    let rows: Vec<CompareRow> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &eps)| compare_point(cfg, &point, &bath, i, eps))
            .collect::<Result<_, _>>()
    })?;
    match format(cfg) {
        Format::Csv => {
            let header = [
                "epsilon",
                "physical",
                "rate_markov",
                "rate_bath",
                "rel_dev_bath",
                "tau_markov",
                "mc_mean",
                "mc_stderr",
                "rel_dev_mc",
                "conditional_mean",
            ];
            let mut out = csv_preamble(cfg, &header);
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    num(r.epsilon),
                    r.physical,
                    num(r.rate_markov),
                    opt(r.rate_bath),
                    opt(r.rel_dev_bath()),
                    opt(r.tau_markov),
                    opt(r.mc_mean),
                    opt(r.mc_stderr),
                    opt(r.rel_dev_mc()),
                    opt(r.conditional_mean),
                );
            }
            Ok(out)
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "epsilon": r.epsilon,
                        "physical": r.physical,
                        "rate_markov": r.rate_markov,
                        "rate_bath": r.rate_bath,
                        "rel_dev_bath": r.rel_dev_bath(),
                        "tau_markov": r.tau_markov,
                        "mc_mean": r.mc_mean,
                        "mc_stderr": r.mc_stderr,
                        "rel_dev_mc": r.rel_dev_mc(),
                        "conditional_mean": r.conditional_mean,
                    })
                })
                .collect();
            Ok(json_document(cfg, json!({ "rows": rows })))
        }
    }
}
