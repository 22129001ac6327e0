//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`) so the report is
//! printed even when everything passes. Exits non-zero on any failure.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex;
use vee_ww::bath::{angular_dipole_integral, build_bath, evolve_kernel, evolve_modes, DipolePair, Postselection};
use vee_ww::markov::{effective_rate, mean_scattering_time, tau_curve, ModelParams, RateForm};
use vee_ww::qstate::{postselect_state, sigma_z, symmetric_state, weak_value};
use vee_ww::rng::RngSpec;
use vee_ww::trajectory::{sample_conditional_arrivals_par, scattering_time_samples, ConditionalArrival, SampleSummary};

type Check = Result<String, String>;

/// Id, name, time budget, check.
type Criterion = (&'static str, &'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn eps_grid() -> Vec<f64> {
    // Log-spaced so the near-orthogonal end is well represented.
    let (lo, hi) = (1e-4f64.ln(), (FRAC_PI_2 - 1e-6).ln());
    (0..50)
        .map(|i| (lo + (hi - lo) * (i as f64 + 0.5) / 50.0).exp())
        .collect()
}

fn weak_value_identity() -> Check {
    let s = symmetric_state::<f64>();
    let mut worst = 0.0f64;
    for eps in eps_grid() {
        let f = postselect_state(eps).map_err(|e| e.to_string())?;
        let w = weak_value(&sigma_z(), &s, &f).map_err(|e| e.to_string())?.value;
        let expected = Complex::new(0.0, -1.0 / eps.tan());
        worst = worst.max((w - expected).norm() / expected.norm().max(1.0));
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.2e} over 50 angles"))
}

fn rate_weak_value_consistency() -> Check {
    let s = symmetric_state::<f64>();
    let mut worst = 0.0f64;
    for dg in [0.01, 0.1, 0.5] {
        for eps in eps_grid() {
            let f = postselect_state(eps).map_err(|e| e.to_string())?;
            let w = weak_value(&sigma_z(), &s, &f).map_err(|e| e.to_string())?.value;
            let p = ModelParams::natural(dg, eps).map_err(|e| e.to_string())?;
            let rate = effective_rate(&p, RateForm::FullCot);
            let via_weak = 1.0 + dg * w.im;
            worst = worst.max((rate - via_weak).abs() / rate.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn bracketing(dg: f64) -> Result<(), String> {
    let mut prev = 0.0;
    for m in 1..=6 {
        let eps = dg * (1.0 + 10f64.powi(-m));
        let t = mean_scattering_time(
            &ModelParams::natural(dg, eps).map_err(|e| e.to_string())?,
            RateForm::SmallEpsilon,
        )
        .map_err(|e| e.to_string())?
        .tau;
        ensure(m == 1 || t >= 9.0 * prev, || format!("bracketing stalls at m = {m}"))?;
        prev = t;
    }
    Ok(())
}

fn fig2_shape() -> Check {
    let dg = 0.1;
    let grid: Vec<f64> = (1..=500).map(|i| 0.1 + (FRAC_PI_2 - 0.1) * i as f64 / 500.0).collect();
    let small = tau_curve(dg, &grid, RateForm::SmallEpsilon).map_err(|e| e.to_string())?;
    ensure(small.iter().all(|p| p.physical), || {
        "unphysical row above threshold".into()
    })?;
    let taus: Vec<f64> = small.iter().filter_map(|p| p.tau_gamma).collect();
    ensure(strictly_decreasing(&taus), || {
        "small-angle curve not strictly decreasing".into()
    })?;
    let cot = tau_curve(dg, &grid, RateForm::FullCot).map_err(|e| e.to_string())?;
    let last = cot.last().and_then(|p| p.tau_gamma).unwrap_or(f64::NAN);
    ensure(last == 1.0, || format!("full-cot tau at pi/2 is {last}"))?;
    let near = tau_curve(dg, &[0.1001, 0.105, 0.11, 0.1111], RateForm::SmallEpsilon).map_err(|e| e.to_string())?;
    for p in small.iter().chain(&near).filter(|p| p.epsilon <= 0.1111) {
        let t = p.tau_gamma.unwrap_or(f64::INFINITY);
        ensure(t >= 10.0, || format!("tau {t} < 10 at eps {}", p.epsilon))?;
    }
    let below = tau_curve(dg, &[0.05, 0.099], RateForm::SmallEpsilon).map_err(|e| e.to_string())?;
    ensure(below.iter().all(|p| !p.physical), || {
        "rows below threshold not flagged".into()
    })?;
    bracketing(dg)?;
    Ok(format!("500 points, tau(pi/2) = {last} (full cot), pole bracketed"))
}

fn fig3_shape() -> Check {
    let dg = 0.01;
    let rows = tau_curve::<f64>(dg, &[0.005, 0.01, 0.0101, 0.2], RateForm::SmallEpsilon).map_err(|e| e.to_string())?;
    ensure(!rows[0].physical && !rows[1].physical, || {
        "divergence not at eps = 0.01".into()
    })?;
    ensure(rows[1].rate_over_gamma.abs() < 1e-12, || {
        "rate does not vanish at 0.01".into()
    })?;
    let t = rows[2].tau_gamma.ok_or("eps = 0.0101 flagged unphysical")?;
    ensure((t / 101.0 - 1.0).abs() <= 1e-9, || format!("tau(0.0101) = {t}"))?;
    bracketing(dg)?;
    Ok(format!("tau(0.0101) = {t:.10}"))
}

fn markov_bath() -> Check {
    let b = build_bath::<f64>(1.0, 1000.0, 50.0, 4096).map_err(|e| e.to_string())?;
    let p = ModelParams::natural(0.0, 0.3).map_err(|e| e.to_string())?;
    let tr = evolve_modes(&b, &p, 3.0, 0.002, Postselection::Off).map_err(|e| e.to_string())?;
    let worst = tr
        .times
        .iter()
        .zip(&tr.survival)
        .filter(|(t, _)| (0.5..=3.0).contains(*t))
        .map(|(t, s)| (s / (-t).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(worst < 0.02, || format!("worst relative deviation {worst:.4}"))?;
    Ok(format!("worst relative deviation {:.2}%", 100.0 * worst))
}

fn postselected_bath() -> Check {
    let b = build_bath::<f64>(1.0, 1000.0, 50.0, 4096).map_err(|e| e.to_string())?;
    let p = ModelParams::<f64>::natural(0.01, 0.05).map_err(|e| e.to_string())?;
    let ge = effective_rate(&p, RateForm::SmallEpsilon);
    let tr =
        evolve_modes(&b, &p, 3.0 / ge, 0.002, Postselection::On(RateForm::SmallEpsilon)).map_err(|e| e.to_string())?;
    let fit = tr.fitted_decay_rate(0.5 / ge, 3.0 / ge).map_err(|e| e.to_string())?;
    let err = (fit / 0.8 - 1.0).abs();
    ensure(err < 0.05, || format!("fitted rate {fit:.4}"))?;
    Ok(format!("fitted rate {fit:.4} vs 0.8 ({:.2}%)", 100.0 * err))
}

fn integrators_agree() -> Check {
    let b = build_bath::<f64>(1.0, 1000.0, 50.0, 4096).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (p, ps) in [
        (ModelParams::natural(0.0, 0.3), Postselection::Off),
        (
            ModelParams::natural(0.01, 0.05),
            Postselection::On(RateForm::SmallEpsilon),
        ),
    ] {
        let p = p.map_err(|e| e.to_string())?;
        let m = evolve_modes(&b, &p, 3.0, 0.002, ps).map_err(|e| e.to_string())?;
        let k = evolve_kernel(&b, &p, 3.0, 0.002, ps).map_err(|e| e.to_string())?;
        ensure(m.times == k.times, || "time grids differ".into())?;
        worst = m
            .alpha
            .iter()
            .zip(&k.alpha)
            .map(|(x, y)| (x - y).norm())
            .fold(worst, f64::max);
    }
    ensure(worst <= 1e-3, || format!("max |delta alpha| = {worst:.3e}"))?;
    Ok(format!("max |delta alpha| = {worst:.2e}"))
}

fn angular_geometry() -> Check {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut dipoles: Vec<[Complex<f64>; 3]> = (0..19).map(|_| [(); 3].map(|_| Complex::new(next(), next()))).collect();
    dipoles.push(DipolePair::perpendicular(1.3).difference());
    let mut worst = 0.0f64;
    for d in &dipoles {
        let a = angular_dipole_integral(d);
        let d2: f64 = d.iter().map(|c| c.norm_sqr()).sum();
        worst = worst.max((a.quadrature - 8.0 * PI / 3.0 * d2).abs());
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.2e} over 20 dipoles"))
}

fn monte_carlo() -> Check {
    let points = [
        (0.1, 0.2, RateForm::SmallEpsilon),
        (0.1, FRAC_PI_2, RateForm::FullCot),
        (0.1, 0.5, RateForm::FullCot),
        (0.01, 0.05, RateForm::SmallEpsilon),
        (0.01, 0.0101, RateForm::SmallEpsilon),
    ];
    let n = 100_000;
    let mut worst = 0.0f64;
    for (i, &(dg, eps, form)) in points.iter().enumerate() {
        let p = ModelParams::natural(dg, eps).map_err(|e| e.to_string())?;
        let tau = mean_scattering_time(&p, form).map_err(|e| e.to_string())?.tau;
        let spec = RngSpec::new(42, i as u64);
        let base = scattering_time_samples(&p, form, n, spec, 1).map_err(|e| e.to_string())?;
        for k in [1, 4, 16] {
            let again = scattering_time_samples(&p, form, n, spec, k).map_err(|e| e.to_string())?;
            ensure(again == base, || format!("samples differ with {k} workers"))?;
        }
        let s = SampleSummary::from_samples(&base, 1.0, 50).map_err(|e| e.to_string())?;
        let z = (s.mean - tau).abs() / s.stderr;
        ensure(z <= 3.0, || {
            format!("point {i}: mean {} vs tau {tau} ({z:.2} stderr)", s.mean)
        })?;
        worst = worst.max(z);
    }
    Ok(format!(
        "5 points, worst |z| = {worst:.2}, identical for 1/4/16 workers"
    ))
}

fn jump_model() -> Check {
    let p = ModelParams::<f64>::natural(0.001, 0.0).map_err(|e| e.to_string())?;
    let model = ConditionalArrival::new(&p).map_err(|e| e.to_string())?;
    let rel = (model.mean() / 3.0 - 1.0).abs();
    ensure(rel <= 5e-3, || format!("quadrature mean {}", model.mean()))?;
    let s = sample_conditional_arrivals_par(&p, 100_000, RngSpec::new(42, 0), 4).map_err(|e| e.to_string())?;
    let z = (s.summary.mean - model.mean()).abs() / s.summary.stderr;
    ensure(z <= 3.0, || format!("MC mean {} ({z:.2} sigma)", s.summary.mean))?;
    Ok(format!(
        "quadrature mean {:.6}, MC mean {:.4} ({z:.2} sigma, acceptance {:.3})",
        model.mean(),
        s.summary.mean,
        s.acceptance_rate
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "AC1",
            "weak-value identity",
            Duration::from_secs(1),
            weak_value_identity,
        ),
        (
            "AC2",
            "rate / weak-value consistency",
            Duration::from_secs(1),
            rate_weak_value_consistency,
        ),
        (
            "AC3",
            "tau curve at delta/gamma = 0.1",
            Duration::from_secs(1),
            fig2_shape,
        ),
        (
            "AC4",
            "tau curve at delta/gamma = 0.01",
            Duration::from_secs(1),
            fig3_shape,
        ),
        (
            "AC5",
            "bath decay without post-selection",
            Duration::from_secs(60),
            markov_bath,
        ),
        (
            "AC6",
            "post-selected bath decay",
            Duration::from_secs(60),
            postselected_bath,
        ),
        (
            "AC7",
            "mode vs kernel integrator",
            Duration::from_secs(120),
            integrators_agree,
        ),
        (
            "AC8",
            "angular dipole integral",
            Duration::from_secs(1),
            angular_geometry,
        ),
        (
            "AC9",
            "Monte Carlo scattering times",
            Duration::from_secs(10),
            monte_carlo,
        ),
        ("AC10", "jump-model limit", Duration::from_secs(10), jump_model),
    ];
    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?} > {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail} ({elapsed:.2?})"),
            Err(why) => {
                failures += 1;
                println!("[FAIL] {id} {name}: {why} ({elapsed:.2?})");
            }
        }
    }
    println!("{} / 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
