//! Closed-form post-selected Weisskopf-Wigner dynamics.
//!
//! After the Markov reduction the post-selected amplitude obeys
//! `d(alpha)/dt = -(gamma/2) alpha + (delta/2) cot(eps) alpha`, so it decays at
//! half the effective rate `gamma_eff = gamma - delta cot(eps)`. The
//! small-angle form replaces `cot(eps)` with `1/eps`. The scattering-time
//! density is the flux out of the surviving amplitude,
//! `p(t) = -d|alpha|^2/dt = gamma_eff exp(-gamma_eff t)`, whose mean is
//! `tau = 1/gamma_eff`. All quantities are exact for any positive `gamma`;
//! callers working in natural units pass `gamma = 1`.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which expression for the post-selection shift enters the rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RateForm {
    /// `gamma - delta cot(eps)`.
    #[serde(rename = "cot")]
    FullCot,
    /// `gamma - delta/eps`, the nearly-orthogonal approximation.
    #[default]
    #[serde(rename = "small")]
    SmallEpsilon,
}

impl fmt::Display for RateForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateForm::FullCot => "cot",
            RateForm::SmallEpsilon => "small",
        })
    }
}

impl FromStr for RateForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cot" | "full-cot" => Ok(RateForm::FullCot),
            "small" | "small-epsilon" => Ok(RateForm::SmallEpsilon),
            other => Err(Error::Domain(format!(
                "unknown rate form {other:?} (expected cot|small)"
            ))),
        }
    }
}

/// Model parameters. Frequencies in rad/s (or units of gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    delta: T,
    gamma: T,
    epsilon: T,
    omega: Option<T>,
}

impl<T: Real> ModelParams<T> {
    /// General constructor: `delta >= 0`, `gamma > 0`, `eps` in `[0, pi/2]`.
    ///
    /// `delta = 0` (no splitting) and `eps = 0` (exactly antisymmetric
    /// detection) are admitted for the bath and arrival-time models; the
    /// closed-form rate treats them through its unphysical-region checks.
    pub fn new(delta: T, gamma: T, epsilon: T) -> Result<Self> {
        if !(delta >= T::zero() && delta.is_finite()) {
            return Err(Error::Domain(format!(
                "splitting delta = {delta} must be finite and >= 0"
            )));
        }
        if !(gamma > T::zero() && gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "decay rate gamma = {gamma} must be finite and > 0"
            )));
        }
        if !(epsilon >= T::zero() && epsilon <= T::FRAC_PI_2()) {
            return Err(Error::Domain(format!(
                "post-selection angle {epsilon} outside [0, pi/2]"
            )));
        }
        Ok(Self {
            delta,
            gamma,
            epsilon,
            omega: None,
        })
    }

    /// Natural units: `gamma = 1`, `delta = delta_over_gamma`.
    pub fn natural(delta_over_gamma: T, epsilon: T) -> Result<Self> {
        Self::new(delta_over_gamma, T::one(), epsilon)
    }

    /// Elastic-regime constructor: requires `delta > 0`, `eps > 0` and a
    /// weakness ratio `delta/gamma < 1`; with `strict` the ratio must stay
    /// below 0.5.
    pub fn elastic(delta: T, gamma: T, epsilon: T, strict: bool) -> Result<Self> {
        let p = Self::new(delta, gamma, epsilon)?;
        if !(delta > T::zero()) {
            return Err(Error::Domain("elastic regime needs delta > 0".into()));
        }
        if !(epsilon > T::zero()) {
            return Err(Error::Domain("elastic regime needs eps > 0".into()));
        }
        let limit = if strict { T::lit(0.5) } else { T::one() };
        if !(p.weakness_ratio() < limit) {
            return Err(Error::Domain(format!(
                "weakness ratio delta/gamma = {} not below {limit}",
                p.weakness_ratio()
            )));
        }
        Ok(p)
    }

    /// Attaches the carrier frequency `omega = (omega_+ + omega_-)/2`.
    pub fn with_omega(mut self, omega: T) -> Result<Self> {
        if !(omega > T::zero() && omega.is_finite()) {
            return Err(Error::Domain(format!("carrier frequency {omega} must be > 0")));
        }
        self.omega = Some(omega);
        Ok(self)
    }

    pub fn with_epsilon(self, epsilon: T) -> Result<Self> {
        let mut p = Self::new(self.delta, self.gamma, epsilon)?;
        p.omega = self.omega;
        Ok(p)
    }

    #[inline]
    pub fn delta(&self) -> T {
        self.delta
    }
    #[inline]
    pub fn gamma(&self) -> T {
        self.gamma
    }
    #[inline]
    pub fn epsilon(&self) -> T {
        self.epsilon
    }
    #[inline]
    pub fn omega(&self) -> Option<T> {
        self.omega
    }

    pub fn omega_plus(&self) -> Option<T> {
        self.omega.map(|w| w + self.delta * T::lit(0.5))
    }

    pub fn omega_minus(&self) -> Option<T> {
        self.omega.map(|w| w - self.delta * T::lit(0.5))
    }

    /// `delta/gamma`, which is also the angle at which `tau` diverges.
    pub fn weakness_ratio(&self) -> T {
        self.delta / self.gamma
    }
}

/// Post-selection shift `cot(eps)` or `1/eps`.
pub fn postselection_factor<T: Real>(epsilon: T, form: RateForm) -> T {
    match form {
        RateForm::FullCot => epsilon.cos() / epsilon.sin(),
        RateForm::SmallEpsilon => epsilon.recip(),
    }
}

/// Signed effective decay rate of `|alpha|^2`. Values `<= 0` mark the
/// unphysical region; deciding what to do with them is left to the caller.
pub fn effective_rate<T: Real>(params: &ModelParams<T>, form: RateForm) -> T {
    if params.delta == T::zero() {
        return params.gamma;
    }
    params.gamma - params.delta * postselection_factor(params.epsilon, form)
}

fn unphysical<T: Real>(params: &ModelParams<T>, rate: T) -> Error {
    Error::UnphysicalRegion {
        epsilon: params.epsilon.as_f64(),
        threshold: params.weakness_ratio().as_f64(),
        effective_rate: rate.as_f64(),
    }
}

/// `alpha(t) = exp(-gamma_eff t / 2)` with `alpha(0) = 1`, in the frame
/// rotating at the carrier frequency (so the amplitude is real).
///
/// With `enforce_physical` a non-positive rate at `t > 0` is an
/// [`Error::UnphysicalRegion`]; otherwise the growing solution is returned.
pub fn alpha_of_t<T: Real>(
    t: T,
    params: &ModelParams<T>,
    form: RateForm,
    enforce_physical: bool,
) -> Result<Complex<T>> {
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time {t} must be >= 0")));
    }
    if t == T::zero() {
        return Ok(Complex::new(T::one(), T::zero()));
    }
    let rate = effective_rate(params, form);
    if enforce_physical && !(rate > T::zero()) {
        return Err(unphysical(params, rate));
    }
    Ok(Complex::new((-rate * t * T::lit(0.5)).exp(), T::zero()))
}

/// Mean scattering time and the rate it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringTime<T> {
    pub tau: T,
    pub effective_rate: T,
    pub form: RateForm,
}

/// `tau = 1/gamma_eff`, the first moment of `gamma_eff exp(-gamma_eff t)`.
pub fn mean_scattering_time<T: Real>(params: &ModelParams<T>, form: RateForm) -> Result<ScatteringTime<T>> {
    let rate = effective_rate(params, form);
    if !(rate > T::zero()) {
        return Err(unphysical(params, rate));
    }
    Ok(ScatteringTime {
        tau: rate.recip(),
        effective_rate: rate,
        form,
    })
}

/// One row of a `tau(eps)` curve, in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauPoint<T> {
    pub epsilon: T,
    /// `tau * gamma`; `None` in the unphysical region.
    pub tau_gamma: Option<T>,
    pub rate_over_gamma: T,
    pub physical: bool,
}

/// Evaluates `tau * gamma` over a grid of post-selection angles. Rows in
/// the unphysical region are flagged instead of failing the whole curve.
pub fn tau_curve<T: Real>(delta_over_gamma: T, epsilon_grid: &[T], form: RateForm) -> Result<Vec<TauPoint<T>>> {
    if epsilon_grid.is_empty() {
        return Err(Error::Domain("empty epsilon grid".into()));
    }
    epsilon_grid
        .iter()
        .map(|&eps| {
            if !(eps > T::zero()) {
                return Err(Error::Domain(format!("grid angle {eps} must lie in (0, pi/2]")));
            }
            let p = ModelParams::natural(delta_over_gamma, eps)?;
            let rate = effective_rate(&p, form);
            let physical = rate > T::zero();
            Ok(TauPoint {
                epsilon: eps,
                tau_gamma: physical.then(|| rate.recip()),
                rate_over_gamma: rate,
                physical,
            })
        })
        .collect()
}

/// Sampled amplitude `alpha(t)` with its survival probability.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory<T> {
    pub times: Vec<T>,
    pub alpha: Vec<Complex<T>>,
    pub survival: Vec<T>,
}

impl<T: Real> AmplitudeTrajectory<T> {
    pub fn new(times: Vec<T>, alpha: Vec<Complex<T>>) -> Self {
        assert_eq!(times.len(), alpha.len(), "time grid and amplitudes differ in length");
        let survival = alpha.iter().map(|a| a.norm_sqr()).collect();
        Self { times, alpha, survival }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Least-squares slope of `-ln|alpha|^2` over grid points in
    /// `[t_lo, t_hi]`.
    pub fn fitted_decay_rate(&self, t_lo: T, t_hi: T) -> Result<T> {
        let pts: Vec<(T, T)> = self
            .times
            .iter()
            .zip(&self.survival)
            .filter(|(t, s)| **t >= t_lo && **t <= t_hi && **s > T::zero())
            .map(|(t, s)| (*t, s.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(Error::Domain(format!(
                "fit window [{t_lo}, {t_hi}] holds {} usable points",
                pts.len()
            )));
        }
        let n = T::from_count(pts.len());
        let tm = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
        let ym = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
        let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(sxy, sxx), &(t, y)| {
            (sxy + (t - tm) * (y - ym), sxx + (t - tm) * (t - tm))
        });
        Ok(-sxy / sxx)
    }

    /// CSV with header `t,alpha_re,alpha_im,survival`, times in units of
    /// `1/gamma`.
    pub fn write_csv<W: Write>(&self, mut w: W, gamma: T) -> io::Result<()> {
        writeln!(w, "t,alpha_re,alpha_im,survival")?;
        for ((t, a), s) in self.times.iter().zip(&self.alpha).zip(&self.survival) {
            writeln!(w, "{},{},{},{}", *t * gamma, a.re, a.im, s)?;
        }
        Ok(())
    }
}

/// `[0, dt, 2 dt, ..., n dt]` with `n = round(t_end/dt)`.
pub fn uniform_grid<T: Real>(dt: T, t_end: T) -> Result<Vec<T>> {
    if !(dt > T::zero() && t_end >= T::zero() && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::Domain(format!("bad time grid dt = {dt}, t_end = {t_end}")));
    }
    let n = (t_end / dt).round().to_usize().unwrap_or(0);
    Ok((0..=n).map(|j| T::from_count(j) * dt).collect())
}

/// Closed-form trajectory on a uniform grid. Defaults: `dt = 0.01/gamma_eff`,
/// `t_end = 10/gamma_eff`.
pub fn markov_trajectory<T: Real>(
    params: &ModelParams<T>,
    form: RateForm,
    dt: Option<T>,
    t_end: Option<T>,
) -> Result<AmplitudeTrajectory<T>> {
    let rate = effective_rate(params, form);
    if !(rate > T::zero()) {
        return Err(unphysical(params, rate));
    }
    let dt = dt.unwrap_or_else(|| T::lit(0.01) / rate);
    let t_end = t_end.unwrap_or_else(|| T::lit(10.0) / rate);
    let times = uniform_grid(dt, t_end)?;
    let alpha = times
        .iter()
        .map(|&t| alpha_of_t(t, params, form, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(AmplitudeTrajectory::new(times, alpha))
}
