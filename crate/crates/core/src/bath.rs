//! Discretized vacuum bath: dipole geometry, couplings and the two
//! integrators (explicit mode amplitudes and the memory-kernel form) used to
//! validate the Markov reduction from first principles.
//!
//! Everything runs in the frame rotating at the carrier `omega`; the mode
//! detunings `delta_k = omega_k - omega` are the only frequencies the
//! integrators see. The emitted-photon amplitudes are stored as
//! `b_k = beta_k / sqrt(2)` where `beta_k` is the combined amplitude of both
//! emission channels. With that scaling the coupled equations read
//!
//! ```text
//! d(alpha)/dt = i sum_k g_k b_k e^{-i delta_k t} + c alpha
//! d(b_k)/dt   = i alpha g_k^* e^{+i delta_k t}
//! ```
//!
//! with `c = (delta/2) cot(eps)` when post-selection is on and `c = 0`
//! otherwise, and `|alpha|^2 + sum_k |b_k|^2` is conserved when `c = 0`.
//! Eliminating `b_k` gives the memory kernel `K(tau) = sum_k |g_k|^2 e^{-i delta_k tau}`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::markov::{postselection_factor, uniform_grid, AmplitudeTrajectory, ModelParams, RateForm};
use crate::scalar::Real;

/// Complex Cartesian 3-vector.
pub type CVec3<T> = [Complex<T>; 3];

fn cvec_norm_sqr<T: Real>(v: &CVec3<T>) -> T {
    v.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
}

/// `u^dagger v`.
fn cvec_inner<T: Real>(u: &CVec3<T>, v: &CVec3<T>) -> Complex<T> {
    u.iter()
        .zip(v)
        .fold(Complex::new(T::zero(), T::zero()), |a, (x, y)| a + x.conj() * *y)
}

/// Physical constants in whatever unit system the caller works in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConstants<T> {
    pub hbar: T,
    pub epsilon0: T,
    pub c: T,
}

impl<T: Real> FieldConstants<T> {
    /// CODATA 2018 SI values.
    pub fn si() -> Self {
        Self {
            hbar: T::lit(1.054_571_817e-34),
            epsilon0: T::lit(8.854_187_812_8e-12),
            c: T::lit(299_792_458.0),
        }
    }

    /// `hbar = epsilon0 = c = 1`.
    pub fn natural() -> Self {
        Self {
            hbar: T::one(),
            epsilon0: T::one(),
            c: T::one(),
        }
    }

    pub fn new(hbar: T, epsilon0: T, c: T) -> Result<Self> {
        if [hbar, epsilon0, c].iter().all(|x| *x > T::zero() && x.is_finite()) {
            Ok(Self { hbar, epsilon0, c })
        } else {
            Err(Error::Domain("field constants must be finite and positive".into()))
        }
    }
}

/// Spontaneous decay rate `omega^3 eta^2 / (3 pi epsilon0 hbar c^3)`.
pub fn gamma_from_dipole<T: Real>(omega: T, eta: T, constants: &FieldConstants<T>) -> T {
    let c3 = constants.c * constants.c * constants.c;
    omega * omega * omega * eta * eta / (T::lit(3.0) * T::PI() * constants.epsilon0 * constants.hbar * c3)
}

/// The two transition dipoles of the V system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipolePair<T> {
    pub d1: CVec3<T>,
    pub d2: CVec3<T>,
    pub eta: T,
}

impl<T: Real> DipolePair<T> {
    /// Circular dipoles of a `Delta m = +-1` pair:
    /// `d1 = eta (x + i y)/sqrt(2)`, `d2 = eta (x - i y)/sqrt(2)`.
    pub fn perpendicular(eta: T) -> Self {
        let h = eta * T::FRAC_1_SQRT_2();
        let z = T::zero();
        Self {
            d1: [Complex::new(h, z), Complex::new(z, h), Complex::new(z, z)],
            d2: [Complex::new(h, z), Complex::new(z, -h), Complex::new(z, z)],
            eta,
        }
    }

    /// Checks equal magnitudes and mutual orthogonality within `1e-12`
    /// relative to `eta^2`.
    pub fn new(d1: CVec3<T>, d2: CVec3<T>) -> Result<Self> {
        let n1 = cvec_norm_sqr(&d1);
        let n2 = cvec_norm_sqr(&d2);
        let tol = T::lit(1e-12) * n1.max(n2);
        if !(n1 > T::zero()) || (n1 - n2).abs() > tol {
            return Err(Error::Domain("dipoles must share a non-zero magnitude".into()));
        }
        if cvec_inner(&d1, &d2).norm() > tol {
            return Err(Error::Domain("dipoles must be orthogonal".into()));
        }
        Ok(Self { d1, d2, eta: n1.sqrt() })
    }

    /// `d = d1 - d2`; equals `i sqrt(2) eta y` for [`DipolePair::perpendicular`].
    pub fn difference(&self) -> CVec3<T> {
        [
            self.d1[0] - self.d2[0],
            self.d1[1] - self.d2[1],
            self.d1[2] - self.d2[2],
        ]
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

/// Solid-angle integral of the transverse dipole weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularIntegral<T> {
    /// Gauss-Legendre (in `cos theta`) times uniform-`phi` quadrature.
    pub quadrature: T,
    /// `(8 pi / 3) |d|^2`.
    pub analytic: T,
}

/// `int dOmega (|d|^2 - |d . kappa|^2)` on the default 16 x 32 grid.
pub fn angular_dipole_integral<T: Real>(d: &CVec3<T>) -> AngularIntegral<T> {
    angular_dipole_integral_with(d, 16, 32)
}

/// Summing over both transverse polarizations leaves `|d|^2 - |d . kappa|^2`
/// for propagation direction `kappa`. The integrand is a degree-2
/// polynomial in the components of `kappa`, so any grid with at least two
/// Legendre nodes and three azimuths integrates it exactly.
pub fn angular_dipole_integral_with<T: Real>(d: &CVec3<T>, n_theta: usize, n_phi: usize) -> AngularIntegral<T> {
    let (us, ws) = gauss_legendre::<T>(n_theta);
    let d2 = cvec_norm_sqr(d);
    let dphi = T::TAU() / T::from_count(n_phi);
    let mut total = T::zero();
    for (&u, &w) in us.iter().zip(&ws) {
        let s = (T::one() - u * u).max(T::zero()).sqrt();
        let mut ring = T::zero();
        for j in 0..n_phi {
            let (sp, cp) = (T::from_count(j) * dphi).sin_cos();
            let kappa = [s * cp, s * sp, u];
            let proj = d
                .iter()
                .zip(kappa)
                .fold(Complex::new(T::zero(), T::zero()), |a, (dc, k)| a + *dc * k);
            ring += d2 - proj.norm_sqr();
        }
        total += w * ring * dphi;
    }
    AngularIntegral {
        quadrature: total,
        analytic: T::lit(8.0) * T::PI() / T::lit(3.0) * d2,
    }
}

/// Mode-summed coupling strength per unit angular frequency,
/// `J(omega) = omega^3 A(d) / (16 pi^3 epsilon0 hbar c^3)`, with `A(d)` the
/// quadrature value of [`angular_dipole_integral`].
pub fn spectral_density<T: Real>(omega: T, d: &CVec3<T>, constants: &FieldConstants<T>) -> T {
    let a = angular_dipole_integral(d).quadrature;
    let c3 = constants.c * constants.c * constants.c;
    let pi3 = T::PI() * T::PI() * T::PI();
    omega * omega * omega * a / (T::lit(16.0) * pi3 * constants.epsilon0 * constants.hbar * c3)
}

/// Golden-rule decay rate `2 pi J(omega)` of `|alpha|^2` for dipole `d`.
pub fn golden_rule_rate_from_dipole<T: Real>(omega: T, d: &CVec3<T>, constants: &FieldConstants<T>) -> T {
    T::TAU() * spectral_density(omega, d, constants)
}

/// Uniformly discretized band `[omega - cutoff, omega + cutoff]` with a flat
/// effective spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct BathGrid<T> {
    omega: T,
    cutoff: T,
    target_gamma: T,
    detunings: Vec<T>,
    couplings: Vec<Complex<T>>,
    weights: Vec<T>,
}

pub const MIN_MODES: usize = 512;

impl<T: Real> BathGrid<T> {
    pub fn n_modes(&self) -> usize {
        self.detunings.len()
    }
    pub fn omega(&self) -> T {
        self.omega
    }
    pub fn cutoff(&self) -> T {
        self.cutoff
    }
    pub fn target_gamma(&self) -> T {
        self.target_gamma
    }
    /// `omega_k - omega`, strictly increasing and symmetric about zero.
    pub fn detunings(&self) -> &[T] {
        &self.detunings
    }
    pub fn couplings(&self) -> &[Complex<T>] {
        &self.couplings
    }
    pub fn weights(&self) -> &[T] {
        &self.weights
    }
    pub fn mode_freqs(&self) -> Vec<T> {
        self.detunings.iter().map(|d| self.omega + *d).collect()
    }
    pub fn spacing(&self) -> T {
        self.weights[0]
    }

    /// `K(0) = sum_k |g_k|^2`.
    pub fn coupling_sum(&self) -> T {
        self.couplings.iter().fold(T::zero(), |a, g| a + g.norm_sqr())
    }

    /// Golden-rule rate `2 pi sum_k |g_k|^2 delta(delta_k)`, with the delta
    /// function replaced by a unit-area box of 32 grid spacings centred on
    /// resonance.
    pub fn golden_rule_rate(&self) -> T {
        let half = T::lit(16.0) * self.spacing();
        let inside = self
            .detunings
            .iter()
            .zip(&self.couplings)
            .filter(|(d, _)| d.abs() < half)
            .fold(T::zero(), |a, (_, g)| a + g.norm_sqr());
        T::TAU() * inside / (half + half)
    }

    /// Memory kernel `K(tau) = sum_k |g_k|^2 e^{-i delta_k tau}`.
    pub fn kernel(&self, tau: T) -> Complex<T> {
        self.detunings
            .iter()
            .zip(&self.couplings)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (d, g)| {
                acc + Complex::from_polar(g.norm_sqr(), -*d * tau)
            })
    }
}

/// Builds a flat band whose golden-rule rate equals `target_gamma`:
/// `|g_k|^2 = target_gamma * h / (2 pi)` on a midpoint grid of spacing
/// `h = 2 cutoff / n_modes`.
pub fn build_bath<T: Real>(target_gamma: T, omega: T, cutoff: T, n_modes: usize) -> Result<BathGrid<T>> {
    if !(target_gamma > T::zero() && target_gamma.is_finite()) {
        return Err(Error::Domain(format!("target gamma {target_gamma} must be > 0")));
    }
    if !(cutoff >= T::lit(20.0) * target_gamma && cutoff.is_finite()) {
        return Err(Error::Domain(format!(
            "cutoff {cutoff} must be at least 20 gamma = {}",
            T::lit(20.0) * target_gamma
        )));
    }
    if n_modes == 0 || cutoff / T::from_count(n_modes) > target_gamma / T::lit(20.0) {
        return Err(Error::Domain(format!(
            "grid too coarse: cutoff/n_modes = {} exceeds gamma/20 = {}",
            cutoff / T::from_count(n_modes.max(1)),
            target_gamma / T::lit(20.0)
        )));
    }
    if n_modes < MIN_MODES {
        return Err(Error::Domain(format!("n_modes = {n_modes} below minimum {MIN_MODES}")));
    }
    if !(omega >= T::lit(10.0) * cutoff && omega.is_finite()) {
        return Err(Error::Domain(format!(
            "carrier {omega} must exceed the band half-width {cutoff} by at least 10x"
        )));
    }
    let h = (cutoff + cutoff) / T::from_count(n_modes);
    let detunings: Vec<T> = (0..n_modes)
        .map(|k| -cutoff + (T::from_count(k) + T::lit(0.5)) * h)
        .collect();
    // g_{k,s} carries a -i phase; only |g|^2 enters the dynamics.
    let g = (target_gamma * h / T::TAU()).sqrt();
    let couplings = vec![Complex::new(T::zero(), -g); n_modes];
    let weights = vec![h; n_modes];
    Ok(BathGrid {
        omega,
        cutoff,
        target_gamma,
        detunings,
        couplings,
        weights,
    })
}

/// Whether the post-selection term enters `d(alpha)/dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Postselection {
    Off,
    On(RateForm),
}

impl Postselection {
    fn coefficient<T: Real>(self, params: &ModelParams<T>) -> T {
        match self {
            Postselection::Off => T::zero(),
            Postselection::On(_) if params.delta() == T::zero() => T::zero(),
            Postselection::On(form) => params.delta() * T::lit(0.5) * postselection_factor(params.epsilon(), form),
        }
    }
}

/// Atom plus single-photon amplitudes at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState<T> {
    pub alpha: Complex<T>,
    /// `b_k = beta_k / sqrt(2)`, one per bath mode.
    pub betas: Vec<Complex<T>>,
    pub time: T,
}

impl<T: Real> FullState<T> {
    pub fn norm_sqr(&self) -> T {
        self.betas.iter().fold(self.alpha.norm_sqr(), |a, b| a + b.norm_sqr())
    }
}

/// Output of [`evolve_modes_detailed`].
#[derive(Debug, Clone)]
pub struct ModeEvolution<T> {
    pub trajectory: AmplitudeTrajectory<T>,
    /// `|alpha|^2 + sum |b_k|^2` on the trajectory grid.
    pub norms: Vec<T>,
    pub final_state: FullState<T>,
}

fn check_run<T: Real>(bath: &BathGrid<T>, params: &ModelParams<T>, t_end: T, dt: T) -> Result<()> {
    let bound = T::lit(0.1) / bath.cutoff;
    if !(dt > T::zero()) || dt > bound * (T::one() + T::lit(1e-12)) {
        return Err(Error::StepSizeTooLarge {
            dt: dt.as_f64(),
            bound: bound.as_f64(),
        });
    }
    let rel = ((params.gamma() - bath.target_gamma) / bath.target_gamma).abs();
    if rel > T::lit(1e-9) {
        return Err(Error::Domain(format!(
            "model gamma {} differs from the bath's {}",
            params.gamma(),
            bath.target_gamma
        )));
    }
    let limit = T::lit(10.0) / params.gamma();
    if !(t_end >= T::zero()) || t_end > limit * (T::one() + T::lit(1e-12)) {
        return Err(Error::Domain(format!(
            "t_end = {t_end} must lie in [0, 10/gamma = {limit}]"
        )));
    }
    Ok(())
}

/// Integrates the coupled `alpha`/`b_k` equations with fixed-step classical
/// RK4 from `alpha(0) = 1`, `b_k(0) = 0`.
pub fn evolve_modes<T: Real>(
    bath: &BathGrid<T>,
    params: &ModelParams<T>,
    t_end: T,
    dt: T,
    postselect: Postselection,
) -> Result<AmplitudeTrajectory<T>> {
    evolve_modes_detailed(bath, params, t_end, dt, postselect).map(|e| e.trajectory)
}

pub fn evolve_modes_detailed<T: Real>(
    bath: &BathGrid<T>,
    params: &ModelParams<T>,
    t_end: T,
    dt: T,
    postselect: Postselection,
) -> Result<ModeEvolution<T>> {
    check_run(bath, params, t_end, dt)?;
    let times = uniform_grid(dt, t_end)?;
    let c = postselect.coefficient(params);
    let n = bath.n_modes();
    let zero = Complex::new(T::zero(), T::zero());
    let i = Complex::new(T::zero(), T::one());
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);

    // ig[k] = i g_k and igc[k] = i g_k^*, folded once.
    let ig: Vec<Complex<T>> = bath.couplings.iter().map(|g| i * g).collect();
    let igc: Vec<Complex<T>> = bath.couplings.iter().map(|g| i * g.conj()).collect();
    let phasors = |t: T, out: &mut Vec<Complex<T>>| {
        out.clear();
        out.extend(bath.detunings.iter().map(|d| Complex::from_polar(T::one(), -*d * t)));
    };

    let mut alpha = Complex::new(T::one(), T::zero());
    let mut b = vec![zero; n];
    let mut b_stage = vec![zero; n];
    let mut acc = vec![zero; n];
    let (mut e0, mut eh, mut e1) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    phasors(T::zero(), &mut e0);

    let mut alphas = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    alphas.push(alpha);
    norms.push(T::one());

    // d(alpha)/dt for stage amplitudes, with E_k = e^{-i delta_k t}.
    let alpha_rate = |a: Complex<T>, bs: &[Complex<T>], e: &[Complex<T>]| {
        let coupling = ig
            .iter()
            .zip(bs)
            .zip(e)
            .fold(zero, |s, ((g, bk), ek)| s + *g * *ek * *bk);
        coupling + a * c
    };

    for step in 1..times.len() {
        let t0 = times[step - 1];
        phasors(t0 + dt * half, &mut eh);
        phasors(times[step], &mut e1);

        // Stage 1
        let ka1 = alpha_rate(alpha, &b, &e0);
        for k in 0..n {
            let kb = igc[k] * e0[k].conj() * alpha;
            acc[k] = kb;
            b_stage[k] = b[k] + kb * (dt * half);
        }
        // Stage 2
        let a2 = alpha + ka1 * (dt * half);
        let ka2 = alpha_rate(a2, &b_stage, &eh);
        for k in 0..n {
            let kb = igc[k] * eh[k].conj() * a2;
            acc[k] += kb + kb;
            b_stage[k] = b[k] + kb * (dt * half);
        }
        // Stage 3
        let a3 = alpha + ka2 * (dt * half);
        let ka3 = alpha_rate(a3, &b_stage, &eh);
        for k in 0..n {
            let kb = igc[k] * eh[k].conj() * a3;
            acc[k] += kb + kb;
            b_stage[k] = b[k] + kb * dt;
        }
        // Stage 4
        let a4 = alpha + ka3 * dt;
        let ka4 = alpha_rate(a4, &b_stage, &e1);
        for k in 0..n {
            let kb = igc[k] * e1[k].conj() * a4;
            b[k] += (acc[k] + kb) * (dt * sixth);
        }
        alpha += (ka1 + ka2 + ka2 + ka3 + ka3 + ka4) * (dt * sixth);

        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude {
                time: times[step].as_f64(),
            });
        }
        std::mem::swap(&mut e0, &mut e1);
        alphas.push(alpha);
        norms.push(b.iter().fold(alpha.norm_sqr(), |s, bk| s + bk.norm_sqr()));
    }

    if norms.iter().any(|x| !x.is_finite()) {
        let j = norms.iter().position(|x| !x.is_finite()).unwrap_or(0);
        return Err(Error::NonFiniteAmplitude {
            time: times[j].as_f64(),
        });
    }
    let final_state = FullState {
        alpha,
        betas: b,
        time: *times.last().expect("grid holds t = 0"),
    };
    Ok(ModeEvolution {
        trajectory: AmplitudeTrajectory::new(times, alphas),
        norms,
        final_state,
    })
}

/// Integrates the history-convolution form
/// `d(alpha)/dt = -int_0^t K(t - s) alpha(s) ds + c alpha(t)` with trapezoidal
/// quadrature for the history and trapezoidal (implicit) time stepping.
/// Cost is quadratic in the number of steps.
pub fn evolve_kernel<T: Real>(
    bath: &BathGrid<T>,
    params: &ModelParams<T>,
    t_end: T,
    dt: T,
    postselect: Postselection,
) -> Result<AmplitudeTrajectory<T>> {
    check_run(bath, params, t_end, dt)?;
    let times = uniform_grid(dt, t_end)?;
    let steps = times.len();
    let c = postselect.coefficient(params);
    let half = T::lit(0.5);
    let kernel: Vec<Complex<T>> = times.iter().map(|&tau| bath.kernel(tau)).collect();

    let mut alpha = Vec::with_capacity(steps);
    alpha.push(Complex::new(T::one(), T::zero()));
    // F_0 = c alpha_0, the history integral being empty.
    let mut f_prev = alpha[0] * c;
    let denom =
        Complex::new(T::one(), T::zero()) - (Complex::new(c, T::zero()) - kernel[0] * (dt * half)) * (dt * half);

    for n in 0..steps - 1 {
        // Known part of -I(t_{n+1}): everything except the alpha_{n+1} endpoint.
        let m = n + 1;
        let mut hist = kernel[m] * alpha[0] * half;
        for j in 1..m {
            hist += kernel[m - j] * alpha[j];
        }
        let known = -hist * dt;
        let next = (alpha[n] + (f_prev + known) * (dt * half)) / denom;
        if !(next.re.is_finite() && next.im.is_finite()) {
            return Err(Error::NonFiniteAmplitude {
                time: times[m].as_f64(),
            });
        }
        f_prev = known - kernel[0] * next * (dt * half) + next * c;
        alpha.push(next);
    }
    Ok(AmplitudeTrajectory::new(times, alpha))
}
