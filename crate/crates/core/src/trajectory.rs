//! Arrival-time statistics.
//!
//! Two models sit side by side:
//!
//! * the post-selected amplitude model, whose scattering-time density is
//!   `gamma_eff exp(-gamma_eff t)` and whose mean diverges as
//!   `eps -> delta/gamma`;
//! * a quantum-jump conditional model: `|S>` precesses under the splitting
//!   while decaying uniformly at `gamma`, and detection projects onto the
//!   eps-rotated state, giving `p(t) ∝ exp(-gamma t) sin^2(eps - delta t/2)`.
//!   Its mean stays bounded and tends to `3/gamma` at `eps = 0`.
//!
//! Sample `i` of a run only ever reads counter `i` of its substream, so the
//! sample sequence is independent of how the index range is split across
//! workers.

use std::io::{self, Write};
use std::thread;

use crate::error::{Error, Result};
use crate::markov::{effective_rate, ModelParams, RateForm};
use crate::quadrature::integrate_to_infinity;
use crate::rng::{standard_exponential, unit_f64, CounterRng, RngSpec};
use crate::scalar::Real;

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_BINS: usize = 50;

/// Summary of a batch of arrival times.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary<T> {
    pub n: usize,
    pub mean: T,
    /// Sample standard deviation over `sqrt(n)`.
    pub stderr: T,
    /// Histogram bin edges in units of `1/gamma`.
    pub edges: Vec<T>,
    pub counts: Vec<u64>,
}

impl<T: Real> SampleSummary<T> {
    /// Summarizes `samples` in order. `gamma` sets the histogram unit; the
    /// bins cover `[0, max]` uniformly and the last bin is closed.
    pub fn from_samples(samples: &[T], gamma: T, bins: usize) -> Result<Self> {
        if samples.len() < 2 || bins == 0 {
            return Err(Error::Domain("summary needs at least two samples and one bin".into()));
        }
        let n = T::from_count(samples.len());
        let mean = samples.iter().fold(T::zero(), |a, x| a + *x) / n;
        let ss = samples.iter().fold(T::zero(), |a, x| a + (*x - mean) * (*x - mean));
        let stderr = (ss / (n - T::one())).sqrt() / n.sqrt();

        let top = samples.iter().fold(T::zero(), |a, x| a.max(*x)) * gamma;
        let width = if top > T::zero() {
            top / T::from_count(bins)
        } else {
            T::one()
        };
        let edges: Vec<T> = (0..=bins).map(|j| T::from_count(j) * width).collect();
        let mut counts = vec![0u64; bins];
        for x in samples {
            let j = (*x * gamma / width).floor().to_usize().unwrap_or(0).min(bins - 1);
            counts[j] += 1;
        }
        Ok(Self {
            n: samples.len(),
            mean,
            stderr,
            edges,
            counts,
        })
    }

    /// JSON object `{n, mean, stderr, bins, counts}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "mean": self.mean.as_f64(),
            "stderr": self.stderr.as_f64(),
            "bins": self.edges.iter().map(|e| e.as_f64()).collect::<Vec<_>>(),
            "counts": self.counts,
        })
    }
}

/// Writes samples as CSV with header `t_over_gamma_inv`.
pub fn write_samples_csv<T: Real, W: Write>(mut w: W, samples: &[T], gamma: T) -> io::Result<()> {
    writeln!(w, "t_over_gamma_inv")?;
    for t in samples {
        writeln!(w, "{}", *t * gamma)?;
    }
    Ok(())
}

/// Contiguous run of samples starting at a global index.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleChunk<T> {
    pub start: u64,
    pub samples: Vec<T>,
}

/// Concatenates chunks in index order; the result does not depend on the
/// order in which chunks arrive.
pub fn merge_chunks<T>(mut chunks: Vec<SampleChunk<T>>) -> Vec<T> {
    chunks.sort_by_key(|c| c.start);
    chunks.into_iter().flat_map(|c| c.samples).collect()
}

/// Splits `[start, end)` into `workers` contiguous ranges.
fn partition(start: u64, end: u64, workers: usize) -> Vec<(u64, u64)> {
    let workers = workers.max(1) as u64;
    let len = end - start;
    (0..workers)
        .map(|w| (start + len * w / workers, start + len * (w + 1) / workers))
        .filter(|(a, b)| b > a)
        .collect()
}

fn run_partitioned<T, F>(start: u64, end: u64, workers: usize, job: F) -> Vec<SampleChunk<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Vec<T> + Sync,
{
    let ranges = partition(start, end, workers);
    if ranges.len() <= 1 {
        return ranges
            .into_iter()
            .map(|(a, b)| SampleChunk {
                start: a,
                samples: job(a, b),
            })
            .collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(a, b)| {
                let job = &job;
                s.spawn(move || SampleChunk {
                    start: a,
                    samples: job(a, b),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampling worker panicked"))
            .collect()
    })
}

fn check_count(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            requested: n,
            minimum: MIN_SAMPLES,
        });
    }
    Ok(())
}

/// Raw scattering-time samples of the post-selected amplitude model by
/// inverse transform, split over `workers` threads.
pub fn scattering_time_samples<T: Real>(
    params: &ModelParams<T>,
    form: RateForm,
    n: usize,
    rng: RngSpec,
    workers: usize,
) -> Result<Vec<T>> {
    check_count(n)?;
    let rate = effective_rate(params, form);
    if !(rate > T::zero()) {
        return Err(Error::UnphysicalRegion {
            epsilon: params.epsilon().as_f64(),
            threshold: params.weakness_ratio().as_f64(),
            effective_rate: rate.as_f64(),
        });
    }
    let chunks = run_partitioned(0, n as u64, workers, |a, b| {
        let mut r = CounterRng::new(rng);
        (a..b).map(|i| T::lit(standard_exponential(r.word(i))) / rate).collect()
    });
    Ok(merge_chunks(chunks))
}

/// Monte Carlo estimate of the mean scattering time.
pub fn sample_scattering_times<T: Real>(
    params: &ModelParams<T>,
    form: RateForm,
    n: usize,
    rng: RngSpec,
) -> Result<SampleSummary<T>> {
    sample_scattering_times_par(params, form, n, rng, 1)
}

pub fn sample_scattering_times_par<T: Real>(
    params: &ModelParams<T>,
    form: RateForm,
    n: usize,
    rng: RngSpec,
    workers: usize,
) -> Result<SampleSummary<T>> {
    let samples = scattering_time_samples(params, form, n, rng, workers)?;
    SampleSummary::from_samples(&samples, params.gamma(), DEFAULT_BINS)
}

/// Rejection envelope used by the conditional sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// `exp(-gamma t)`; acceptance `sin^2(eps - delta t/2)`.
    Exponential,
    /// `exp(-gamma t) (eps + delta t/2)^2`, a three-term gamma-distribution
    /// mixture; acceptance `sin^2(x)/x_max^2` with `|sin x| <= |x|`.
    Polynomial,
}

/// Conditional arrival-time density with its normalization and mean,
/// both computed once by adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalArrival<T> {
    params: ModelParams<T>,
    norm: T,
    mean: T,
}

const QUAD_REL_TOL: f64 = 1e-12;

impl<T: Real> ConditionalArrival<T> {
    pub fn new(params: &ModelParams<T>) -> Result<Self> {
        let p = *params;
        let unnorm = move |t: T| Self::weight(&p, t);
        let norm = integrate_to_infinity(unnorm, T::zero(), T::lit(QUAD_REL_TOL), T::zero())?.value;
        if !(norm > T::zero()) {
            return Err(Error::Domain(
                "conditional density vanishes identically (eps = 0 and delta = 0)".into(),
            ));
        }
        let first = integrate_to_infinity(
            move |t: T| t * Self::weight(&p, t),
            T::zero(),
            T::lit(QUAD_REL_TOL),
            T::zero(),
        )?
        .value;
        Ok(Self {
            params: p,
            norm,
            mean: first / norm,
        })
    }

    /// `exp(-gamma t) sin^2(eps - delta t / 2)`.
    fn weight(p: &ModelParams<T>, t: T) -> T {
        let s = (p.epsilon() - p.delta() * t * T::lit(0.5)).sin();
        (-p.gamma() * t).exp() * s * s
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    /// `int_0^inf exp(-gamma t) sin^2(eps - delta t/2) dt`.
    pub fn normalization(&self) -> T {
        self.norm
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn density(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        Self::weight(&self.params, t) / self.norm
    }

    fn polynomial_weights(&self) -> [T; 3] {
        let (e, d, g) = (self.params.epsilon(), self.params.delta(), self.params.gamma());
        [e * e / g, e * d / (g * g), d * d / (T::lit(2.0) * g * g * g)]
    }

    /// Picks the envelope with the smaller total mass.
    pub fn envelope(&self) -> Envelope {
        let w = self.polynomial_weights();
        if w[0] + w[1] + w[2] < self.params.gamma().recip() {
            Envelope::Polynomial
        } else {
            Envelope::Exponential
        }
    }
}

/// Normalized conditional arrival density at `t`.
pub fn conditional_arrival_density<T: Real>(t: T, params: &ModelParams<T>) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::Domain(format!("time {t} must be >= 0")));
    }
    Ok(ConditionalArrival::new(params)?.density(t))
}

/// Output of the conditional rejection sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSamples<T> {
    pub samples: Vec<T>,
    pub summary: SampleSummary<T>,
    /// Proposals consumed up to and including the n-th accepted one.
    pub proposals: u64,
    pub acceptance_rate: f64,
    pub envelope: Envelope,
}

const PROPOSAL_BATCH: u64 = 1 << 16;

/// One proposal per counter: word 0 picks the mixture component, words 1-3
/// are exponential variates, word 4 decides acceptance.
fn propose<T: Real>(
    model: &ConditionalArrival<T>,
    envelope: Envelope,
    weights: [T; 3],
    words: [u64; 8],
) -> Result<Option<T>> {
    let p = &model.params;
    let g = p.gamma();
    let half_delta = p.delta() * T::lit(0.5);
    let (t, env) = match envelope {
        Envelope::Exponential => {
            let t = T::lit(standard_exponential(words[1])) / g;
            (t, (-g * t).exp())
        }
        Envelope::Polynomial => {
            let total = weights[0] + weights[1] + weights[2];
            let u = T::lit(unit_f64(words[0])) * total;
            let shape = if u < weights[0] {
                1
            } else if u < weights[0] + weights[1] {
                2
            } else {
                3
            };
            let t = words[1..=shape]
                .iter()
                .fold(T::zero(), |a, w| a + T::lit(standard_exponential(*w)))
                / g;
            let x = p.epsilon() + half_delta * t;
            (t, (-g * t).exp() * x * x)
        }
    };
    let target = ConditionalArrival::weight(p, t);
    if !(env > T::zero()) {
        return Ok(None);
    }
    let ratio = target / env;
    if ratio > T::one() + T::lit(1e-12) {
        return Err(Error::EnvelopeViolation {
            time: t.as_f64(),
            density: (target / model.norm).as_f64(),
            envelope: (env / model.norm).as_f64(),
        });
    }
    Ok((T::lit(unit_f64(words[4])) < ratio).then_some(t))
}

/// Rejection sampling of the conditional density, split over `workers`
/// threads. Proposals are consumed in counter order, so the first `n`
/// accepted samples are the same for any worker count.
pub fn sample_conditional_arrivals_par<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    rng: RngSpec,
    workers: usize,
) -> Result<ConditionalSamples<T>> {
    check_count(n)?;
    let model = ConditionalArrival::new(params)?;
    let envelope = model.envelope();
    let weights = model.polynomial_weights();

    let mut accepted: Vec<(u64, T)> = Vec::with_capacity(n);
    let mut next = 0u64;
    while accepted.len() < n {
        let end = next + PROPOSAL_BATCH;
        let chunks = run_partitioned(next, end, workers, |a, b| {
            let mut r = CounterRng::new(rng);
            let mut out = Vec::new();
            for i in a..b {
                match propose(&model, envelope, weights, r.block(i)) {
                    Ok(Some(t)) => out.push(Ok((i, t))),
                    Ok(None) => {}
                    Err(e) => {
                        out.push(Err(e));
                        break;
                    }
                }
            }
            out
        });
        for item in merge_chunks(chunks) {
            accepted.push(item?);
        }
        next = end;
        if next > u64::MAX / 2 {
            return Err(Error::Domain(
                "rejection sampler failed to accept enough proposals".into(),
            ));
        }
    }
    accepted.truncate(n);
    let proposals = accepted.last().map_or(0, |(i, _)| i + 1);
    let samples: Vec<T> = accepted.into_iter().map(|(_, t)| t).collect();
    let summary = SampleSummary::from_samples(&samples, params.gamma(), DEFAULT_BINS)?;
    Ok(ConditionalSamples {
        samples,
        summary,
        proposals,
        acceptance_rate: n as f64 / proposals as f64,
        envelope,
    })
}

pub fn sample_conditional_arrivals<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    rng: RngSpec,
) -> Result<ConditionalSamples<T>> {
    sample_conditional_arrivals_par(params, n, rng, 1)
}
