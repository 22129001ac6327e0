use thiserror::Error;

/// Errors raised by the simulator library.
///
/// Physical quantities are reported as `f64` regardless of the scalar type
/// the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Pre- and post-selected states are orthogonal, so the weak value is
    /// the amplification singularity itself.
    #[error("pre- and post-selected states are orthogonal (|<f|i>| = {overlap:e})")]
    OrthogonalPrePost { overlap: f64 },

    /// Effective decay rate is not positive: scattering from |i> to |f> does
    /// not occur for epsilon below delta/gamma.
    #[error(
        "unphysical region: effective rate {effective_rate} <= 0 at epsilon = {epsilon} \
         (threshold epsilon = delta/gamma = {threshold})"
    )]
    UnphysicalRegion {
        epsilon: f64,
        threshold: f64,
        effective_rate: f64,
    },

    #[error("step size {dt} exceeds stability bound {bound}")]
    StepSizeTooLarge { dt: f64, bound: f64 },

    #[error("amplitude became non-finite at t = {time}")]
    NonFiniteAmplitude { time: f64 },

    #[error("insufficient samples: {requested} requested, at least {minimum} required")]
    InsufficientSamples { requested: usize, minimum: usize },

    #[error("density {density} exceeds rejection envelope {envelope} at t = {time}")]
    EnvelopeViolation { time: f64, density: f64, envelope: f64 },

    #[error("quadrature did not converge: estimate {estimate}, error {error}")]
    QuadratureFailed { estimate: f64, error: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
