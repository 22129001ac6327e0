//! Post-selected Weisskopf-Wigner model of elastic resonance fluorescence
//! from a V-type atom.
//!
//! * [`qstate`]: kets and operators on the excited doublet, weak values.
//! * [`markov`]: closed-form post-selected decay, scattering times, `tau(eps)` curves.
//! * [`bath`]: discretized vacuum bath, mode and memory-kernel integrators.
//! * [`trajectory`]: Monte Carlo arrival-time sampling for the amplitude and
//!   quantum-jump models.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are what most callers want.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod error;
pub mod markov;
pub mod qstate;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use markov::RateForm;
pub use rng::RngSpec;
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;

pub type AtomicKet64 = qstate::AtomicKet<f64>;
pub type Operator2x64 = qstate::Operator2<f64>;
pub type WeakValue64 = qstate::WeakValueResult<f64>;
pub type ModelParams64 = markov::ModelParams<f64>;
pub type ScatteringTime64 = markov::ScatteringTime<f64>;
pub type TauPoint64 = markov::TauPoint<f64>;
pub type AmplitudeTrajectory64 = markov::AmplitudeTrajectory<f64>;
pub type BathGrid64 = bath::BathGrid<f64>;
pub type FieldConstants64 = bath::FieldConstants<f64>;
pub type DipolePair64 = bath::DipolePair<f64>;
pub type SampleSummary64 = trajectory::SampleSummary<f64>;

pub type AtomicKet32 = qstate::AtomicKet<f32>;
pub type ModelParams32 = markov::ModelParams<f32>;
pub type BathGrid32 = bath::BathGrid<f32>;
