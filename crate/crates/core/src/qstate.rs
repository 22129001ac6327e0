//! State and operator algebra on the excited doublet {|+>, |->}.
//!
//! Phase convention: the post-selected state is
//! `|f(eps)> = (e^{-i eps}|+> - e^{+i eps}|->)/sqrt(2)`, so its dual carries the
//! conjugated phases and `<f|S> = +i sin(eps)`. Everything downstream (weak
//! value sign, the sign of the rate shift) is fixed by this choice.

use std::ops::{Add, Mul};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Overlaps at or below this magnitude are treated as exact orthogonality.
pub const OVERLAP_FLOOR: f64 = 1e-12;

/// Tolerance used when flagging an operator as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Pure state of the excited doublet, stored as amplitudes on |+> and |->.
///
/// Every named constructor returns a normalized ket. [`AtomicKet::from_raw`]
/// skips normalization and leaves the norm to the caller. The global phase is
/// kept as given; use [`AtomicKet::eq_up_to_phase`] for physical equality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicKet<T> {
    c_plus: Complex<T>,
    c_minus: Complex<T>,
}

impl<T: Real> AtomicKet<T> {
    /// Normalizing constructor. Fails on the zero vector.
    pub fn new(c_plus: Complex<T>, c_minus: Complex<T>) -> Result<Self> {
        let norm = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::Domain(format!("cannot normalize ket with norm {norm}")));
        }
        Ok(Self {
            c_plus: c_plus / norm,
            c_minus: c_minus / norm,
        })
    }

    /// Unnormalized constructor for fixtures; the caller owns the norm.
    pub fn from_raw(c_plus: Complex<T>, c_minus: Complex<T>) -> Self {
        Self { c_plus, c_minus }
    }

    pub fn plus() -> Self {
        Self::from_raw(Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()))
    }

    pub fn minus() -> Self {
        Self::from_raw(Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero()))
    }

    #[inline]
    pub fn c_plus(&self) -> Complex<T> {
        self.c_plus
    }

    #[inline]
    pub fn c_minus(&self) -> Complex<T> {
        self.c_minus
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.c_plus.conj() * other.c_plus + self.c_minus.conj() * other.c_minus
    }

    pub fn norm_sqr(&self) -> T {
        self.c_plus.norm_sqr() + self.c_minus.norm_sqr()
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self::from_raw(self.c_plus * factor, self.c_minus * factor)
    }

    /// True when `self = e^{i phi} other` for some phase, within `tol` on
    /// each amplitude. Both kets are assumed normalized.
    pub fn eq_up_to_phase(&self, other: &Self, tol: T) -> bool {
        let overlap = other.inner(self);
        let mag = overlap.norm();
        if !(mag > T::zero()) {
            return false;
        }
        let phase = overlap / mag;
        let aligned = other.scale(phase);
        (self.c_plus - aligned.c_plus).norm() <= tol && (self.c_minus - aligned.c_minus).norm() <= tol
    }
}

/// `|S> = (|+> + |->)/sqrt(2)`.
pub fn symmetric_state<T: Real>() -> AtomicKet<T> {
    let h = T::FRAC_1_SQRT_2();
    AtomicKet::from_raw(Complex::new(h, T::zero()), Complex::new(h, T::zero()))
}

/// `|A> = (|+> - |->)/sqrt(2)`.
pub fn antisymmetric_state<T: Real>() -> AtomicKet<T> {
    let h = T::FRAC_1_SQRT_2();
    AtomicKet::from_raw(Complex::new(h, T::zero()), Complex::new(-h, T::zero()))
}

/// Post-selected final state `(e^{-i eps}|+> - e^{+i eps}|->)/sqrt(2)` for
/// `eps` in `[0, pi/2]`.
pub fn postselect_state<T: Real>(epsilon: T) -> Result<AtomicKet<T>> {
    if !(epsilon >= T::zero() && epsilon <= T::FRAC_PI_2()) {
        return Err(Error::Domain(format!(
            "post-selection angle {epsilon} outside [0, pi/2]"
        )));
    }
    let h = T::FRAC_1_SQRT_2();
    Ok(AtomicKet::from_raw(
        Complex::from_polar(h, -epsilon),
        -Complex::from_polar(h, epsilon),
    ))
}

/// 2x2 operator on the {|+>, |->} basis, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator2<T> {
    m: [[Complex<T>; 2]; 2],
    hermitian: bool,
}

impl<T: Real> Operator2<T> {
    /// Builds an operator, setting the Hermitian flag when the matrix equals
    /// its conjugate transpose within [`HERMITIAN_TOL`].
    pub fn new(m: [[Complex<T>; 2]; 2]) -> Self {
        let tol = T::lit(HERMITIAN_TOL);
        let hermitian =
            (m[0][0].im).abs() <= tol && (m[1][1].im).abs() <= tol && (m[0][1] - m[1][0].conj()).norm() <= tol;
        Self { m, hermitian }
    }

    /// Hermitian operator `[[a, b], [b*, d]]`.
    pub fn hermitian(a: T, b: Complex<T>, d: T) -> Self {
        Self {
            m: [[Complex::new(a, T::zero()), b], [b.conj(), Complex::new(d, T::zero())]],
            hermitian: true,
        }
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.m[row][col]
    }

    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn apply(&self, ket: &AtomicKet<T>) -> AtomicKet<T> {
        let (a, b) = (ket.c_plus(), ket.c_minus());
        AtomicKet::from_raw(self.m[0][0] * a + self.m[0][1] * b, self.m[1][0] * a + self.m[1][1] * b)
    }

    /// `<bra|O|ket>`.
    pub fn matrix_element(&self, bra: &AtomicKet<T>, ket: &AtomicKet<T>) -> Complex<T> {
        bra.inner(&self.apply(ket))
    }

    pub fn expectation(&self, ket: &AtomicKet<T>) -> Complex<T> {
        self.matrix_element(ket, ket)
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        let mut m = self.m;
        m.iter_mut().flatten().for_each(|z| *z *= factor);
        Self::new(m)
    }
}

impl<T: Real> Add for Operator2<T> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut m = self.m;
        for (row, rrow) in m.iter_mut().zip(rhs.m.iter()) {
            for (z, r) in row.iter_mut().zip(rrow.iter()) {
                *z += *r;
            }
        }
        Self::new(m)
    }
}

impl<T: Real> Mul<T> for Operator2<T> {
    type Output = Self;

    fn mul(self, rhs: T) -> Self {
        self.scale(Complex::new(rhs, T::zero()))
    }
}

/// `sigma_z = |+><+| - |-><-|`.
pub fn sigma_z<T: Real>() -> Operator2<T> {
    Operator2::hermitian(T::one(), Complex::new(T::zero(), T::zero()), -T::one())
}

/// Weak value of an observable between a pre- and a post-selected state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakValueResult<T> {
    /// `<f|O|i> / <f|i>`.
    pub value: Complex<T>,
    /// `<f|i>`.
    pub overlap: Complex<T>,
}

/// `<f|O|i>/<f|i>`. Small overlaps are legal (that is the amplification
/// regime); only `|<f|i>| <= OVERLAP_FLOOR` is refused.
pub fn weak_value<T: Real>(
    obs: &Operator2<T>,
    pre_state: &AtomicKet<T>,
    post_state: &AtomicKet<T>,
) -> Result<WeakValueResult<T>> {
    let overlap = post_state.inner(pre_state);
    if !(overlap.norm() > T::lit(OVERLAP_FLOOR)) {
        return Err(Error::OrthogonalPrePost {
            overlap: overlap.norm().as_f64(),
        });
    }
    let value = obs.matrix_element(post_state, pre_state) / overlap;
    Ok(WeakValueResult { value, overlap })
}
