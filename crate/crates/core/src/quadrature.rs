//! Globally adaptive Gauss-Kronrod (7/15) integration.

use crate::error::{Error, Result};
use crate::scalar::Real;

// Tabulated to more digits than f64 holds.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Segment<T> {
    let half = T::lit(0.5);
    let center = (a + b) * half;
    let radius = (b - a) * half;
    let fc = f(center);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = radius * T::lit(XGK[j]);
        let pair = f(center - dx) + f(center + dx);
        kron += pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += pair * T::lit(WG[j / 2]);
        }
    }
    Segment {
        a,
        b,
        value: kron * radius,
        error: ((kron - gauss) * radius).abs(),
    }
}

/// Integrates `f` over `[a, b]` until the summed error estimate drops below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, rel_tol: T, abs_tol: T) -> Result<Quadrature<T>> {
    let mut segments = vec![kronrod(&f, a, b)];
    let mut evaluations = 15;
    loop {
        let value = segments.iter().fold(T::zero(), |acc, s| acc + s.value);
        let error = segments.iter().fold(T::zero(), |acc, s| acc + s.error);
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureFailed {
                estimate: value.as_f64(),
                error: error.as_f64(),
            });
        }
        // Below this the estimate is dominated by rounding and cannot shrink.
        let noise = T::lit(50.0) * T::epsilon() * segments.iter().fold(T::zero(), |acc, s| acc + s.value.abs());
        if error <= abs_tol.max(rel_tol * value.abs()).max(noise) {
            return Ok(Quadrature {
                value,
                error,
                evaluations,
            });
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureFailed {
                estimate: value.as_f64(),
                error: error.as_f64(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |(bi, be), (i, s)| {
                if s.error > be {
                    (i, s.error)
                } else {
                    (bi, be)
                }
            });
        let s = segments.swap_remove(worst);
        let mid = (s.a + s.b) * T::lit(0.5);
        segments.push(kronrod(&f, s.a, mid));
        segments.push(kronrod(&f, mid, s.b));
        evaluations += 30;
    }
}

/// Integrates `f` over `[a, inf)` through the map `t = a + x/(1-x)`.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, rel_tol: T, abs_tol: T) -> Result<Quadrature<T>> {
    let one = T::one();
    integrate(
        |x: T| {
            let w = one - x;
            let v = f(a + x / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                T::zero()
            }
        },
        T::zero(),
        one,
        rel_tol,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 0.0).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((q.value - exact).abs() < 1e-13);
    }

    #[test]
    fn oscillatory() {
        let q = integrate(|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::PI, 1e-12, 0.0).unwrap();
        assert!(q.value.abs() < 1e-12);
    }

    #[test]
    fn exponential_moments() {
        for rate in [0.1, 1.0, 7.5] {
            let q = integrate_to_infinity(|t: f64| t * rate * (-rate * t).exp(), 0.0, 1e-12, 0.0).unwrap();
            assert!(
                ((q.value - 1.0 / rate) * rate).abs() < 1e-10,
                "rate {rate}: {}",
                q.value
            );
        }
    }

    #[test]
    fn divergent_integrand_fails() {
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10, 0.0).is_err());
    }
}
