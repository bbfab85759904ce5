//! Special functions: Bessel J0, the error function, and Gaussian masses.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Crossover between the power series and the large-argument form of J0.
const J0_SPLIT: f64 = 8.0;

/// Bessel function of the first kind, order zero.
///
/// For `|x| <= 8` the Maclaurin series is summed in `(x/2)^2`; the largest
/// partial term there is about 113, so cancellation costs at most two digits.
/// Beyond the crossover the function is evaluated from Bessel's integral
/// `J0(x) = (1/2pi) * int_0^{2pi} cos(x cos t) dt` with the periodic
/// trapezoid rule, whose aliasing error is bounded by `2 |J_N(x)|` for `N`
/// nodes and is negligible once `N` exceeds `x` by a few dozen.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 of non-finite argument {x}")));
    }
    Ok(j0_unchecked(x))
}

pub(crate) fn j0_unchecked(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= J0_SPLIT {
        j0_series_sq(ax * ax)
    } else {
        j0_bessel_integral(ax)
    }
}

/// `J0(sqrt(y))` for `y >= 0`, avoiding the square root on the series branch.
///
/// The half-kernels evaluate `J0(sqrt(z t))` hundreds of millions of times, so
/// this entry point takes the product directly.
#[inline]
pub(crate) fn j0_of_sqrt(y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    if y <= J0_SPLIT * J0_SPLIT {
        j0_series_sq(y)
    } else {
        j0_bessel_integral(y.sqrt())
    }
}

#[inline]
fn j0_series_sq(y: f64) -> f64 {
    let q = -0.25 * y;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 1.0;
    loop {
        term *= q / (m * m);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-3) || m > 60.0 {
            return sum;
        }
        m += 1.0;
    }
}

fn j0_bessel_integral(x: f64) -> f64 {
    // Nodes in a quarter period suffice: the integrand is even about 0 and pi/2.
    let quarter = (x.ceil() as usize) / 2 + 24;
    let n = 4 * quarter;
    let step = 2.0 * PI / n as f64;
    let mut sum = 0.5 * ((x).cos() + 1.0); // theta = 0 and theta = pi/2, halved
    for k in 1..quarter {
        sum += (x * (step * k as f64).cos()).cos();
    }
    sum / quarter as f64
}

/// Error function, accurate to about one unit in the last place.
pub fn erf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("erf of non-finite argument {x}")));
    }
    Ok(libm::erf(x))
}

/// Complementary error function `1 - erf(x)` without cancellation for large `x`.
pub fn erfc(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("erfc of non-finite argument {x}")));
    }
    Ok(libm::erfc(x))
}

/// Standard normal density.
#[inline]
pub(crate) fn normal_pdf(u: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Probability mass of the standard normal law on `[a, b]`, `a <= b`.
///
/// Differences are taken between upper or lower tail probabilities, whichever
/// is small, so masses far out in either tail keep full relative precision.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * (libm::erfc(b * FRAC_1_SQRT_2) + libm::erfc(-a * FRAC_1_SQRT_2))
    }
}
