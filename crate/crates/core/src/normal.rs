//! Standard normal distribution and error-function helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Below this argument `erfcx` is evaluated as `exp(x²)·erfc(x)`.
const ERFCX_SERIES_CUTOFF: f64 = 5.0;
const ERFCX_CF_TERMS: usize = 120;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF `Φ(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival `1 − Φ(x)`, without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// For `x ≥ 5` a backward-evaluated continued fraction is used, so the result
/// stays accurate and representable far beyond the point where `erfc`
/// underflows. For `x < 0` the reflection `2·exp(x²) − erfcx(−x)` is used and
/// may overflow to `+∞` once `x² > 709`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < ERFCX_SERIES_CUTOFF {
        return (x * x).exp() * libm::erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    // erfc(x) = exp(-x²)/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = 0.0;
    for k in (1..=ERFCX_CF_TERMS).rev() {
        tail = (k as f64 * 0.5) / (x + tail);
    }
    FRAC_1_SQRT_PI / (x + tail)
}

/// `(1 − Φ(t))·exp(t²/2)` for `t ≥ 0`.
#[inline]
pub(crate) fn scaled_sf(t: f64) -> f64 {
    0.5 * erfcx(t * FRAC_1_SQRT_2)
}

/// `Φ(b) − Φ(a)` for `a ≤ b` straddling or near zero, via `erf` so that
/// narrow central intervals keep full relative precision.
#[inline]
pub(crate) fn central_mass(a: f64, b: f64) -> f64 {
    0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2))
}
