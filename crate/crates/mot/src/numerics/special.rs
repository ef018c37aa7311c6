//! Error function and standard normal helpers.
//!
//! `erf`/`erfc` delegate to libm (correctly rounded to ~1 ulp); the normal
//! CDF is assembled from `erfc` on whichever side keeps the result
//! relatively accurate, so survival probabilities far in the tails do not
//! lose precision to cancellation.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF, relatively accurate in the lower tail.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal survival function, relatively accurate in the upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Standard normal quantile (inverse CDF).
///
/// Solved by bracketed iteration on `erfc`, then polished with two Newton
/// steps; accurate to a few ulps across the full double range of `p`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // work on the lower half: Phi^{-1}(p) = -sqrt(2) * ierfc(2p) for p <= 1/2
    let (tail, sign) = if p <= 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let t = 2.0 * tail;
    let z = inverse_erfc(t)?;
    Ok(sign * std::f64::consts::SQRT_2 * z)
}

/// Quantile from the survival probability: returns `z` with `normal_sf(z) = s`.
/// Avoids forming `1 - s` so tiny survival levels keep full precision.
pub fn normal_quantile_from_sf(s: f64) -> Result<f64> {
    normal_quantile(s).map(|z| -z)
}

/// Inverse complementary error function on (0, 1]; returns z >= 0 with
/// erfc(z) = t.
fn inverse_erfc(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("inverse_erfc needs t in (0,1], got {t}")));
    }
    if t == 1.0 {
        return Ok(0.0);
    }
    // erfc decreases from 1 at 0; erfc(39) underflows, so the root of
    // erfc(z) - t lies inside [0, 39] for any representable positive t.
    let mut z = crate::numerics::find_root_bracketed(|z| erfc(z) - t, 0.0, 39.0, 1e-12)?;
    for _ in 0..2 {
        let f = erfc(z) - t;
        let df = -2.0 / std::f64::consts::PI.sqrt() * (-z * z).exp();
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        z -= step;
    }
    Ok(z.max(0.0))
}
