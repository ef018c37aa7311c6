//! Bracketed scalar root-finding.
//!
//! Brent's method: inverse quadratic / secant steps safeguarded by bisection,
//! so convergence never leaves the initial bracket. The equations solved in
//! this crate all come with known monotone brackets, which is why no
//! open-ended Newton iteration exists here.

use crate::config::ROOT_MAX_ITER;
use crate::error::{Error, Result};

/// Finds `x` in `[lo, hi]` with `f(x) = 0`, assuming `f(lo)` and `f(hi)`
/// have opposite signs (or one of them is an exact root).
///
/// `tol` is an absolute tolerance on the bracket width; the effective
/// tolerance never drops below a few ulps of the current iterate.
pub fn find_root_bracketed<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    find_root_bracketed_capped(f, lo, hi, tol, ROOT_MAX_ITER)
}

/// Same as [`find_root_bracketed`] with an explicit iteration cap.
pub fn find_root_bracketed_capped<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    if !(tol > 0.0) || !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(Error::Domain(format!(
            "invalid bracket or tolerance: [{lo}, {hi}], tol {tol}"
        )));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo, hi, f_lo: fa, f_hi: fb });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..max_iter {
        if fb.abs() > fc.abs() {
            // b must be the best iterate; c the previous one
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // attempt inverse quadratic interpolation (secant if a == c)
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(Error::NoConvergence {
        what: "root finder",
        detail: format!("bracket [{lo}, {hi}] after {max_iter} iterations"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_root() {
        let r = find_root_bracketed(|x| x * x - 4.0, 0.0, 3.0, 1e-12).unwrap();
        assert!((r - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn linear_root() {
        let r = find_root_bracketed(|x| x - 1.0, 0.5, 2.0, 1e-12).unwrap();
        assert!((r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn erf_half_matches_series_oracle() {
        // Independent oracle: bisection on the Maclaurin series of erf.
        fn erf_series(x: f64) -> f64 {
            let mut term = x;
            let mut sum = x;
            for n in 1..60 {
                let nf = n as f64;
                term *= -x * x / nf;
                sum += term / (2.0 * nf + 1.0);
                if term.abs() < 1e-18 {
                    break;
                }
            }
            sum * 2.0 / std::f64::consts::PI.sqrt()
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if erf_series(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let expected = 0.5 * (lo + hi);
        assert!((expected - 0.476936276204_f64).abs() < 1e-10);

        let r = find_root_bracketed(|x| crate::numerics::special::erf(x) - 0.5, 0.0, 1.0, 1e-10)
            .unwrap();
        assert!((r - expected).abs() <= 1e-10);
    }

    #[test]
    fn root_stays_inside_bracket() {
        for k in 1..50 {
            let s = k as f64 / 10.0;
            let f = |x: f64| (x - s).tanh() + 0.1 * (x - s);
            let lo = s - 2.0 - 0.3 * s;
            let hi = s + 1.0 + 0.7 * s;
            let r = find_root_bracketed(f, lo, hi, 1e-13).unwrap();
            assert!(r >= lo && r <= hi);
            assert!((r - s).abs() < 1e-10);
        }
    }

    #[test]
    fn same_sign_bracket_rejected() {
        let err = find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Bracket { .. }));
    }

    #[test]
    fn iteration_cap_reported() {
        let err = find_root_bracketed_capped(|x| x.cos() - x, 0.0, 1.0, 1e-15, 2).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
