//! Globally adaptive quadrature on a fixed-order nested rule (Gauss 7 /
//! Kronrod 15).
//!
//! The worst segment (largest estimated error) is bisected until the summed
//! error estimate drops below the requested absolute tolerance. Kernels in
//! this crate are piecewise-defined, so callers must pass the regime switch
//! points as breakpoints; the rule itself assumes smoothness per segment.

use std::collections::BinaryHeap;

use crate::config::QUAD_MAX_SEGMENTS;
use crate::error::{Error, Result};

// 15-point Kronrod abscissae (positive half), embedding the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];
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

/// Integral value with its estimated absolute error.
#[derive(Clone, Copy, Debug)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut e = err.abs();
    if resasc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / resasc).powf(1.5);
        e = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

fn qk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut fv1 = [0.0_f64; 7];
    let mut fv2 = [0.0_f64; 7];
    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK[7];
    let mut res_abs = res_kronrod.abs();

    for (j, wg) in WG.iter().enumerate().take(3) {
        let jtw = j * 2 + 1;
        let dx = half * XGK[jtw];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += wg * (f1 + f2);
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    res_gauss += WG[3] * f_center;

    for j in 0..4 {
        let jtwm1 = j * 2;
        let dx = half * XGK[jtwm1];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let err = (res_kronrod - res_gauss) * half;
    let value = res_kronrod * half;
    let abserr = rescale_error(err, res_abs * half.abs(), res_asc * half.abs());
    (value, abserr)
}

#[derive(PartialEq)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Single 15-point panel over `[lo, hi]`: `(value, error estimate)`.
/// For smooth integrands over narrow intervals this is relatively accurate
/// to machine precision without the cancellation of differencing
/// antiderivatives.
pub(crate) fn gk15_panel<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> (f64, f64) {
    qk15(&mut f, lo, hi)
}

/// Adaptive integral of `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    integrate_adaptive_est(f, lo, hi, tol).map(|e| e.value)
}

/// Adaptive integral returning the error estimate alongside the value.
pub fn integrate_adaptive_est<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<QuadEstimate> {
    if !(lo < hi) || !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!(
            "invalid integration range or tolerance: [{lo}, {hi}], tol {tol}"
        )));
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = qk15(&mut f, lo, hi);
    heap.push(Segment { lo, hi, value: v, error: e });
    let mut total_err = e;

    let mut n_segments = 1usize;
    while total_err > tol {
        if n_segments >= QUAD_MAX_SEGMENTS {
            return Err(Error::NoConvergence {
                what: "adaptive quadrature",
                detail: format!(
                    "error {total_err:.3e} above tol {tol:.3e} after {n_segments} segments"
                ),
            });
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // interval at floating-point resolution; keep its estimate
            total_err -= worst.error;
            let shrunk = Segment { error: 0.0, ..worst };
            heap.push(shrunk);
            continue;
        }
        total_err -= worst.error;
        let (v1, e1) = qk15(&mut f, worst.lo, mid);
        let (v2, e2) = qk15(&mut f, mid, worst.hi);
        total_err += e1 + e2;
        heap.push(Segment { lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Segment { lo: mid, hi: worst.hi, value: v2, error: e2 });
        n_segments += 1;
    }

    // sort by position before summing so the result is deterministic
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let value = segs.iter().map(|s| s.value).sum();
    let error = segs.iter().map(|s| s.error).sum();
    Ok(QuadEstimate { value, error })
}

/// Integral with interior breakpoints (regime boundaries of piecewise
/// integrands). Breakpoints outside `(lo, hi)` are ignored.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    breakpoints: &[f64],
) -> Result<QuadEstimate> {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(&cuts);
    edges.push(hi);

    let per_tol = tol / edges.len() as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    for w in edges.windows(2) {
        let est = integrate_adaptive_est(&mut f, w[0], w[1], per_tol)?;
        value += est.value;
        error += est.error;
    }
    Ok(QuadEstimate { value, error })
}
