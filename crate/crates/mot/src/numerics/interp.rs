//! Shape-preserving monotone interpolation tables.
//!
//! Kernel components (`p`, `q`, `L_d`, `L_u`, ...) are solved pointwise on a
//! grid and evaluated in between with a Fritsch-Carlson piecewise-cubic
//! Hermite interpolant. The slope limiter keeps the interpolant monotone
//! wherever the data is, which the coupling constructions rely on: an
//! interpolated transport map must stay invertible.

use crate::config::MONO_TOL;
use crate::error::{Error, Result};

/// Declared shape of a table's ordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

/// A sampled scalar function on strictly increasing abscissae.
#[derive(Clone, Debug)]
pub struct FunctionTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    tag: Monotonicity,
}

impl FunctionTable {
    /// Builds a table, validating lengths, ordering and the declared
    /// monotonicity (up to [`MONO_TOL`]).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, tag: Monotonicity) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Domain(format!(
                "table needs matching lengths >= 2, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().any(|v| !v.is_finite()) || ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("table values must be finite".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("abscissae must be strictly increasing".into()));
        }
        let scale = ys.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        let ok = match tag {
            Monotonicity::Increasing => ys.windows(2).all(|w| w[1] - w[0] >= -MONO_TOL * scale),
            Monotonicity::Decreasing => ys.windows(2).all(|w| w[0] - w[1] >= -MONO_TOL * scale),
            Monotonicity::None => true,
        };
        if !ok {
            return Err(Error::Domain(format!("ordinates violate declared {tag:?} monotonicity")));
        }
        let slopes = pchip_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes, tag })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn tag(&self) -> Monotonicity {
        self.tag
    }

    /// Covered abscissa range.
    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Range of ordinates as (min, max).
    pub fn y_range(&self) -> (f64, f64) {
        let first = self.ys[0];
        let last = *self.ys.last().unwrap();
        (first.min(last), first.max(last))
    }

    /// Interpolated value at `x`; errors outside the covered range.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.x_range();
        if x < lo || x > hi {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Interpolated value with endpoint clamping instead of an error.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range();
        self.eval_unchecked(x.clamp(lo, hi))
    }

    fn segment_of(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let i = self.segment_of(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
    }

    /// Inverse lookup on a monotone table: the `x` with `eval(x) = y`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        let increasing = match self.tag {
            Monotonicity::Increasing => true,
            Monotonicity::Decreasing => false,
            Monotonicity::None => {
                return Err(Error::Domain("inverse needs a monotone table".into()))
            }
        };
        let (ylo, yhi) = self.y_range();
        if y < ylo || y > yhi {
            return Err(Error::OutOfRange { x: y, lo: ylo, hi: yhi });
        }
        // locate the knot segment containing y
        let n = self.ys.len();
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let reached = if increasing { self.ys[mid] <= y } else { self.ys[mid] >= y };
            if reached {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (xa, xb) = (self.xs[lo], self.xs[hi]);
        if self.ys[lo] == y {
            return Ok(xa);
        }
        if self.ys[hi] == y {
            return Ok(xb);
        }
        let tol = 1e-14 * (xb - xa).abs().max(xb.abs()).max(1.0);
        crate::numerics::find_root_bracketed(|x| self.eval_unchecked(x) - y, xa, xb, tol)
    }
}

/// Fritsch-Carlson slopes: weighted harmonic means of adjacent secants,
/// zeroed at local extrema so the cubic never overshoots its data.
fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = ys
        .windows(2)
        .zip(&h)
        .map(|(w, hi)| (w[1] - w[0]) / hi)
        .collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (d0, d1) = (delta[i - 1], delta[i]);
        if d0 * d1 > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // one-sided three-point estimate, limited to preserve shape
    let slope = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if slope * d0 <= 0.0 {
        0.0
    } else if d0 * d1 < 0.0 && slope.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        slope
    }
}
