//! Probability laws on the positive half-line and their functionals.
//!
//! A [`Marginal`] is one of three representations of a law on `(0, inf)`:
//! a unit-mean log-normal, a finite list of atoms, or a tabulated density.
//! Each exposes the CDF `F`, the survival function, the quantile, the
//! cumulated expectation `G(x) = int_0^x y d mu(y)` and its inverse. The
//! survival and tail-expectation forms are first-class because the coupling
//! equations subtract distribution values deep in the tails, where `1 - F`
//! computed naively would lose every significant digit.
//!
//! The module also hosts the standing-assumption checks (convex order,
//! single-crossing dispersion) and the [`DeltaProfile`] of a marginal pair:
//! the gap `delta F = F_nu - F_mu` together with its global maximizer `m`
//! and minimizer `m_tilde`, the two points that delimit the coupling
//! regimes.

use crate::config::{MASS_TOL, MEAN_TOL, SCAN_GRID, TAIL_QUANTILE};
use crate::error::{Error, Result};
use crate::numerics::special::{
    normal_cdf, normal_pdf, normal_quantile, normal_quantile_from_sf, normal_sf,
};
use crate::numerics::{find_root_bracketed, log_grid, FunctionTable, Monotonicity};

/// A probability law on the positive half-line.
#[derive(Clone, Debug)]
pub enum Marginal {
    LogNormal(LogNormal),
    Atoms(AtomList),
    Tabulated(TabulatedDensity),
}

/// The unit-mean log-normal law with log-variance `sigma^2`
/// (location `-sigma^2 / 2`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormal {
    sigma: f64,
}

/// A purely atomic law: sorted points with positive weights.
#[derive(Clone, Debug)]
pub struct AtomList {
    points: Vec<f64>,
    weights: Vec<f64>,
    mean: f64,
}

/// A density sampled on a grid, interpolated linearly in between.
///
/// Renormalized and rescaled to unit mean at construction; the rescaling
/// `x -> x / mean` preserves the shape. CDF and cumulated expectation are
/// integrated exactly per segment (the integrands are polynomials).
#[derive(Clone, Debug)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    dens: Vec<f64>,
    cdf_knots: Vec<f64>,
    g_knots: Vec<f64>,
    mean: f64,
}

impl LogNormal {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn z(&self, x: f64) -> f64 {
        (x.ln() + 0.5 * self.sigma * self.sigma) / self.sigma
    }

    /// Argument for the cumulated expectation: shifted by one log-variance.
    fn zg(&self, x: f64) -> f64 {
        (x.ln() - 0.5 * self.sigma * self.sigma) / self.sigma
    }

    fn density(&self, x: f64) -> f64 {
        normal_pdf(self.z(x)) / (x * self.sigma)
    }
}

impl Marginal {
    /// Unit-mean log-normal with volatility `sigma > 0`.
    pub fn lognormal(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("lognormal needs sigma > 0, got {sigma}")));
        }
        Ok(Marginal::LogNormal(LogNormal { sigma }))
    }

    /// Atomic law from `(point, weight)` pairs. Weights must be positive and
    /// sum to one within [`MASS_TOL`]; duplicate points are merged.
    pub fn atoms(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::atoms_with_tol(pairs, MASS_TOL)
    }

    pub(crate) fn atoms_with_tol(mut pairs: Vec<(f64, f64)>, tol: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Domain("atom list is empty".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (p, w) in pairs {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::Domain(format!("atom at {p} outside (0, inf)")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!("weight {w} must be positive")));
            }
            if let Some(last) = points.last() {
                if *last == p {
                    *weights.last_mut().unwrap() += w;
                    continue;
                }
            }
            points.push(p);
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol {
            return Err(Error::Domain(format!("atom weights sum to {total}, not 1")));
        }
        let mean = points.iter().zip(&weights).map(|(p, w)| p * w).sum();
        Ok(Marginal::Atoms(AtomList { points, weights, mean }))
    }

    /// Tabulated density from grid points and raw density values.
    pub fn tabulated(xs: Vec<f64>, dens: Vec<f64>) -> Result<Self> {
        TabulatedDensity::build(xs, dens, true).map(Marginal::Tabulated)
    }

    /// Parses a marginal spec string: `lognormal:sigma=0.2`,
    /// `atoms:0.5=0.6667,2.0=0.3333` or `table:<path>`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::BadSpec(format!("marginal spec '{spec}' has no ':'")))?;
        match kind.trim() {
            "lognormal" => {
                let sigma = parse_kv(rest, "sigma")?;
                Marginal::lognormal(sigma).map_err(|e| Error::BadSpec(e.to_string()))
            }
            "atoms" => {
                let mut pairs = Vec::new();
                for item in rest.split(',') {
                    let (p, w) = item.split_once('=').ok_or_else(|| {
                        Error::BadSpec(format!("atom '{item}' is not point=weight"))
                    })?;
                    pairs.push((parse_num(p)?, parse_num(w)?));
                }
                Marginal::atoms(pairs).map_err(|e| Error::BadSpec(e.to_string()))
            }
            "table" => {
                let text = std::fs::read_to_string(rest.trim())
                    .map_err(|e| Error::BadSpec(format!("cannot read '{}': {e}", rest.trim())))?;
                let mut xs = Vec::new();
                let mut ds = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.split('#').next().unwrap_or("").trim();
                    if line.is_empty() {
                        continue;
                    }
                    let mut it = line.split([' ', '\t', ',']).filter(|t| !t.is_empty());
                    let x = it.next().and_then(|t| t.parse::<f64>().ok());
                    let d = it.next().and_then(|t| t.parse::<f64>().ok());
                    match (x, d) {
                        (Some(x), Some(d)) => {
                            xs.push(x);
                            ds.push(d);
                        }
                        _ => {
                            return Err(Error::BadSpec(format!(
                                "line {} of '{}' is not 'x density'",
                                lineno + 1,
                                rest.trim()
                            )))
                        }
                    }
                }
                Marginal::tabulated(xs, ds).map_err(|e| Error::BadSpec(e.to_string()))
            }
            other => Err(Error::BadSpec(format!("unknown marginal kind '{other}'"))),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::LogNormal(_) => 1.0,
            Marginal::Atoms(a) => a.mean,
            Marginal::Tabulated(t) => t.mean,
        }
    }

    /// Whether the law carries a density (needed by the dispersion check and
    /// the coupling constructions).
    pub fn has_density(&self) -> bool {
        !matches!(self, Marginal::Atoms(_))
    }

    /// Support bounds; the upper bound may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::LogNormal(_) => (0.0, f64::INFINITY),
            Marginal::Atoms(a) => (a.points[0], *a.points.last().unwrap()),
            Marginal::Tabulated(t) => (t.xs[0], *t.xs.last().unwrap()),
        }
    }

    fn check_positive(x: f64) -> Result<()> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("argument must be positive, got {x}")));
        }
        Ok(())
    }

    /// CDF `F(x) = P[X <= x]` (right-continuous).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        Self::check_positive(x)?;
        Ok(match self {
            Marginal::LogNormal(ln) => normal_cdf(ln.z(x)),
            Marginal::Atoms(a) => a.cdf(x),
            Marginal::Tabulated(t) => t.cdf(x),
        })
    }

    /// Survival function `1 - F(x)`, computed without cancellation.
    pub fn survival(&self, x: f64) -> Result<f64> {
        Self::check_positive(x)?;
        Ok(match self {
            Marginal::LogNormal(ln) => normal_sf(ln.z(x)),
            Marginal::Atoms(a) => a.tail_mass(x),
            Marginal::Tabulated(t) => (1.0 - t.cdf(x)).max(0.0),
        })
    }

    /// Density at `x`; errors for purely atomic laws.
    pub fn density(&self, x: f64) -> Result<f64> {
        Self::check_positive(x)?;
        match self {
            Marginal::LogNormal(ln) => Ok(ln.density(x)),
            Marginal::Atoms(_) => Err(Error::NoDensity),
            Marginal::Tabulated(t) => Ok(t.density(x)),
        }
    }

    /// Generalized inverse of the CDF: the smallest `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile needs p in (0,1), got {p}")));
        }
        match self {
            Marginal::LogNormal(ln) => {
                let z = normal_quantile(p)?;
                Ok((ln.sigma * z - 0.5 * ln.sigma * ln.sigma).exp())
            }
            Marginal::Atoms(a) => Ok(a.quantile(p)),
            Marginal::Tabulated(t) => t.quantile(p),
        }
    }

    /// Quantile parameterized by the survival level: `x` with
    /// `survival(x) = s`. Keeps precision when `s` is tiny.
    pub fn quantile_from_sf(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("quantile_from_sf needs s in (0,1), got {s}")));
        }
        match self {
            Marginal::LogNormal(ln) => {
                let z = normal_quantile_from_sf(s)?;
                Ok((ln.sigma * z - 0.5 * ln.sigma * ln.sigma).exp())
            }
            Marginal::Atoms(a) => Ok(a.quantile_from_sf(s)),
            Marginal::Tabulated(t) => t.quantile(1.0 - s),
        }
    }

    /// Cumulated expectation `G(x) = int_0^x y dmu(y)`; tends to the mean.
    pub fn cumulated_expectation(&self, x: f64) -> Result<f64> {
        Self::check_positive(x)?;
        Ok(match self {
            Marginal::LogNormal(ln) => normal_cdf(ln.zg(x)),
            Marginal::Atoms(a) => a.cumulated(x),
            Marginal::Tabulated(t) => t.cumulated(x),
        })
    }

    /// Tail expectation `mean - G(x) = int_x^inf y dmu(y)`, cancellation-free.
    pub fn tail_expectation(&self, x: f64) -> Result<f64> {
        Self::check_positive(x)?;
        Ok(match self {
            Marginal::LogNormal(ln) => normal_sf(ln.zg(x)),
            Marginal::Atoms(a) => a.tail_expectation(x),
            Marginal::Tabulated(t) => (t.mean - t.cumulated(x)).max(0.0),
        })
    }

    /// Inverse of the cumulated expectation: smallest `x` with `G(x) >= t`,
    /// `t` in `(0, mean)`.
    pub fn cumulated_expectation_inverse(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < self.mean()) {
            return Err(Error::Domain(format!(
                "G-inverse needs t in (0, {}), got {t}",
                self.mean()
            )));
        }
        match self {
            Marginal::LogNormal(ln) => {
                let z = normal_quantile(t)?;
                Ok((ln.sigma * z + 0.5 * ln.sigma * ln.sigma).exp())
            }
            Marginal::Atoms(a) => Ok(a.cumulated_inverse(t)),
            Marginal::Tabulated(tab) => tab.cumulated_inverse(t),
        }
    }

    /// G-inverse parameterized by the tail: `x` with `tail_expectation(x) = s`.
    pub fn cumulated_expectation_inverse_from_tail(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < self.mean()) {
            return Err(Error::Domain(format!(
                "G-inverse tail form needs s in (0, {}), got {s}",
                self.mean()
            )));
        }
        match self {
            Marginal::LogNormal(ln) => {
                let z = normal_quantile_from_sf(s)?;
                Ok((ln.sigma * z + 0.5 * ln.sigma * ln.sigma).exp())
            }
            Marginal::Atoms(a) => Ok(a.cumulated_inverse(a.mean - s)),
            Marginal::Tabulated(t) => t.cumulated_inverse(t.mean - s),
        }
    }

    /// Undiscounted call price `E[(X - k)^+] = mean - G(k) - k (1 - F(k))`.
    pub fn call_price(&self, k: f64) -> Result<f64> {
        Ok(self.tail_expectation(k)? - k * self.survival(k)?)
    }

    /// Errors unless the mean is one within [`MEAN_TOL`].
    pub fn require_unit_mean(&self) -> Result<()> {
        let m = self.mean();
        if (m - 1.0).abs() > MEAN_TOL {
            return Err(Error::MeanMismatch { mean: m, expected: 1.0 });
        }
        Ok(())
    }

    /// Atoms accessor for atomic laws.
    pub fn as_atoms(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Marginal::Atoms(a) => Some((&a.points, &a.weights)),
            _ => None,
        }
    }
}

impl AtomList {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn cdf(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= x);
        self.weights[..idx].iter().sum()
    }

    fn tail_mass(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= x);
        self.weights[idx..].iter().sum()
    }

    fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (pt, w) in self.points.iter().zip(&self.weights) {
            acc += w;
            if acc >= p - 1e-15 {
                return *pt;
            }
        }
        *self.points.last().unwrap()
    }

    fn quantile_from_sf(&self, s: f64) -> f64 {
        let mut tail = 0.0;
        for (pt, w) in self.points.iter().zip(&self.weights).rev() {
            tail += w;
            if tail > s + 1e-15 {
                return *pt;
            }
        }
        self.points[0]
    }

    fn cumulated(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .take_while(|(p, _)| **p <= x)
            .map(|(p, w)| p * w)
            .sum()
    }

    fn tail_expectation(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .skip_while(|(p, _)| **p <= x)
            .map(|(p, w)| p * w)
            .sum()
    }

    fn cumulated_inverse(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (pt, w) in self.points.iter().zip(&self.weights) {
            acc += pt * w;
            if acc >= t - 1e-15 {
                return *pt;
            }
        }
        *self.points.last().unwrap()
    }
}

impl TabulatedDensity {
    fn build(xs: Vec<f64>, dens: Vec<f64>, rescale: bool) -> Result<TabulatedDensity> {
        if xs.len() != dens.len() || xs.len() < 2 {
            return Err(Error::Domain("table needs matching lengths >= 2".into()));
        }
        if xs[0] <= 0.0 {
            return Err(Error::Domain("tabulated support must lie in (0, inf)".into()));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        if dens.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Domain("density values must be finite and >= 0".into()));
        }
        let total = trapezoid(&xs, &dens);
        if !(total > 0.0) {
            return Err(Error::Domain("density integrates to zero".into()));
        }
        let mut dens: Vec<f64> = dens.iter().map(|d| d / total).collect();
        let mut xs = xs;
        if rescale {
            let mean = first_moment(&xs, &dens);
            for x in &mut xs {
                *x /= mean;
            }
            for d in &mut dens {
                *d *= mean;
            }
        }
        let mut t = TabulatedDensity {
            cdf_knots: Vec::new(),
            g_knots: Vec::new(),
            mean: 0.0,
            xs,
            dens,
        };
        t.rebuild_integrals();
        Ok(t)
    }

    /// Construction that keeps node values exactly as given (used by the
    /// numeraire reflection, which must stay a pointwise involution).
    pub(crate) fn from_raw_nodes(xs: Vec<f64>, dens: Vec<f64>) -> Result<TabulatedDensity> {
        let n = xs.len();
        if n != dens.len() || n < 2 {
            return Err(Error::Domain("table needs matching lengths >= 2".into()));
        }
        if xs[0] <= 0.0 || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("grid must be positive and strictly increasing".into()));
        }
        let mut t = TabulatedDensity {
            cdf_knots: Vec::new(),
            g_knots: Vec::new(),
            mean: 0.0,
            xs,
            dens,
        };
        t.rebuild_integrals();
        Ok(t)
    }

    fn rebuild_integrals(&mut self) {
        let n = self.xs.len();
        let mut cdf = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        cdf.push(0.0);
        g.push(0.0);
        for i in 1..n {
            let (x0, x1) = (self.xs[i - 1], self.xs[i]);
            let (d0, d1) = (self.dens[i - 1], self.dens[i]);
            let h = x1 - x0;
            cdf.push(cdf[i - 1] + 0.5 * h * (d0 + d1));
            // int of x p(x) over the segment, p linear
            let seg = h * (d0 * (2.0 * x0 + x1) + d1 * (x0 + 2.0 * x1)) / 6.0;
            g.push(g[i - 1] + seg);
        }
        self.mean = *g.last().unwrap();
        self.cdf_knots = cdf;
        self.g_knots = g;
    }

    pub fn grid(&self) -> &[f64] {
        &self.xs
    }

    pub fn density_values(&self) -> &[f64] {
        &self.dens
    }

    fn segment_of(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.xs[0] || x > *self.xs.last().unwrap() {
            return 0.0;
        }
        let i = self.segment_of(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.dens[i] * (1.0 - t) + self.dens[i + 1] * t
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return *self.cdf_knots.last().unwrap();
        }
        let i = self.segment_of(x);
        let (x0, d0) = (self.xs[i], self.dens[i]);
        let h = self.xs[i + 1] - x0;
        let slope = (self.dens[i + 1] - d0) / h;
        let dx = x - x0;
        self.cdf_knots[i] + d0 * dx + 0.5 * slope * dx * dx
    }

    fn cumulated(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return self.mean;
        }
        let i = self.segment_of(x);
        let (x0, d0) = (self.xs[i], self.dens[i]);
        let h = self.xs[i + 1] - x0;
        let slope = (self.dens[i + 1] - d0) / h;
        // int_{x0}^{x} y (d0 + slope (y - x0)) dy
        self.g_knots[i]
            + d0 * (x * x - x0 * x0) / 2.0
            + slope * (x * x * x / 3.0 - x0 * x * x / 2.0 + x0 * x0 * x0 / 6.0)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        let top = *self.cdf_knots.last().unwrap();
        if p >= top {
            return Ok(*self.xs.last().unwrap());
        }
        let idx = self.cdf_knots.partition_point(|&c| c < p);
        let i = idx.saturating_sub(1).min(self.xs.len() - 2);
        let (xa, xb) = (self.xs[i], self.xs[i + 1]);
        if self.cdf(xa) >= p {
            return Ok(xa);
        }
        find_root_bracketed(|x| self.cdf(x) - p, xa, xb, 1e-14 * xb)
    }

    fn cumulated_inverse(&self, t: f64) -> Result<f64> {
        if t >= self.mean {
            return Ok(*self.xs.last().unwrap());
        }
        let idx = self.g_knots.partition_point(|&c| c < t);
        let i = idx.saturating_sub(1).min(self.xs.len() - 2);
        let (xa, xb) = (self.xs[i], self.xs[i + 1]);
        if self.cumulated(xa) >= t {
            return Ok(xa);
        }
        find_root_bracketed(|x| self.cumulated(x) - t, xa, xb, 1e-14 * xb)
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1]))
        .sum()
}

fn first_moment(xs: &[f64], dens: &[f64]) -> f64 {
    xs.windows(2)
        .zip(dens.windows(2))
        .map(|(xw, dw)| {
            let h = xw[1] - xw[0];
            h * (dw[0] * (2.0 * xw[0] + xw[1]) + dw[1] * (xw[0] + 2.0 * xw[1])) / 6.0
        })
        .sum()
}

fn parse_kv(rest: &str, key: &str) -> Result<f64> {
    for item in rest.split(',') {
        if let Some((k, v)) = item.split_once('=') {
            if k.trim() == key {
                return parse_num(v);
            }
        }
    }
    Err(Error::BadSpec(format!("missing '{key}=' in '{rest}'")))
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::BadSpec(format!("'{}' is not a number", s.trim())))
}

// ---------------------------------------------------------------------------
// Pair checks and the delta profile
// ---------------------------------------------------------------------------

/// Outcome of the convex-order check: call-price dominance on a strike grid.
#[derive(Clone, Debug)]
pub struct ConvexOrderReport {
    pub ok: bool,
    /// Largest amount by which a mu-call exceeds the nu-call (positive means
    /// dominance fails there).
    pub worst_violation: f64,
    /// Strike where the worst violation occurs.
    pub location: f64,
}

/// Verifies `C_mu(K) <= C_nu(K)` on a log-spaced strike grid.
pub fn check_convex_order(
    mu: &Marginal,
    nu: &Marginal,
    n_grid: usize,
) -> Result<ConvexOrderReport> {
    if (mu.mean() - nu.mean()).abs() > MEAN_TOL {
        return Err(Error::MeanMismatch { mean: nu.mean(), expected: mu.mean() });
    }
    let lo = mu.quantile(TAIL_QUANTILE)?.min(nu.quantile(TAIL_QUANTILE)?);
    let hi = mu
        .quantile_from_sf(TAIL_QUANTILE)?
        .max(nu.quantile_from_sf(TAIL_QUANTILE)?);
    let mut worst = f64::NEG_INFINITY;
    let mut at = lo;
    for k in log_grid(lo, hi, n_grid.max(2)) {
        let gap = mu.call_price(k)? - nu.call_price(k)?;
        if gap > worst {
            worst = gap;
            at = k;
        }
    }
    Ok(ConvexOrderReport { ok: worst <= MASS_TOL, worst_violation: worst.max(0.0), location: at })
}

/// Outcome of the dispersion check: the density gap `p_mu - p_nu` must be
/// positive on exactly one interval `(a, b)` and nonpositive outside.
#[derive(Clone, Debug)]
pub struct DispersionReport {
    pub ok: bool,
    /// Left end of the sign-change interval (when found).
    pub a: f64,
    /// Right end of the sign-change interval (when found).
    pub b: f64,
    /// Number of sign changes seen on the scan grid.
    pub sign_changes: usize,
}

/// Scans `p_mu - p_nu` for sign changes on a log-spaced grid between the
/// extreme quantiles of `nu`.
pub fn check_dispersion(mu: &Marginal, nu: &Marginal) -> Result<DispersionReport> {
    if !mu.has_density() || !nu.has_density() {
        return Err(Error::NoDensity);
    }
    let lo = nu.quantile(TAIL_QUANTILE)?;
    let hi = nu.quantile_from_sf(TAIL_QUANTILE)?;
    let grid = log_grid(lo, hi, SCAN_GRID);
    let mut nonzero: Vec<(f64, i8)> = Vec::with_capacity(grid.len());
    for &x in &grid {
        let d = mu.density(x)? - nu.density(x)?;
        if d > 0.0 {
            nonzero.push((x, 1));
        } else if d < 0.0 {
            nonzero.push((x, -1));
        }
    }
    let mut changes: Vec<(f64, f64, i8)> = Vec::new(); // (x_left, x_right, new sign)
    for w in nonzero.windows(2) {
        if w[0].1 != w[1].1 {
            changes.push((w[0].0, w[1].0, w[1].1));
        }
    }
    let pattern_ok = changes.len() == 2
        && !nonzero.is_empty()
        && nonzero[0].1 == -1
        && changes[0].2 == 1
        && changes[1].2 == -1;
    let (mut a, mut b) = (f64::NAN, f64::NAN);
    if pattern_ok {
        let diff = |x: f64| mu.density(x).unwrap() - nu.density(x).unwrap();
        a = find_root_bracketed(diff, changes[0].0, changes[0].1, 1e-10 * changes[0].1)?;
        b = find_root_bracketed(diff, changes[1].0, changes[1].1, 1e-10 * changes[1].1)?;
    }
    Ok(DispersionReport { ok: pattern_ok, a, b, sign_changes: changes.len() })
}

/// The distribution-function gap of a marginal pair with its extremizers.
///
/// `m` maximizes `delta F = F_nu - F_mu` and `m_tilde > m` minimizes it;
/// between them the mu-density dominates, and the explicit couplings act
/// only there.
#[derive(Clone, Debug)]
pub struct DeltaProfile {
    mu: Marginal,
    nu: Marginal,
    /// Global maximizer of `delta F`.
    pub m: f64,
    /// Global minimizer of `delta F`.
    pub m_tilde: f64,
    /// `delta F` value at `m` (positive).
    pub df_max: f64,
    /// `delta F` value at `m_tilde` (negative).
    pub df_min: f64,
    /// Width of the refinement bracket around `m` (reported plateau size).
    pub plateau_width: f64,
    /// Dispersion interval endpoints from the density scan.
    pub dispersion_a: f64,
    pub dispersion_b: f64,
    delta_f_table: FunctionTable,
    delta_g_table: FunctionTable,
}

impl DeltaProfile {
    /// Runs the standing-assumption checks and locates the extremizers.
    pub fn new(mu: &Marginal, nu: &Marginal) -> Result<Self> {
        mu.require_unit_mean()?;
        nu.require_unit_mean()?;
        let convex = check_convex_order(mu, nu, 1000)?;
        if !convex.ok {
            return Err(Error::AssumptionViolated(format!(
                "convex order fails: call-price violation {:.3e} at strike {:.6}",
                convex.worst_violation, convex.location
            )));
        }
        let dispersion = check_dispersion(mu, nu)?;
        if !dispersion.ok {
            return Err(Error::AssumptionViolated(format!(
                "dispersion fails: {} density sign changes (need 2, pattern -,+,-)",
                dispersion.sign_changes
            )));
        }

        let lo = nu.quantile(TAIL_QUANTILE)?;
        let hi = nu.quantile_from_sf(TAIL_QUANTILE)?;
        let grid = log_grid(lo, hi, SCAN_GRID);
        let df = |x: f64| delta_f(mu, nu, x);
        let dg = |x: f64| delta_g(mu, nu, x);
        let values: Vec<f64> = grid.iter().map(|&x| df(x)).collect();

        let imax = argmax(&values);
        let imin = argmin(&values);
        if values[imax] < MASS_TOL || values[imin] > -MASS_TOL {
            return Err(Error::AssumptionViolated(
                "delta F is numerically flat: marginals too close".into(),
            ));
        }
        let (m, width) = golden_max(
            &df,
            grid[imax.saturating_sub(1)],
            grid[(imax + 1).min(grid.len() - 1)],
        );
        let neg_df = |x: f64| -df(x);
        let (m_tilde, _) = golden_max(
            &neg_df,
            grid[imin.saturating_sub(1)],
            grid[(imin + 1).min(grid.len() - 1)],
        );
        if m >= m_tilde {
            return Err(Error::AssumptionViolated(format!(
                "maximizer {m} not below minimizer {m_tilde}"
            )));
        }

        let dg_values: Vec<f64> = grid.iter().map(|&x| dg(x)).collect();
        Ok(DeltaProfile {
            mu: mu.clone(),
            nu: nu.clone(),
            m,
            m_tilde,
            df_max: df(m),
            df_min: df(m_tilde),
            plateau_width: width,
            dispersion_a: dispersion.a,
            dispersion_b: dispersion.b,
            delta_f_table: FunctionTable::new(grid.clone(), values, Monotonicity::None)?,
            delta_g_table: FunctionTable::new(grid, dg_values, Monotonicity::None)?,
        })
    }

    pub fn mu(&self) -> &Marginal {
        &self.mu
    }

    pub fn nu(&self) -> &Marginal {
        &self.nu
    }

    /// `F_nu(x) - F_mu(x)` evaluated directly from the marginals.
    pub fn delta_f(&self, x: f64) -> f64 {
        delta_f(&self.mu, &self.nu, x)
    }

    /// `G_nu(x) - G_mu(x)` evaluated directly from the marginals.
    pub fn delta_g(&self, x: f64) -> f64 {
        delta_g(&self.mu, &self.nu, x)
    }

    /// Sampled `delta F` table (scan grid), for export and plotting.
    pub fn delta_f_table(&self) -> &FunctionTable {
        &self.delta_f_table
    }

    /// Sampled `delta G` table (scan grid).
    pub fn delta_g_table(&self) -> &FunctionTable {
        &self.delta_g_table
    }
}

/// `F_nu - F_mu` with the subtraction routed through whichever side of the
/// distribution keeps the digits.
pub(crate) fn delta_f(mu: &Marginal, nu: &Marginal, x: f64) -> f64 {
    let fnu = nu.cdf(x).expect("positive x");
    if fnu <= 0.5 {
        fnu - mu.cdf(x).expect("positive x")
    } else {
        mu.survival(x).expect("positive x") - nu.survival(x).expect("positive x")
    }
}

/// `G_nu - G_mu`, routed like [`delta_f`].
pub(crate) fn delta_g(mu: &Marginal, nu: &Marginal, x: f64) -> f64 {
    let gn = nu.cumulated_expectation(x).expect("positive x");
    if gn <= 0.5 * nu.mean() {
        gn - mu.cumulated_expectation(x).expect("positive x")
    } else {
        mu.tail_expectation(x).expect("positive x") - nu.tail_expectation(x).expect("positive x")
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Golden-section refinement of a maximum bracketed by `[lo, hi]`.
/// Returns the midpoint of the final bracket and its width.
fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..120 {
        if b - a < 1e-11 * b.abs().max(1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    (0.5 * (a + b), b - a)
}

/// Closed-form extremizers of `delta F` for a unit-mean log-normal pair with
/// `0 < sigma_mu < sigma_nu`; returns `(m, m_tilde)` with `m_tilde = 1/m`.
pub fn lognormal_extremizers(sigma_mu: f64, sigma_nu: f64) -> Result<(f64, f64)> {
    if !(sigma_mu > 0.0 && sigma_nu > sigma_mu) {
        return Err(Error::Domain(format!(
            "need 0 < sigma_mu < sigma_nu, got {sigma_mu}, {sigma_nu}"
        )));
    }
    let (s2m, s2n) = (sigma_mu * sigma_mu, sigma_nu * sigma_nu);
    let log_sq = 2.0 * s2m * s2n / (s2n - s2m) * (sigma_nu / sigma_mu).ln() + s2m * s2n / 4.0;
    let m = (-log_sq.sqrt()).exp();
    Ok((m, 1.0 / m))
}
