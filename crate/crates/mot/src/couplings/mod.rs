//! Explicit optimal transference plans as validated kernel objects.
//!
//! Three constructions are provided, each returning a kernel that maps every
//! point `x` of the first marginal to at most three atoms whose weighted mean
//! is `x` (the martingale identity holds by construction, to machine
//! precision, because the weights are recomputed from the interpolated atom
//! positions at evaluation time):
//!
//! * [`build_hk`]: the three-band plan, identity outside `(a, b)`, interior
//!   mass split onto `{p(x), x, q(x)}` with `p`, `q` decreasing;
//! * [`build_left_monotone`]: identity below `x_star`, two-point split
//!   `{L_d(x), L_u(x)}` above, `L_d` decreasing and `L_u` increasing;
//! * [`build_right_monotone`]: the mirror image, obtainable either by
//!   reflecting a left-monotone plan of the reciprocal pair or by solving
//!   the mirrored equations directly; the two routes must agree.

mod ctx;
mod hk;
mod monotone;

pub use hk::build_hk;
pub use monotone::{build_left_monotone, build_right_monotone, cross_check_right_monotone};

pub(crate) use hk::build_hk_on_grid;

use crate::config::{QUAD_TOL, TAIL_QUANTILE};
use crate::error::{Error, Result};
use crate::measures::Marginal;
use crate::numerics::{integrate_with_breakpoints, FunctionTable, Monotonicity};

/// Direction of a two-band monotone plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonotoneDirection {
    Left,
    Right,
}

/// Construction method for the right-monotone plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RightMethod {
    /// Build the left plan of the reciprocal pair and reflect it.
    Reflection,
    /// Solve the mirrored equations directly on this pair.
    Direct,
}

/// Three-band kernel: identity outside `(a, b)`, interior mass split onto
/// `{p(x), x, q(x)}`.
#[derive(Clone, Debug)]
pub struct ThreeBandKernel {
    pub(crate) mu: Marginal,
    pub(crate) nu: Marginal,
    /// Maximizer of `delta F` (left band edge).
    pub a: f64,
    /// Minimizer of `delta F` (right band edge).
    pub b: f64,
    pub(crate) p: FunctionTable,
    pub(crate) q: FunctionTable,
    pub(crate) l: FunctionTable,
    pub(crate) u: FunctionTable,
    /// Grid points where a bracket had to be clamped to its endpoint.
    pub flagged: Vec<f64>,
}

/// Two-band kernel: identity on one side of `x_star`, two-point split on the
/// other.
#[derive(Clone, Debug)]
pub struct TwoBandKernel {
    pub(crate) mu: Marginal,
    pub(crate) nu: Marginal,
    pub direction: MonotoneDirection,
    /// Boundary of the identity region (extremizer of `delta F`).
    pub x_star: f64,
    pub(crate) t_d: FunctionTable,
    pub(crate) t_u: FunctionTable,
    pub(crate) prob: FunctionTable,
    /// Truncation bound of the split-region grid (extreme `mu`-quantile).
    pub(crate) x_bound: f64,
    pub flagged: Vec<f64>,
}

/// Finite coupling matrix over atomic marginals.
#[derive(Clone, Debug)]
pub struct DiscreteKernel {
    pub(crate) x_atoms: Vec<f64>,
    pub(crate) x_weights: Vec<f64>,
    pub(crate) y_atoms: Vec<f64>,
    /// Row-major conditional transition probabilities, rows summing to one.
    pub(crate) rows: Vec<f64>,
}

/// Any coupling this crate can price and validate.
#[derive(Clone, Debug)]
pub enum CouplingKernel {
    /// `Y = X` almost surely over the given base marginal.
    Identity(Marginal),
    ThreeBand(ThreeBandKernel),
    TwoBand(TwoBandKernel),
    Discrete(DiscreteKernel),
}

impl From<ThreeBandKernel> for CouplingKernel {
    fn from(k: ThreeBandKernel) -> Self {
        CouplingKernel::ThreeBand(k)
    }
}

impl From<TwoBandKernel> for CouplingKernel {
    fn from(k: TwoBandKernel) -> Self {
        CouplingKernel::TwoBand(k)
    }
}

impl From<DiscreteKernel> for CouplingKernel {
    fn from(k: DiscreteKernel) -> Self {
        CouplingKernel::Discrete(k)
    }
}

impl ThreeBandKernel {
    pub fn mu(&self) -> &Marginal {
        &self.mu
    }

    pub fn nu(&self) -> &Marginal {
        &self.nu
    }

    /// Interior grid with the solved `(p, q, l, u)` columns.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64, f64)> + '_ {
        self.p.xs().iter().enumerate().map(move |(i, &x)| {
            (x, self.p.ys()[i], self.q.ys()[i], self.l.ys()[i], self.u.ys()[i])
        })
    }

    /// Atoms of the kernel at `x`: `[(y, weight)]` in increasing `y`.
    pub fn kernel_at(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        if !(x > 0.0) {
            return Err(Error::OutOfRange { x, lo: 0.0, hi: f64::INFINITY });
        }
        if x <= self.a || x >= self.b {
            return Ok(vec![(x, 1.0)]);
        }
        let p = self.p.eval_clamped(x);
        let q = self.q.eval_clamped(x);
        let w = moved_fraction(&self.mu, &self.nu, x)?;
        let span = q - p;
        if !(span > 0.0) {
            return Err(Error::NumericsFailure(format!("degenerate band at x={x}")));
        }
        let u_w = (x - p) / span * w;
        let l_w = (q - x) / span * w;
        let stay = (1.0 - w).max(0.0);
        Ok(compact_atoms(vec![(p, l_w), (x, stay), (q, u_w)]))
    }

    /// Reflection through the change of numeraire: the kernel of the
    /// reciprocal pair, with `p` and `q` exchanged through `y -> 1/y`.
    pub fn reflect(&self) -> Result<ThreeBandKernel> {
        let s_mu = crate::numeraire::symmetrize_marginal(&self.mu)?;
        let s_nu = crate::numeraire::symmetrize_marginal(&self.nu)?;
        let n = self.p.len();
        let mut xs = Vec::with_capacity(n);
        let mut p_new = Vec::with_capacity(n);
        let mut q_new = Vec::with_capacity(n);
        let mut l_new = Vec::with_capacity(n);
        let mut u_new = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let x = self.p.xs()[i];
            let (p, q) = (self.p.ys()[i], self.q.ys()[i]);
            let (l, u) = (self.l.ys()[i], self.u.ys()[i]);
            xs.push(1.0 / x);
            p_new.push(1.0 / q);
            q_new.push(1.0 / p);
            // weights transform by w * y / x under the coupling reflection
            l_new.push(u * q / x);
            u_new.push(l * p / x);
        }
        Ok(ThreeBandKernel {
            mu: s_mu,
            nu: s_nu,
            a: 1.0 / self.b,
            b: 1.0 / self.a,
            p: FunctionTable::new(xs.clone(), p_new, Monotonicity::Decreasing)?,
            q: FunctionTable::new(xs.clone(), q_new, Monotonicity::Decreasing)?,
            l: FunctionTable::new(xs.clone(), l_new, Monotonicity::None)?,
            u: FunctionTable::new(xs, u_new, Monotonicity::None)?,
            flagged: self.flagged.iter().rev().map(|x| 1.0 / x).collect(),
        })
    }

}

impl TwoBandKernel {
    pub fn mu(&self) -> &Marginal {
        &self.mu
    }

    pub fn nu(&self) -> &Marginal {
        &self.nu
    }

    /// Split-region grid with `(T_d, T_u, q)` columns.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.t_d.xs().iter().enumerate().map(move |(i, &x)| {
            (x, self.t_d.ys()[i], self.t_u.ys()[i], self.prob.ys()[i])
        })
    }

    /// Truncation bound of the split-region grid.
    pub fn x_bound(&self) -> f64 {
        self.x_bound
    }

    fn in_identity_region(&self, x: f64) -> bool {
        match self.direction {
            MonotoneDirection::Left => x <= self.x_star,
            MonotoneDirection::Right => x >= self.x_star,
        }
    }

    /// Atoms of the kernel at `x`.
    pub fn kernel_at(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = match self.direction {
            MonotoneDirection::Left => (0.0, self.x_bound),
            MonotoneDirection::Right => (self.x_bound, f64::INFINITY),
        };
        if !(x > lo && x <= hi || x > 0.0 && self.in_identity_region(x)) {
            return Err(Error::OutOfRange { x, lo, hi });
        }
        if self.in_identity_region(x) {
            return Ok(vec![(x, 1.0)]);
        }
        let d = self.t_d.eval_clamped(x);
        let u = self.t_u.eval_clamped(x);
        if !(d < x && x < u) {
            // interpolation pinched at the split opening: treat as identity
            return Ok(vec![(x, 1.0)]);
        }
        let q = ((x - d) / (u - d)).clamp(0.0, 1.0);
        Ok(compact_atoms(vec![(d, 1.0 - q), (u, q)]))
    }

    /// Reflection through the change of numeraire: exchanges left- and
    /// right-monotone plans.
    pub fn reflect(&self) -> Result<TwoBandKernel> {
        let s_mu = crate::numeraire::symmetrize_marginal(&self.mu)?;
        let s_nu = crate::numeraire::symmetrize_marginal(&self.nu)?;
        let n = self.t_d.len();
        let mut xs = Vec::with_capacity(n);
        let mut d_new = Vec::with_capacity(n);
        let mut u_new = Vec::with_capacity(n);
        let mut q_new = Vec::with_capacity(n);
        for i in (0..n).rev() {
            let x = self.t_d.xs()[i];
            let (d, u, q) = (self.t_d.ys()[i], self.t_u.ys()[i], self.prob.ys()[i]);
            let x_new = 1.0 / x;
            xs.push(x_new);
            d_new.push(1.0 / u);
            u_new.push(1.0 / d);
            // transition probability of the reflected kernel
            q_new.push((x_new / (1.0 / d)) * (1.0 - q));
        }
        let (dir, d_tag, u_tag) = match self.direction {
            MonotoneDirection::Left => {
                (MonotoneDirection::Right, Monotonicity::Increasing, Monotonicity::Decreasing)
            }
            MonotoneDirection::Right => {
                (MonotoneDirection::Left, Monotonicity::Decreasing, Monotonicity::Increasing)
            }
        };
        Ok(TwoBandKernel {
            mu: s_mu,
            nu: s_nu,
            direction: dir,
            x_star: 1.0 / self.x_star,
            t_d: FunctionTable::new(xs.clone(), d_new, d_tag)?,
            t_u: FunctionTable::new(xs.clone(), u_new, u_tag)?,
            prob: FunctionTable::new(xs, q_new, Monotonicity::None)?,
            x_bound: 1.0 / self.x_bound,
            flagged: self.flagged.iter().rev().map(|x| 1.0 / x).collect(),
        })
    }

}

impl DiscreteKernel {
    /// Builds from a joint coupling matrix (row-major `n x m` masses).
    pub fn from_joint(
        x_atoms: Vec<f64>,
        x_weights: Vec<f64>,
        y_atoms: Vec<f64>,
        joint: &[f64],
    ) -> Result<Self> {
        let (n, m) = (x_atoms.len(), y_atoms.len());
        if joint.len() != n * m || x_weights.len() != n {
            return Err(Error::Domain("joint matrix dimensions mismatch".into()));
        }
        let mut rows = vec![0.0; n * m];
        for i in 0..n {
            let w = x_weights[i];
            if w <= 0.0 {
                return Err(Error::Domain(format!("zero row weight at atom {i}")));
            }
            for j in 0..m {
                rows[i * m + j] = (joint[i * m + j] / w).max(0.0);
            }
        }
        Ok(DiscreteKernel { x_atoms, x_weights, y_atoms, rows })
    }

    pub fn x_atoms(&self) -> &[f64] {
        &self.x_atoms
    }

    pub fn x_weights(&self) -> &[f64] {
        &self.x_weights
    }

    pub fn y_atoms(&self) -> &[f64] {
        &self.y_atoms
    }

    /// Conditional row at the atom nearest to `x` (must match within 1e-9
    /// relative).
    pub fn kernel_at(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        let m = self.y_atoms.len();
        let i = self
            .x_atoms
            .iter()
            .position(|&a| (a - x).abs() <= 1e-9 * a.abs().max(1.0))
            .ok_or(Error::OutOfRange { x, lo: self.x_atoms[0], hi: *self.x_atoms.last().unwrap() })?;
        Ok(self
            .y_atoms
            .iter()
            .zip(&self.rows[i * m..(i + 1) * m])
            .filter(|(_, &w)| w > 0.0)
            .map(|(&y, &w)| (y, w))
            .collect())
    }

    fn second_marginal_cdf(&self, y: f64) -> f64 {
        let m = self.y_atoms.len();
        let mut acc = 0.0;
        for (i, &w) in self.x_weights.iter().enumerate() {
            for (j, &yj) in self.y_atoms.iter().enumerate() {
                if yj <= y {
                    acc += w * self.rows[i * m + j];
                }
            }
        }
        acc
    }
}

impl CouplingKernel {
    /// Base (first) marginal of the kernel.
    pub fn base(&self) -> Marginal {
        match self {
            CouplingKernel::Identity(m) => m.clone(),
            CouplingKernel::ThreeBand(k) => k.mu.clone(),
            CouplingKernel::TwoBand(k) => k.mu.clone(),
            CouplingKernel::Discrete(k) => {
                let pairs = k.x_atoms.iter().zip(&k.x_weights).map(|(&a, &w)| (a, w)).collect();
                Marginal::atoms_with_tol(pairs, 1e-6).expect("discrete kernel base")
            }
        }
    }

    /// Atoms `[(y, weight)]` of the kernel at `x`; weights are nonnegative,
    /// sum to one and average to `x`.
    pub fn kernel_at(&self, x: f64) -> Result<Vec<(f64, f64)>> {
        match self {
            CouplingKernel::Identity(_) => {
                if x > 0.0 {
                    Ok(vec![(x, 1.0)])
                } else {
                    Err(Error::OutOfRange { x, lo: 0.0, hi: f64::INFINITY })
                }
            }
            CouplingKernel::ThreeBand(k) => k.kernel_at(x),
            CouplingKernel::TwoBand(k) => k.kernel_at(x),
            CouplingKernel::Discrete(k) => k.kernel_at(x),
        }
    }

    /// Points where the pricing integrand switches regime.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            CouplingKernel::Identity(_) => vec![],
            CouplingKernel::ThreeBand(k) => vec![k.a, k.b],
            CouplingKernel::TwoBand(k) => vec![k.x_star],
            CouplingKernel::Discrete(_) => vec![],
        }
    }
}

/// Marginal and martingale defects of a kernel against its target pair.
#[derive(Clone, Copy, Debug)]
pub struct CouplingReport {
    /// Sup over a grid of |CDF of the kernel's second marginal - F_nu|.
    pub marginal_err: f64,
    /// Max over grid points of |sum w_i y_i - x|.
    pub martingale_err: f64,
}

/// Measures how well `k` couples `mu` to `nu`.
pub fn validate_coupling(k: &CouplingKernel, mu: &Marginal, nu: &Marginal) -> Result<CouplingReport> {
    let martingale_err = martingale_defect(k)?;
    let marginal_err = marginal_defect(k, mu, nu)?;
    Ok(CouplingReport { marginal_err, martingale_err })
}

fn martingale_defect(k: &CouplingKernel) -> Result<f64> {
    let probes: Vec<f64> = match k {
        CouplingKernel::Identity(_) => return Ok(0.0),
        CouplingKernel::ThreeBand(kk) => grid_and_midpoints(kk.p.xs()),
        CouplingKernel::TwoBand(kk) => grid_and_midpoints(kk.t_d.xs()),
        CouplingKernel::Discrete(kk) => kk.x_atoms.clone(),
    };
    let mut worst = 0.0_f64;
    for x in probes {
        let atoms = k.kernel_at(x)?;
        let mean: f64 = atoms.iter().map(|(y, w)| y * w).sum();
        let mass: f64 = atoms.iter().map(|(_, w)| w).sum();
        worst = worst.max((mean - x * mass).abs()).max((mass - 1.0).abs() * x.abs().max(1.0));
    }
    Ok(worst)
}

fn grid_and_midpoints(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * xs.len());
    for w in xs.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*xs.last().unwrap());
    out
}

/// Sup-distance between the kernel's second marginal CDF and `F_nu` over a
/// log-spaced probe grid.
fn marginal_defect(k: &CouplingKernel, mu: &Marginal, nu: &Marginal) -> Result<f64> {
    let lo = nu.quantile(TAIL_QUANTILE)?;
    let hi = nu.quantile_from_sf(TAIL_QUANTILE)?;
    let probes = crate::numerics::log_grid(lo * 1.0000001, hi * 0.9999999, 201);
    let mut worst = 0.0_f64;
    for y in probes {
        let implied = second_marginal_cdf(k, mu, y)?;
        let target = nu.cdf(y)?;
        worst = worst.max((implied - target).abs());
    }
    Ok(worst)
}

/// CDF at `y` of the second marginal induced by the kernel over `mu`,
/// assembled branch by branch from the monotone structure.
pub(crate) fn second_marginal_cdf(k: &CouplingKernel, mu: &Marginal, y: f64) -> Result<f64> {
    match k {
        CouplingKernel::Identity(_) => mu.cdf(y),
        CouplingKernel::Discrete(kk) => Ok(kk.second_marginal_cdf(y)),
        CouplingKernel::ThreeBand(kk) => three_band_cdf(kk, mu, y),
        CouplingKernel::TwoBand(kk) => two_band_cdf(kk, mu, y),
    }
}

fn three_band_cdf(k: &ThreeBandKernel, mu: &Marginal, y: f64) -> Result<f64> {
    let (a, b) = (k.a, k.b);
    let nu = &k.nu;
    let mut acc = mu.cdf(y.min(a))?;
    if y > a {
        // the stay branch carries exactly the nu-density inside the band
        acc += nu.cdf(y.min(b))? - nu.cdf(a)?;
    }
    if y >= b {
        acc += mu.cdf(y)? - mu.cdf(b)?;
    }
    // branch integrals run over the whole band; the kernel clamps its maps
    // between the band edge and the first grid point, and the moved mass
    // vanishes there
    let (gx_lo, gx_hi) = (a, b);
    // p-branch: decreasing map into (0, a)
    acc += branch_mass(
        &k.p,
        y,
        false,
        gx_lo,
        gx_hi,
        &|x| {
            let w = moved_fraction(&k.mu, &k.nu, x)?;
            let p = k.p.eval_clamped(x);
            let q = k.q.eval_clamped(x);
            Ok((q - x) / (q - p) * w * k.mu.density(x)?)
        },
    )?;
    // q-branch: decreasing map into (b, inf)
    acc += branch_mass(
        &k.q,
        y,
        false,
        gx_lo,
        gx_hi,
        &|x| {
            let w = moved_fraction(&k.mu, &k.nu, x)?;
            let p = k.p.eval_clamped(x);
            let q = k.q.eval_clamped(x);
            Ok((x - p) / (q - p) * w * k.mu.density(x)?)
        },
    )?;
    Ok(acc)
}

fn two_band_cdf(k: &TwoBandKernel, mu: &Marginal, y: f64) -> Result<f64> {
    // full split region, not just the stored grid: the kernel clamps its
    // maps over the half-step whiskers at both ends
    let (gx_lo, gx_hi) = match k.direction {
        MonotoneDirection::Left => (k.x_star, k.x_bound),
        MonotoneDirection::Right => (k.x_bound, k.x_star),
    };
    let weight_down = |x: f64| -> Result<f64> {
        let d = k.t_d.eval_clamped(x);
        let u = k.t_u.eval_clamped(x);
        let q = if u > d { ((x - d) / (u - d)).clamp(0.0, 1.0) } else { 0.0 };
        Ok((1.0 - q) * k.mu.density(x)?)
    };
    let weight_up = |x: f64| -> Result<f64> {
        let d = k.t_d.eval_clamped(x);
        let u = k.t_u.eval_clamped(x);
        let q = if u > d { ((x - d) / (u - d)).clamp(0.0, 1.0) } else { 0.0 };
        Ok(q * k.mu.density(x)?)
    };
    match k.direction {
        MonotoneDirection::Left => {
            let mut acc = mu.cdf(y.min(k.x_star))?;
            // T_d decreases, T_u increases on (x_star, bound]
            acc += branch_mass(&k.t_d, y, false, gx_lo, gx_hi, &weight_down)?;
            acc += branch_mass(&k.t_u, y, true, gx_lo, gx_hi, &weight_up)?;
            Ok(acc)
        }
        MonotoneDirection::Right => {
            let mut acc = if y >= k.x_star { mu.cdf(y)? - mu.cdf(k.x_star)? } else { 0.0 };
            // T_d increases, T_u decreases on [bound, x_star)
            acc += branch_mass(&k.t_d, y, true, gx_lo, gx_hi, &weight_down)?;
            acc += branch_mass(&k.t_u, y, false, gx_lo, gx_hi, &weight_up)?;
            Ok(acc)
        }
    }
}

/// Mass sent below `y` by one monotone branch: integrates the branch weight
/// over `{x : branch(x) <= y}`, an interval determined by inverting the
/// branch table.
fn branch_mass(
    table: &FunctionTable,
    y: f64,
    increasing: bool,
    gx_lo: f64,
    gx_hi: f64,
    weight_density: &dyn Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let (y_min, y_max) = table.y_range();
    let (int_lo, int_hi) = if increasing {
        // branch(x) <= y on [gx_lo, inv(y)]
        if y < y_min {
            return Ok(0.0);
        }
        if y >= y_max {
            (gx_lo, gx_hi)
        } else {
            (gx_lo, table.inverse(y)?)
        }
    } else {
        // branch(x) <= y on [inv(y), gx_hi]
        if y < y_min {
            return Ok(0.0);
        }
        if y >= y_max {
            (gx_lo, gx_hi)
        } else {
            (table.inverse(y)?, gx_hi)
        }
    };
    if int_hi <= int_lo {
        return Ok(0.0);
    }
    let est = integrate_with_breakpoints(
        |x| weight_density(x).unwrap_or(0.0),
        int_lo,
        int_hi,
        QUAD_TOL.max(1e-9),
        &[],
    )?;
    Ok(est.value)
}

pub(crate) fn moved_fraction(mu: &Marginal, nu: &Marginal, x: f64) -> Result<f64> {
    let pm = mu.density(x)?;
    let pn = nu.density(x)?;
    if pm <= 0.0 {
        return Ok(0.0);
    }
    Ok(((pm - pn) / pm).clamp(0.0, 1.0))
}

/// Drops nonpositive-weight atoms and merges duplicates, preserving order.
fn compact_atoms(atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (y, w) in atoms {
        if w <= 0.0 {
            continue;
        }
        if let Some(last) = out.last_mut() {
            if last.0 == y {
                last.1 += w;
                continue;
            }
        }
        out.push((y, w));
    }
    out
}
