//! Construction of the three-band plan.
//!
//! For each grid point `x` in the band `(a, b)` the pair `(p(x), q(x))`
//! solves
//!
//! ```text
//! dF(q) + dF(p) = dF(x)
//! dG(q) + dG(p) = dG(x)
//! ```
//!
//! with `p` in `(0, a]` and `q` in `[b, inf)`. The first equation is
//! inverted for `q` given a trial `p` (the tail restriction of `dF` is
//! increasing), and the second equation's residual is driven to zero in `p`
//! by the bracketed root-finder. The residual is monotone decreasing in `p`:
//! its derivative is `(p - q) dF'(p) <= 0`, so the sign test at the bracket
//! ends decides everything. Trial points where the bracket collapses (the
//! band whiskers, where the moved mass vanishes) are clamped to the endpoint
//! and flagged rather than extrapolated.

use crate::config::ROOT_TOL;
use crate::error::{Error, Result};
use crate::measures::{DeltaProfile, Marginal};
use crate::numerics::{find_root_bracketed, log_grid_inside, FunctionTable, Monotonicity};

use super::ctx::PairCtx;
use super::ThreeBandKernel;

/// Builds the three-band kernel on `n_grid` log-spaced interior points.
pub fn build_hk(mu: &Marginal, nu: &Marginal, n_grid: usize) -> Result<ThreeBandKernel> {
    let prof = DeltaProfile::new(mu, nu)?;
    let grid = log_grid_inside(prof.m, prof.m_tilde, n_grid.max(8));
    build_hk_on_grid(&prof, &grid)
}

/// Builds the kernel on an explicit interior grid (used by the reflection
/// cross-checks, which need reciprocal-aligned grids).
pub(crate) fn build_hk_on_grid(prof: &DeltaProfile, grid: &[f64]) -> Result<ThreeBandKernel> {
    let ctx = PairCtx::new(prof)?;
    let (a, b) = (prof.m, prof.m_tilde);
    let mut p_vals = Vec::with_capacity(grid.len());
    let mut q_vals = Vec::with_capacity(grid.len());
    let mut l_vals = Vec::with_capacity(grid.len());
    let mut u_vals = Vec::with_capacity(grid.len());
    let mut flagged = Vec::new();

    for &x in grid {
        if !(x > a && x < b) {
            return Err(Error::Domain(format!("grid point {x} outside band ({a}, {b})")));
        }
        let (p, q, clamped) = solve_point(&ctx, x)
            .map_err(|e| Error::NumericsFailure(format!("three-band solve at x={x}: {e}")))?;
        if clamped {
            flagged.push(x);
        }
        let w = ctx.moved_fraction(x)?;
        let span = q - p;
        if !(span > 0.0) {
            return Err(Error::NumericsFailure(format!("band degenerate at x={x}")));
        }
        p_vals.push(p);
        q_vals.push(q);
        l_vals.push((q - x) / span * w);
        u_vals.push((x - p) / span * w);
    }

    let kernel = ThreeBandKernel {
        mu: prof.mu().clone(),
        nu: prof.nu().clone(),
        a,
        b,
        p: FunctionTable::new(grid.to_vec(), p_vals, Monotonicity::Decreasing)
            .map_err(|e| Error::NumericsFailure(format!("p not decreasing: {e}")))?,
        q: FunctionTable::new(grid.to_vec(), q_vals, Monotonicity::Decreasing)
            .map_err(|e| Error::NumericsFailure(format!("q not decreasing: {e}")))?,
        l: FunctionTable::new(grid.to_vec(), l_vals, Monotonicity::None)?,
        u: FunctionTable::new(grid.to_vec(), u_vals, Monotonicity::None)?,
        flagged,
    };
    Ok(kernel)
}

/// Solves the two gap equations at one interior point. Returns `(p, q,
/// clamped)`.
///
/// The outer root runs in whichever map is well-conditioned: left of the
/// gap's zero crossing the upper map explodes and must be the outer
/// variable (recovering `p` by a stable inversion); right of it the roles
/// swap. Solving the fragile map as an inner inversion would amplify the
/// outer root's noise floor by the reciprocal of a vanishing tail density.
fn solve_point(ctx: &PairCtx, x: f64) -> Result<(f64, f64, bool)> {
    if ctx.df(x) > 0.0 {
        solve_point_outer_q(ctx, x)
    } else {
        solve_point_outer_p(ctx, x)
    }
}

/// Outer root in `p` (right half of the band, where `q` stays near `b`).
fn solve_point_outer_p(ctx: &PairCtx, x: f64) -> Result<(f64, f64, bool)> {
    let df_x = ctx.df(x);
    let dg_x = ctx.dg(x);
    let m = ctx.prof.m;

    // p must satisfy dF(p) > dF(x) (so the q-equation has a negative target)
    // and dF(p) <= dF(x) - dF_min (so the target stays above the tail's
    // minimum).
    let lo_cap = ctx.eps_floor;
    let (p_lo, _) = if df_x > 0.0 {
        ctx.inv_df_low(df_x, lo_cap)?
    } else {
        (ctx.eps_q.min(m * 0.5), false)
    };
    let t_hi = df_x - ctx.prof.df_min;
    let (p_hi, _) = if t_hi >= ctx.prof.df_max {
        (m, true)
    } else {
        ctx.inv_df_low(t_hi, lo_cap)?
    };

    let q_for = |p: f64| -> Result<f64> {
        // near the left band edge both dF(x) and dF(p) sit at the maximum
        // and their difference cancels to noise; integrating the density
        // gap over [p, x] recovers the digits
        let mut target = df_x - ctx.df(p);
        if target.abs() < 1e-6 {
            let mu = ctx.mu;
            let nu = ctx.nu;
            let (v, _) = crate::numerics::gk15_panel(
                |s| nu.density(s).unwrap_or(0.0) - mu.density(s).unwrap_or(0.0),
                p,
                x,
            );
            target = v;
        }
        Ok(ctx.inv_df_tail(target.min(-1e-300))?.0)
    };
    let residual = |p: f64| -> Result<f64> {
        let q = q_for(p)?;
        // same cancellation guard for the second equation: dG(p) - dG(x)
        // integrates the first-moment density gap over [p, x]
        let head = ctx.dg(p) - dg_x;
        if head.abs() < 1e-6 {
            let mu = ctx.mu;
            let nu = ctx.nu;
            let (v, _) = crate::numerics::gk15_panel(
                |s| s * (nu.density(s).unwrap_or(0.0) - mu.density(s).unwrap_or(0.0)),
                p,
                x,
            );
            return Ok(ctx.dg(q) - v);
        }
        Ok(ctx.dg(q) + head)
    };

    if !(p_lo < p_hi) {
        // collapsed bracket: whisker point, keep the boundary solution
        let p = p_hi.min(p_lo);
        return Ok((p, q_for(p)?, true));
    }
    let mut p_lo = p_lo;
    let mut r_lo = residual(p_lo)?;
    if r_lo <= 0.0 && p_lo > ctx.eps_floor * (1.0 + 1e-9) {
        // the root lies below the default cap; extend the bracket down to
        // the hard floor before giving up
        let r_floor = residual(ctx.eps_floor)?;
        if r_floor > 0.0 {
            p_lo = ctx.eps_floor;
            r_lo = r_floor;
        }
    }
    let r_hi = residual(p_hi)?;
    if r_lo <= 0.0 {
        // residual decreases in p, so the root lies at or below p_lo
        return Ok((p_lo, q_for(p_lo)?, true));
    }
    if r_hi >= 0.0 {
        return Ok((p_hi, q_for(p_hi)?, true));
    }
    let p = find_root_bracketed(
        |p| residual(p).unwrap_or(f64::NAN),
        p_lo,
        p_hi,
        ROOT_TOL * m.max(1.0),
    )?;
    Ok((p, q_for(p)?, false))
}

/// Outer root in `q` (left half of the band, where `q` is large and the
/// inner inversion for `p` is the stable one).
fn solve_point_outer_q(ctx: &PairCtx, x: f64) -> Result<(f64, f64, bool)> {
    let df_x = ctx.df(x);
    let dg_x = ctx.dg(x);
    let mt = ctx.prof.m_tilde;

    // q must satisfy dF(q) = dF(x) - dF(p) with p in (floor, m]; the most
    // negative admissible target corresponds to p = m
    let (q_lo, _) = ctx.inv_df_tail(df_x - ctx.prof.df_max)?;
    let q_hi = ctx.q_cap;

    let p_for = |q: f64| -> Result<f64> {
        // dF(q) is tiny and relatively accurate; no cancellation here
        let target = df_x - ctx.df(q);
        Ok(ctx.inv_df_low(target, ctx.eps_floor)?.0)
    };
    let residual = |q: f64| -> Result<f64> {
        let p = p_for(q)?;
        let head = ctx.dg(p) - dg_x;
        if head.abs() < 1e-6 {
            let mu = ctx.mu;
            let nu = ctx.nu;
            let (v, _) = crate::numerics::gk15_panel(
                |s| s * (nu.density(s).unwrap_or(0.0) - mu.density(s).unwrap_or(0.0)),
                p,
                x,
            );
            return Ok(ctx.dg(q) - v);
        }
        Ok(ctx.dg(q) + head)
    };

    if !(q_lo < q_hi) {
        let q = q_lo.min(q_hi);
        return Ok((p_for(q)?, q, true));
    }
    // the residual increases in q; work in z = 1/q so the wide bracket
    // stays resolvable
    let r_lo = residual(q_lo)?;
    let r_hi = residual(q_hi)?;
    if r_lo >= 0.0 {
        return Ok((p_for(q_lo)?, q_lo, true));
    }
    if r_hi <= 0.0 {
        return Ok((p_for(q_hi)?, q_hi, true));
    }
    let z = find_root_bracketed(
        |z| residual(1.0 / z).unwrap_or(f64::NAN),
        1.0 / q_hi,
        1.0 / q_lo,
        ROOT_TOL / mt.max(1.0),
    )?;
    let q = 1.0 / z;
    Ok((p_for(q)?, q, false))
}
