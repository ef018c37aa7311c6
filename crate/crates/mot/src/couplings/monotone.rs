//! Construction of the left- and right-monotone plans.
//!
//! Left plan: identity up to `x_star` (the maximizer of `delta F`); for
//! `x > x_star` the lower map `L_d(x)` is the root in `l` of
//!
//! ```text
//! Fnu^{-1}( Fmu(x) + dF(l) )  =  Gnu^{-1}( Gmu(x) + dG(l) )
//! ```
//!
//! and the upper map is `L_u(x) = Fnu^{-1}(Fmu(x) + dF(L_d(x)))`. The right
//! plan mirrors this below the minimizer of `delta F`; it can also be
//! produced by reflecting the left plan of the reciprocal pair, and the two
//! routes are cross-checked against each other.

use crate::config::ROOT_TOL;
use crate::error::{Error, Result};
use crate::measures::{DeltaProfile, Marginal};
use crate::numerics::{find_root_bracketed, FunctionTable, Monotonicity};
use crate::numeraire::symmetrize_marginal;

use super::ctx::PairCtx;
use super::{MonotoneDirection, RightMethod, TwoBandKernel};

/// Builds the left-monotone kernel on `n_grid` log-spaced points covering
/// the split region `(x_star, q_mu(1 - tail))`.
pub fn build_left_monotone(mu: &Marginal, nu: &Marginal, n_grid: usize) -> Result<TwoBandKernel> {
    let prof = DeltaProfile::new(mu, nu)?;
    let x_hi = mu.quantile_from_sf(crate::config::TAIL_QUANTILE)?;
    let grid = crate::numerics::log_grid_inside(prof.m, x_hi, n_grid.max(8));
    build_left_on_grid(&prof, &grid, x_hi)
}

/// Builds the right-monotone kernel. `Reflection` constructs the left plan
/// of the reciprocal pair `(S(mu), S(nu))` on the reciprocal grid and maps
/// it back; `Direct` solves the mirrored equations on this pair.
pub fn build_right_monotone(
    mu: &Marginal,
    nu: &Marginal,
    n_grid: usize,
    method: RightMethod,
) -> Result<TwoBandKernel> {
    let prof = DeltaProfile::new(mu, nu)?;
    let x_lo = mu.quantile(crate::config::TAIL_QUANTILE)?;
    let grid = crate::numerics::log_grid_inside(x_lo, prof.m_tilde, n_grid.max(8));
    match method {
        RightMethod::Direct => build_right_on_grid(&prof, &grid, x_lo),
        RightMethod::Reflection => {
            let s_mu = symmetrize_marginal(mu)?;
            let s_nu = symmetrize_marginal(nu)?;
            let s_prof = DeltaProfile::new(&s_mu, &s_nu)?;
            // reciprocal of the right grid, ascending
            let s_grid: Vec<f64> = grid.iter().rev().map(|x| 1.0 / x).collect();
            let s_hi = 1.0 / x_lo;
            let left = build_left_on_grid(&s_prof, &s_grid, s_hi)?;
            left.reflect()
        }
    }
}

/// Builds the right plan by both routes and errors if they disagree beyond
/// `tol` on `T_d`, `T_u` or the transition probability at shared grid
/// points. Returns the direct kernel and the observed sup-difference.
pub fn cross_check_right_monotone(
    mu: &Marginal,
    nu: &Marginal,
    n_grid: usize,
    tol: f64,
) -> Result<(TwoBandKernel, f64)> {
    let direct = build_right_monotone(mu, nu, n_grid, RightMethod::Direct)?;
    let reflected = build_right_monotone(mu, nu, n_grid, RightMethod::Reflection)?;
    let mut sup = (direct.x_star - reflected.x_star).abs();
    for (x, d, u, q) in direct.rows() {
        // the diagonal-collapse knot records a continuation convention for
        // the transition probability, not a solved value; skip it
        if (x - direct.x_star).abs() <= 1e-9 * direct.x_star {
            continue;
        }
        let dd = reflected.t_d.eval_clamped(x);
        let uu = reflected.t_u.eval_clamped(x);
        let qq = reflected.prob.eval_clamped(x);
        sup = sup.max((d - dd).abs()).max((u - uu).abs()).max((q - qq).abs());
    }
    if sup > tol {
        return Err(Error::MethodMismatch { sup_diff: sup, tol });
    }
    Ok((direct, sup))
}

pub(crate) fn build_left_on_grid(
    prof: &DeltaProfile,
    grid: &[f64],
    x_bound: f64,
) -> Result<TwoBandKernel> {
    let ctx = PairCtx::new(prof)?;
    let x_star = prof.m;
    // the split collapses onto the diagonal at x_star; carrying that knot in
    // the tables keeps interpolated evaluation faithful over the half-step
    // between x_star and the first solved point
    let mut xs = Vec::with_capacity(grid.len() + 1);
    let mut d_vals = Vec::with_capacity(grid.len() + 1);
    let mut u_vals = Vec::with_capacity(grid.len() + 1);
    let mut q_vals = Vec::with_capacity(grid.len() + 1);
    xs.push(x_star);
    d_vals.push(x_star);
    u_vals.push(x_star);
    q_vals.push(f64::NAN); // patched to the first solved value below
    let mut flagged = Vec::new();

    for &x in grid {
        if !(x > x_star) {
            return Err(Error::Domain(format!("left grid point {x} not above {x_star}")));
        }
        let (l, clamped) = solve_left_point(&ctx, x)
            .map_err(|e| Error::NumericsFailure(format!("left-monotone solve at x={x}: {e}")))?;
        if clamped {
            flagged.push(x);
        }
        let up = ctx.nu_quantile2(ctx.prob_arg(x, ctx.df(l))?)?;
        if !(l < x && x < up) {
            return Err(Error::NumericsFailure(format!(
                "split out of order at x={x}: L_d={l}, L_u={up}"
            )));
        }
        xs.push(x);
        d_vals.push(l);
        u_vals.push(up);
        q_vals.push(((x - l) / (up - l)).clamp(0.0, 1.0));
    }
    q_vals[0] = q_vals[1];

    Ok(TwoBandKernel {
        mu: prof.mu().clone(),
        nu: prof.nu().clone(),
        direction: MonotoneDirection::Left,
        x_star,
        t_d: FunctionTable::new(xs.clone(), d_vals, Monotonicity::Decreasing)
            .map_err(|e| Error::NumericsFailure(format!("L_d not decreasing: {e}")))?,
        t_u: FunctionTable::new(xs.clone(), u_vals, Monotonicity::Increasing)
            .map_err(|e| Error::NumericsFailure(format!("L_u not increasing: {e}")))?,
        prob: FunctionTable::new(xs, q_vals, Monotonicity::None)?,
        x_bound,
        flagged,
    })
}

/// Root of the lower-map equation at one point of the left plan.
/// Returns `(L_d, clamped)`.
fn solve_left_point(ctx: &PairCtx, x: f64) -> Result<(f64, bool)> {
    let m = ctx.prof.m;
    let sf_x = ctx.mu.survival(x)?;
    let tail_x = ctx.mu.tail_expectation(x)?;

    // feasibility caps: the shifted CDF / cumulated-expectation arguments
    // must stay inside (0, 1); the caps bite for large x, where the true
    // solution dives toward zero. The slack is absolute because the gap
    // evaluations carry ~1e-17 roundoff of their own.
    let slack = |v: f64| v - 1e-14_f64.max(v * 1e-9);
    let lo_floor = ctx.eps_floor;
    let cap_f = if ctx.prof.df_max < slack(sf_x) {
        m
    } else {
        ctx.inv_df_low(slack(sf_x), lo_floor)?.0
    };
    let dg_at_m = ctx.dg(m);
    let cap_g = if dg_at_m < slack(tail_x) {
        m
    } else {
        ctx.inv_dg_low(slack(tail_x), lo_floor)?.0
    };
    let hi = cap_f.min(cap_g).min(m).min(x);
    // default lower cap, extended down to the floor when the feasibility
    // caps squeeze the bracket shut (top of the grid)
    let mut lo = ctx.eps_q.min(hi * 0.5);
    if hi <= lo * (1.0 + 1e-9) {
        lo = lo_floor.min(hi * 0.5);
    }

    let residual = |l: f64| -> Result<f64> {
        let dfl = ctx.df(l);
        let dgl = ctx.dg(l);
        let a = ctx.nu_quantile2(ctx.prob_arg(x, dfl)?)?;
        let b = ctx.nu_g_inverse2(ctx.cum_arg(x, dgl)?)?;
        Ok(a - b)
    };

    let first = solve_on_bracket(&residual, lo, hi, m)?;
    if first.1 && (first.0 - lo).abs() <= 1e-12 * lo && lo > lo_floor * (1.0 + 1e-9) {
        // clamped at the default cap: the root may sit between the hard
        // floor and the cap
        return solve_on_bracket(&residual, lo_floor, hi, m);
    }
    Ok(first)
}

pub(crate) fn build_right_on_grid(
    prof: &DeltaProfile,
    grid: &[f64],
    x_bound: f64,
) -> Result<TwoBandKernel> {
    let ctx = PairCtx::new(prof)?;
    let x_star = prof.m_tilde;
    let mut xs = Vec::with_capacity(grid.len() + 1);
    let mut d_vals = Vec::with_capacity(grid.len() + 1);
    let mut u_vals = Vec::with_capacity(grid.len() + 1);
    let mut q_vals = Vec::with_capacity(grid.len() + 1);
    let mut flagged = Vec::new();

    for &x in grid {
        if !(x < x_star) {
            return Err(Error::Domain(format!("right grid point {x} not below {x_star}")));
        }
        let (up, clamped) = solve_right_point(&ctx, x)
            .map_err(|e| Error::NumericsFailure(format!("right-monotone solve at x={x}: {e}")))?;
        if clamped {
            flagged.push(x);
        }
        let down = ctx.nu_quantile2(ctx.prob_arg(x, ctx.df(up))?)?;
        if !(down < x && x < up) {
            return Err(Error::NumericsFailure(format!(
                "split out of order at x={x}: R_d={down}, R_u={up}"
            )));
        }
        xs.push(x);
        d_vals.push(down);
        u_vals.push(up);
        q_vals.push(((x - down) / (up - down)).clamp(0.0, 1.0));
    }
    // diagonal collapse knot at the identity boundary
    xs.push(x_star);
    d_vals.push(x_star);
    u_vals.push(x_star);
    q_vals.push(*q_vals.last().unwrap());

    Ok(TwoBandKernel {
        mu: prof.mu().clone(),
        nu: prof.nu().clone(),
        direction: MonotoneDirection::Right,
        x_star,
        t_d: FunctionTable::new(xs.clone(), d_vals, Monotonicity::Increasing)
            .map_err(|e| Error::NumericsFailure(format!("R_d not increasing: {e}")))?,
        t_u: FunctionTable::new(xs.clone(), u_vals, Monotonicity::Decreasing)
            .map_err(|e| Error::NumericsFailure(format!("R_u not decreasing: {e}")))?,
        prob: FunctionTable::new(xs, q_vals, Monotonicity::None)?,
        x_bound,
        flagged,
    })
}

/// Root of the upper-map equation at one point of the right plan.
/// Returns `(R_u, clamped)`.
fn solve_right_point(ctx: &PairCtx, x: f64) -> Result<(f64, bool)> {
    let mt = ctx.prof.m_tilde;
    let f_x = ctx.mu.cdf(x)?;
    let g_x = ctx.mu.cumulated_expectation(x)?;

    // feasibility: dF(u) > -Fmu(x) and dG(u) > -Gmu(x); both gaps increase
    // from their minimum toward zero on the tail branch, so the caps are
    // lower bounds on u. Absolute slack, as in the left solve.
    let slack = |v: f64| v - 1e-14_f64.max(v * 1e-9);
    let cap_f = if ctx.prof.df_min > -slack(f_x) {
        mt
    } else {
        ctx.inv_df_tail(-slack(f_x))?.0
    };
    let dg_min = ctx.dg(mt);
    let cap_g = if dg_min > -slack(g_x) {
        mt
    } else {
        ctx.inv_dg_tail(-slack(g_x))?.0
    };
    let lo = cap_f.max(cap_g).max(mt).max(x);
    let hi = ctx.q_cap;
    if !(lo < hi) {
        return Err(Error::NumericsFailure(format!("empty bracket [{lo}, {hi}]")));
    }

    let residual = |u: f64| -> Result<f64> {
        let dfu = ctx.df(u);
        let dgu = ctx.dg(u);
        let a = ctx.nu_quantile2(ctx.prob_arg(x, dfu)?)?;
        let b = ctx.nu_g_inverse2(ctx.cum_arg(x, dgu)?)?;
        Ok(a - b)
    };

    solve_on_bracket(&residual, lo, hi, mt)
}

/// Sign-scan plus bracketed root-find; clamps to the better endpoint (and
/// reports it) when the residual does not change sign on the bracket, which
/// happens only on the whisker points where the split has no visible mass.
fn solve_on_bracket(
    residual: &dyn Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    scale: f64,
) -> Result<(f64, bool)> {
    let r_lo = residual(lo)?;
    let r_hi = residual(hi)?;
    if r_lo == 0.0 {
        return Ok((lo, false));
    }
    if r_hi == 0.0 {
        return Ok((hi, false));
    }
    let (mut bra, mut ket) = (lo, hi);
    let (mut r_bra, mut r_ket) = (r_lo, r_hi);
    if r_lo.signum() == r_hi.signum() {
        // scan for a sign change on a log-spaced sweep
        let mut found = false;
        let n = 48;
        let (llo, lhi) = (lo.ln(), hi.ln());
        let mut prev_x = lo;
        let mut prev_r = r_lo;
        for k in 1..=n {
            let xk = (llo + (lhi - llo) * k as f64 / n as f64).exp();
            let rk = residual(xk)?;
            if prev_r.signum() != rk.signum() {
                bra = prev_x;
                ket = xk;
                r_bra = prev_r;
                r_ket = rk;
                found = true;
                break;
            }
            prev_x = xk;
            prev_r = rk;
        }
        if !found {
            // no root inside: accept the endpoint with the smaller residual
            // if it is small on the scale of the maps, else give up
            let (cand, r_cand) =
                if r_lo.abs() <= r_hi.abs() { (lo, r_lo) } else { (hi, r_hi) };
            if r_cand.abs() <= 1e-6 * scale.max(1.0) {
                return Ok((cand, true));
            }
            return Err(Error::NumericsFailure(format!(
                "no sign change on [{lo}, {hi}]: residuals {r_lo:.3e}, {r_hi:.3e}"
            )));
        }
    }
    let _ = (r_bra, r_ket);
    let root = find_root_bracketed(
        |l| residual(l).unwrap_or(f64::NAN),
        bra,
        ket,
        ROOT_TOL * scale.max(1.0),
    )?;
    Ok((root, false))
}
