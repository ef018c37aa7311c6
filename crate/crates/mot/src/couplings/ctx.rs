//! Shared solving context for the coupling constructions.
//!
//! Wraps a marginal pair and its delta profile with the bracket caps and the
//! partial inverses of `delta F` / `delta G` restricted to the monotone
//! branches the constructions need: both gaps increase on `(0, m]` and on
//! `[m_tilde, inf)`, so each restriction is invertible by bracketed
//! root-finding. The tail inverse works in the variable `z = 1/q` because
//! the solved point is unbounded near one end of the band.

use crate::config::{ROOT_TOL, TAIL_QUANTILE};
use crate::error::{Error, Result};
use crate::measures::{DeltaProfile, Marginal};
use crate::numerics::find_root_bracketed;

/// A probability argument carried with its complement so that downstream
/// quantile evaluations can pick the side that still has digits.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Prob2 {
    /// Lower-tail probability.
    pub p: f64,
    /// Complement `1 - p`, computed independently (not as `1.0 - p`).
    pub sf: f64,
}

/// A cumulated-expectation argument with its tail complement.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Cum2 {
    pub g: f64,
    pub tail: f64,
}

pub(crate) struct PairCtx<'a> {
    pub mu: &'a Marginal,
    pub nu: &'a Marginal,
    pub prof: &'a DeltaProfile,
    /// Default lower bracket cap: the extreme lower quantile of `nu`.
    pub eps_q: f64,
    /// Hard floor for adaptive bracket extension.
    pub eps_floor: f64,
    /// Upper cap for tail inversions.
    pub q_cap: f64,
}

impl<'a> PairCtx<'a> {
    pub fn new(prof: &'a DeltaProfile) -> Result<Self> {
        let nu = prof.nu();
        let eps_q = nu.quantile(TAIL_QUANTILE)?;
        let eps_floor = nu.quantile(1e-13)?;
        let q_cap = nu.quantile_from_sf(1e-13)?;
        Ok(PairCtx { mu: prof.mu(), nu, prof, eps_q, eps_floor, q_cap })
    }

    pub fn df(&self, x: f64) -> f64 {
        self.prof.delta_f(x)
    }

    pub fn dg(&self, x: f64) -> f64 {
        self.prof.delta_g(x)
    }

    /// Inverts `delta F` on the increasing branch `(0, m]`.
    /// Returns the clamped endpoint (with `true`) when the target is outside
    /// the bracket's value range.
    pub fn inv_df_low(&self, target: f64, lo_cap: f64) -> Result<(f64, bool)> {
        let m = self.prof.m;
        if target >= self.prof.df_max {
            return Ok((m, true));
        }
        if target <= self.df(lo_cap) {
            return Ok((lo_cap, true));
        }
        let r = find_root_bracketed(|x| self.df(x) - target, lo_cap, m, ROOT_TOL * m)?;
        Ok((r, false))
    }

    /// Inverts `delta G` on the increasing branch `(0, m]`.
    pub fn inv_dg_low(&self, target: f64, lo_cap: f64) -> Result<(f64, bool)> {
        let m = self.prof.m;
        if target >= self.dg(m) {
            return Ok((m, true));
        }
        if target <= self.dg(lo_cap) {
            return Ok((lo_cap, true));
        }
        let r = find_root_bracketed(|x| self.dg(x) - target, lo_cap, m, ROOT_TOL * m)?;
        Ok((r, false))
    }

    /// Inverts `delta F` on the increasing tail branch `[m_tilde, q_cap]`,
    /// solving in `z = 1/q` so the unbounded end stays well-posed.
    pub fn inv_df_tail(&self, target: f64) -> Result<(f64, bool)> {
        self.inv_tail(target, &|x| self.df(x), self.prof.df_min)
    }

    /// Inverts `delta G` on the tail branch `[m_tilde, q_cap]`.
    pub fn inv_dg_tail(&self, target: f64) -> Result<(f64, bool)> {
        let dg_min = self.dg(self.prof.m_tilde);
        self.inv_tail(target, &|x| self.dg(x), dg_min)
    }

    fn inv_tail(&self, target: f64, f: &dyn Fn(f64) -> f64, f_min: f64) -> Result<(f64, bool)> {
        let mt = self.prof.m_tilde;
        if target <= f_min {
            return Ok((mt, true));
        }
        if target >= f(self.q_cap) {
            return Ok((self.q_cap, true));
        }
        let (z_lo, z_hi) = (1.0 / self.q_cap, 1.0 / mt);
        let z = find_root_bracketed(|z| f(1.0 / z) - target, z_lo, z_hi, 1e-16 + ROOT_TOL * z_lo)?;
        Ok((1.0 / z, false))
    }

    /// CDF argument pair at `x` shifted by a `delta F` increment.
    pub fn prob_arg(&self, x: f64, df_shift: f64) -> Result<Prob2> {
        Ok(Prob2 {
            p: self.mu.cdf(x)? + df_shift,
            sf: self.mu.survival(x)? - df_shift,
        })
    }

    /// Cumulated-expectation argument pair at `x` shifted by `delta G`.
    pub fn cum_arg(&self, x: f64, dg_shift: f64) -> Result<Cum2> {
        Ok(Cum2 {
            g: self.mu.cumulated_expectation(x)? + dg_shift,
            tail: self.mu.tail_expectation(x)? - dg_shift,
        })
    }

    /// Quantile of `nu` from a two-sided probability argument.
    pub fn nu_quantile2(&self, arg: Prob2) -> Result<f64> {
        if arg.p <= 0.0 || arg.sf <= 0.0 {
            return Err(Error::NumericsFailure(format!(
                "quantile argument outside (0,1): p={}, sf={}",
                arg.p, arg.sf
            )));
        }
        if arg.p <= 0.5 {
            self.nu.quantile(arg.p)
        } else {
            self.nu.quantile_from_sf(arg.sf)
        }
    }

    /// G-inverse of `nu` from a two-sided argument.
    pub fn nu_g_inverse2(&self, arg: Cum2) -> Result<f64> {
        if arg.g <= 0.0 || arg.tail <= 0.0 {
            return Err(Error::NumericsFailure(format!(
                "G-inverse argument outside (0, mean): g={}, tail={}",
                arg.g, arg.tail
            )));
        }
        if arg.g <= 0.5 * self.nu.mean() {
            self.nu.cumulated_expectation_inverse(arg.g)
        } else {
            self.nu.cumulated_expectation_inverse_from_tail(arg.tail)
        }
    }

    /// Fraction of mass the three-band kernel moves at `x`:
    /// `(p_mu - p_nu) / p_mu`, clipped to `[0, 1]`.
    pub fn moved_fraction(&self, x: f64) -> Result<f64> {
        let pm = self.mu.density(x)?;
        let pn = self.nu.density(x)?;
        if pm <= 0.0 {
            return Ok(0.0);
        }
        Ok(((pm - pn) / pm).clamp(0.0, 1.0))
    }
}
