//! Payoffs, expectations under a coupling, model-free bounds and the
//! model-risk functional.

use std::sync::Arc;

use crate::config::{QUAD_TOL, TAIL_QUANTILE};
use crate::couplings::{build_hk, CouplingKernel, ThreeBandKernel};
use crate::error::{Error, Result};
use crate::lp::{solve_bounds, Direction, DiscreteMotInstance, LpConfig};
use crate::measures::Marginal;
use crate::numerics::{integrate_with_breakpoints, SplitMix64};

type EvalFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Sign class of the cross-derivative `C_xyy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmSign {
    Positive,
    Negative,
    Zero,
    Unknown,
}

/// Whether the payoff is invariant under the numeraire transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymmetryFlag {
    Symmetric,
    Asymmetric,
    Unknown,
}

/// A payoff `C(x, y)` of the two dated prices, with growth and shape
/// metadata used by pricing and by the optimality checks.
#[derive(Clone)]
pub struct Payoff {
    eval: EvalFn,
    /// Growth constant: `|C| <= kappa (1 + x + y)`.
    pub kappa: f64,
    /// Whether `kappa` is exact or a numerical sup over a box.
    pub kappa_exact: bool,
    pub sm_sign: SmSign,
    pub symmetry: SymmetryFlag,
    pub label: String,
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Payoff")
            .field("label", &self.label)
            .field("kappa", &self.kappa)
            .field("sm_sign", &self.sm_sign)
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl Payoff {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    /// Forward-start straddle of type II: `|y - alpha x|`.
    pub fn straddle_type_ii(alpha: f64) -> Result<Payoff> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("straddle needs alpha > 0, got {alpha}")));
        }
        Ok(Payoff {
            eval: Arc::new(move |x, y| (y - alpha * x).abs()),
            kappa: alpha.max(1.0),
            kappa_exact: true,
            sm_sign: SmSign::Unknown,
            symmetry: SymmetryFlag::Asymmetric,
            label: format!("straddle2:alpha={alpha}"),
        })
    }

    /// Forward-start straddle of type I: `|y/x - alpha|`.
    pub fn straddle_type_i(alpha: f64) -> Result<Payoff> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("straddle needs alpha > 0, got {alpha}")));
        }
        let eval: EvalFn = Arc::new(move |x, y| (y / x - alpha).abs());
        let kappa = numeric_kappa(&eval);
        Ok(Payoff {
            eval,
            kappa,
            kappa_exact: false,
            sm_sign: SmSign::Unknown,
            symmetry: SymmetryFlag::Asymmetric,
            label: format!("straddle1:alpha={alpha}"),
        })
    }

    /// European call on the second date: `(y - k)^+`.
    pub fn call(strike: f64) -> Result<Payoff> {
        if !(strike >= 0.0) {
            return Err(Error::Domain(format!("call needs strike >= 0, got {strike}")));
        }
        Ok(Payoff {
            eval: Arc::new(move |_, y| (y - strike).max(0.0)),
            kappa: 1.0,
            kappa_exact: true,
            sm_sign: SmSign::Zero,
            symmetry: SymmetryFlag::Asymmetric,
            label: format!("call:strike={strike}"),
        })
    }

    /// Forward: `y - x`. Prices to zero under any martingale coupling.
    pub fn forward() -> Payoff {
        Payoff {
            eval: Arc::new(|x, y| y - x),
            kappa: 1.0,
            kappa_exact: true,
            sm_sign: SmSign::Zero,
            symmetry: SymmetryFlag::Asymmetric,
            label: "forward".into(),
        }
    }

    /// `x exp(-y)`: smooth test payoff with strictly positive `C_xyy`.
    pub fn x_exp_neg_y() -> Payoff {
        Payoff {
            eval: Arc::new(|x, y| x * (-y).exp()),
            kappa: 1.0,
            kappa_exact: true,
            sm_sign: SmSign::Positive,
            symmetry: SymmetryFlag::Asymmetric,
            label: "xexp".into(),
        }
    }

    /// Semi-static combination `phi(x) + psi(y) + h(x)(y - x)`.
    pub fn decomposable(
        phi: crate::numeraire::ScalarFn,
        psi: crate::numeraire::ScalarFn,
        h: crate::numeraire::ScalarFn,
        label: &str,
    ) -> Payoff {
        let eval: EvalFn = Arc::new(move |x, y| phi(x) + psi(y) + h(x) * (y - x));
        let kappa = numeric_kappa(&eval);
        Payoff {
            eval,
            kappa,
            kappa_exact: false,
            sm_sign: SmSign::Zero,
            symmetry: SymmetryFlag::Unknown,
            label: label.into(),
        }
    }

    /// Arbitrary payoff with caller-supplied metadata.
    pub fn from_fn(
        label: &str,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        kappa: f64,
        sm_sign: SmSign,
    ) -> Payoff {
        Payoff {
            eval: Arc::new(f),
            kappa,
            kappa_exact: true,
            sm_sign,
            symmetry: SymmetryFlag::Unknown,
            label: label.into(),
        }
    }

    /// Parses a payoff spec string: `straddle1:alpha=1`, `straddle2:alpha=1`,
    /// `call:strike=1.1`, `forward`, `xexp`,
    /// `alpha-portfolio:base=<spec>,alpha=0.5`.
    pub fn parse_spec(spec: &str) -> Result<Payoff> {
        let spec = spec.trim();
        match spec {
            "forward" => return Ok(Payoff::forward()),
            "xexp" => return Ok(Payoff::x_exp_neg_y()),
            _ => {}
        }
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::BadSpec(format!("payoff spec '{spec}' has no ':'")))?;
        let get = |key: &str| -> Result<f64> {
            for item in rest.split(',') {
                if let Some((k, v)) = item.split_once('=') {
                    if k.trim() == key {
                        return v
                            .trim()
                            .parse::<f64>()
                            .map_err(|_| Error::BadSpec(format!("'{v}' is not a number")));
                    }
                }
            }
            Err(Error::BadSpec(format!("missing '{key}=' in '{rest}'")))
        };
        match kind.trim() {
            "straddle1" => {
                Payoff::straddle_type_i(get("alpha")?).map_err(|e| Error::BadSpec(e.to_string()))
            }
            "straddle2" => {
                Payoff::straddle_type_ii(get("alpha")?).map_err(|e| Error::BadSpec(e.to_string()))
            }
            "call" => Payoff::call(get("strike")?).map_err(|e| Error::BadSpec(e.to_string())),
            "alpha-portfolio" => {
                // the base spec may itself contain commas; split on the last
                // ',alpha=' occurrence
                let body = rest.strip_prefix("base=").ok_or_else(|| {
                    Error::BadSpec(format!("alpha-portfolio needs 'base=...', got '{rest}'"))
                })?;
                let cut = body
                    .rfind(",alpha=")
                    .ok_or_else(|| Error::BadSpec("alpha-portfolio needs ',alpha='".into()))?;
                let base = Payoff::parse_spec(&body[..cut])?;
                let alpha: f64 = body[cut + 7..]
                    .trim()
                    .parse()
                    .map_err(|_| Error::BadSpec("bad alpha".into()))?;
                alpha_portfolio(&base, alpha).map_err(|e| Error::BadSpec(e.to_string()))
            }
            other => Err(Error::BadSpec(format!("unknown payoff kind '{other}'"))),
        }
    }

    /// The numeraire transform `(x, y) -> y C(1/x, 1/y)`.
    pub fn symmetrized(&self) -> Payoff {
        let inner = Arc::clone(&self.eval);
        let eval: EvalFn = Arc::new(move |x: f64, y: f64| y * inner(1.0 / x, 1.0 / y));
        let kappa = numeric_kappa(&eval);
        Payoff {
            eval,
            kappa,
            kappa_exact: false,
            sm_sign: match self.sm_sign {
                SmSign::Positive => SmSign::Negative,
                SmSign::Negative => SmSign::Positive,
                SmSign::Zero => SmSign::Zero,
                SmSign::Unknown => SmSign::Unknown,
            },
            symmetry: self.symmetry,
            label: format!("S*({})", self.label),
        }
    }
}

/// Sup of `|C| / (1 + x + y)` over a wide logarithmic box; the reported
/// growth constant for payoffs without a closed-form one.
fn numeric_kappa(eval: &EvalFn) -> f64 {
    let mut kappa = 0.0_f64;
    let n = 48;
    for i in 0..=n {
        let x = (-2.0 + 4.0 * i as f64 / n as f64).exp2() * 0.0625; // 2^-6 .. 2^6 roughly
        let x = x * 16.0;
        for j in 0..=n {
            let y = (-2.0 + 4.0 * j as f64 / n as f64).exp2();
            let v = eval(x, y).abs() / (1.0 + x + y);
            if v > kappa {
                kappa = v;
            }
        }
    }
    kappa
}

/// Convex mix `alpha C + (1 - alpha) S*(C)`; at `alpha = 1/2` the result is
/// symmetric under the numeraire transform.
pub fn alpha_portfolio(c: &Payoff, alpha: f64) -> Result<Payoff> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must be in [0,1], got {alpha}")));
    }
    let sym = c.symmetrized();
    let base = Arc::clone(&c.eval);
    let mirror = Arc::clone(&sym.eval);
    let eval: EvalFn =
        Arc::new(move |x, y| alpha * base(x, y) + (1.0 - alpha) * mirror(x, y));
    let kappa = alpha * c.kappa + (1.0 - alpha) * sym.kappa;
    Ok(Payoff {
        eval,
        kappa,
        kappa_exact: false,
        sm_sign: SmSign::Unknown,
        symmetry: if alpha == 0.5 { SymmetryFlag::Symmetric } else { SymmetryFlag::Unknown },
        label: format!("alpha-portfolio:base={},alpha={alpha}", c.label),
    })
}

/// Expectation estimate with its error budget.
#[derive(Clone, Copy, Debug)]
pub struct PriceBreakdown {
    pub value: f64,
    /// Quadrature error estimate.
    pub quad_error: f64,
    /// Bound on the mass discarded by tail truncation, scaled by the payoff
    /// growth: `kappa (tail mass + 2 tail first moment)`.
    pub tail_bound: f64,
}

/// Expectation of `C` under the coupling: integrates
/// `x -> sum_i w_i(x) C(x, y_i(x))` against the kernel's base marginal,
/// splitting at the kernel regime boundaries and truncating at the extreme
/// quantiles.
pub fn price(k: &CouplingKernel, c: &Payoff, quad_tol: f64) -> Result<PriceBreakdown> {
    let base = k.base();
    // purely atomic base: exact sum, no quadrature
    if let Some((points, weights)) = base.as_atoms() {
        let mut total = 0.0;
        for (&x, &w) in points.iter().zip(weights) {
            let atoms = k.kernel_at(x)?;
            total += w * atoms.iter().map(|(y, wy)| wy * c.value(x, *y)).sum::<f64>();
        }
        return Ok(PriceBreakdown { value: total, quad_error: 0.0, tail_bound: 0.0 });
    }

    let x_lo = base.quantile(TAIL_QUANTILE)?;
    let x_hi = base.quantile_from_sf(TAIL_QUANTILE)?;
    let integrand = |x: f64| -> f64 {
        let atoms = match k.kernel_at(x) {
            Ok(a) => a,
            Err(_) => return 0.0,
        };
        let kernel_mean: f64 = atoms.iter().map(|(y, w)| w * c.value(x, *y)).sum();
        kernel_mean * base.density(x).unwrap_or(0.0)
    };
    let est = integrate_with_breakpoints(
        integrand,
        x_lo,
        x_hi,
        if quad_tol > 0.0 { quad_tol } else { QUAD_TOL },
        &k.breakpoints(),
    )?;
    // discarded tails: mass and first moment, scaled by the growth bound
    let tail_mass = base.cdf(x_lo)? + base.survival(x_hi)?;
    let tail_moment = base.cumulated_expectation(x_lo)? + base.tail_expectation(x_hi)?;
    let tail_bound = c.kappa * (tail_mass + 2.0 * tail_moment);
    Ok(PriceBreakdown { value: est.value, quad_error: est.error, tail_bound })
}

/// Which forward-start straddle type to bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StraddleKind {
    TypeI,
    TypeII,
}

/// Model-free lower bound of the at-the-money straddle of either type: both
/// are priced under the same three-band kernel, which attains them.
///
/// Coinciding marginals short-circuit to the identity coupling, whose
/// straddle value is zero.
pub fn lower_bound_straddle(
    mu: &Marginal,
    nu: &Marginal,
    kind: StraddleKind,
) -> Result<(PriceBreakdown, CouplingKernel)> {
    if marginals_coincide(mu, nu)? {
        return Ok((
            PriceBreakdown { value: 0.0, quad_error: 0.0, tail_bound: 0.0 },
            CouplingKernel::Identity(mu.clone()),
        ));
    }
    let kernel = build_hk(mu, nu, crate::config::DEFAULT_GRID)?;
    let payoff = match kind {
        StraddleKind::TypeI => Payoff::straddle_type_i(1.0)?,
        StraddleKind::TypeII => Payoff::straddle_type_ii(1.0)?,
    };
    let value = price(&CouplingKernel::ThreeBand(kernel.clone()), &payoff, QUAD_TOL)?;
    Ok((value, CouplingKernel::ThreeBand(kernel)))
}

/// Whether two laws are numerically indistinguishable: call prices dominate
/// in both directions on the shared strike grid.
fn marginals_coincide(mu: &Marginal, nu: &Marginal) -> Result<bool> {
    let forward = crate::measures::check_convex_order(mu, nu, 400)?;
    let backward = crate::measures::check_convex_order(nu, mu, 400)?;
    Ok(forward.ok && backward.ok)
}

/// Probe classification of the cross-derivative sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeClass {
    Positive,
    Negative,
    /// No definite sign: either genuinely mixed or below finite-difference
    /// noise everywhere (affine-in-y payoffs land here).
    Mixed,
}

/// Report of [`sm_sign_probe`]: the payoff's classification, the transformed
/// payoff's classification, and whether they flipped consistently.
#[derive(Clone, Copy, Debug)]
pub struct SmProbeReport {
    pub class: ProbeClass,
    pub transformed_class: ProbeClass,
    /// True when both probes are definite and opposite, or both indefinite.
    pub consistent: bool,
    /// Largest |C_xyy| estimate seen above noise.
    pub max_magnitude: f64,
}

/// Estimates the sign of `C_xyy` by nested central differences with
/// Richardson refinement at deterministic pseudo-random points, then checks
/// that the transformed payoff probes opposite.
///
/// A probe, not a proof: the classification threshold is ten times the
/// estimated finite-difference noise.
pub fn sm_sign_probe(c: &Payoff, n_samples: usize) -> SmProbeReport {
    let class = probe_class(c, n_samples);
    let t_class = probe_class(&c.symmetrized(), n_samples);
    let consistent = match (class.0, t_class.0) {
        (ProbeClass::Positive, ProbeClass::Negative) => true,
        (ProbeClass::Negative, ProbeClass::Positive) => true,
        (ProbeClass::Mixed, ProbeClass::Mixed) => true,
        _ => false,
    };
    SmProbeReport {
        class: class.0,
        transformed_class: t_class.0,
        consistent,
        max_magnitude: class.1,
    }
}

fn probe_class(c: &Payoff, n_samples: usize) -> (ProbeClass, f64) {
    let mut rng = SplitMix64::new(0x5eed_cafe);
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut max_mag = 0.0_f64;
    for _ in 0..n_samples.max(8) {
        let x = rng.log_uniform(0.25, 4.0);
        let y = rng.log_uniform(0.25, 4.0);
        let (hx, hy) = (1e-4 * x, 1e-4 * y);
        let est_h = cross_diff(c, x, y, hx, hy);
        let est_h2 = cross_diff(c, x, y, hx / 2.0, hy / 2.0);
        let value = (4.0 * est_h2 - est_h) / 3.0;
        // noise: Richardson disagreement plus rounding amplified by the
        // difference stencil
        let scale = stencil_scale(c, x, y, hx, hy);
        let noise = (est_h2 - est_h).abs() / 3.0 + 30.0 * f64::EPSILON * scale / (hx * hy * hy);
        if value.abs() > 10.0 * noise {
            if value > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            max_mag = max_mag.max(value.abs());
        }
    }
    let n = n_samples.max(8);
    let class = if neg == 0 && pos * 2 >= n {
        ProbeClass::Positive
    } else if pos == 0 && neg * 2 >= n {
        ProbeClass::Negative
    } else {
        ProbeClass::Mixed
    };
    (class, max_mag)
}

/// Central estimate of `C_xyy` on a 2x3 stencil.
fn cross_diff(c: &Payoff, x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let dyy = |x0: f64| {
        (c.value(x0, y + hy) - 2.0 * c.value(x0, y) + c.value(x0, y - hy)) / (hy * hy)
    };
    (dyy(x + hx) - dyy(x - hx)) / (2.0 * hx)
}

fn stencil_scale(c: &Payoff, x: f64, y: f64, hx: f64, hy: f64) -> f64 {
    let mut m = 0.0_f64;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            m = m.max(c.value(x + sx * hx, y + sy * hy).abs());
        }
    }
    m
}

/// Model risk `R = upper LP bound - lower LP bound` on the quantized
/// instance.
pub fn model_risk(mu: &Marginal, nu: &Marginal, c: &Payoff, cfg: &LpConfig) -> Result<f64> {
    let inst = DiscreteMotInstance::from_marginals(mu, nu, c, cfg)?;
    let upper = solve_bounds(&inst, Direction::Max)?;
    let lower = solve_bounds(&inst, Direction::Min)?;
    Ok(upper.value - lower.value)
}
