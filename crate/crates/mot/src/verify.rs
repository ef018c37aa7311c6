//! Named invariant suites aggregating the identities the library is built
//! on. The CLI `verify` command runs these; the acceptance tests pin the
//! same bounds independently.

use crate::couplings::{
    build_hk, build_left_monotone, cross_check_right_monotone, validate_coupling, CouplingKernel,
};
use crate::error::Result;
use crate::lp::{
    check_hedge, solve_bounds, Direction, DiscreteMotInstance, LpConfig, QuantScheme,
};
use crate::measures::{check_convex_order, DeltaProfile, Marginal};
use crate::numeraire::{symmetrize_marginal, ScalarFn};
use crate::numerics::{log_grid, SplitMix64};
use crate::pricing::{alpha_portfolio, price, Payoff};
use std::sync::Arc;

/// Which checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Symmetry,
    Coupling,
    Oracle,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Suite> {
        match s {
            "symmetry" => Some(Suite::Symmetry),
            "coupling" => Some(Suite::Coupling),
            "oracle" => Some(Suite::Oracle),
            "all" => Some(Suite::All),
            _ => None,
        }
    }
}

/// One named check outcome.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Aggregated outcome of a suite run.
#[derive(Clone, Debug)]
pub struct VerifySummary {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// Inputs of a verification run.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub mu: Marginal,
    pub nu: Marginal,
    /// Grid size for the coupling builds.
    pub grid: usize,
    /// Atom count for oracle cross-checks.
    pub atoms: usize,
    /// Extra instance to audit in the oracle suite.
    pub instance: Option<DiscreteMotInstance>,
}

impl VerifyConfig {
    pub fn lognormal_default() -> Self {
        VerifyConfig {
            mu: Marginal::lognormal(0.2).unwrap(),
            nu: Marginal::lognormal(0.3).unwrap(),
            grid: 256,
            atoms: 60,
            instance: None,
        }
    }
}

struct Recorder {
    checks: Vec<CheckResult>,
}

impl Recorder {
    fn new() -> Self {
        Recorder { checks: Vec::new() }
    }

    fn push(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(CheckResult { name: name.into(), pass, detail });
    }

    /// Records a bound check: passes when `value <= bound`.
    fn bound(&mut self, name: &str, value: f64, bound: f64) {
        self.push(name, value <= bound, format!("{value:.3e} (tol {bound:.1e})"));
    }

    /// Records a hard error as a failed check.
    fn fail(&mut self, name: &str, err: &crate::Error) {
        self.push(name, false, err.to_string());
    }
}

/// Runs the requested suite and returns the per-check report.
pub fn run(suite: Suite, cfg: &VerifyConfig) -> VerifySummary {
    let mut rec = Recorder::new();
    match suite {
        Suite::Symmetry => symmetry_suite(&mut rec, cfg),
        Suite::Coupling => coupling_suite(&mut rec, cfg),
        Suite::Oracle => oracle_suite(&mut rec, cfg),
        Suite::All => {
            symmetry_suite(&mut rec, cfg);
            coupling_suite(&mut rec, cfg);
            oracle_suite(&mut rec, cfg);
        }
    }
    let pass = rec.checks.iter().all(|c| c.pass);
    VerifySummary {
        suite: format!("{suite:?}").to_lowercase(),
        checks: rec.checks,
        pass,
    }
}

fn cdf_gap_grid(m: &Marginal) -> Vec<f64> {
    let lo = m.quantile(1e-7).unwrap_or(1e-3);
    let hi = m.quantile_from_sf(1e-7).unwrap_or(1e3);
    log_grid(lo * 1.0000037, hi * 0.9999961, 400)
}

fn symmetry_suite(rec: &mut Recorder, cfg: &VerifyConfig) {
    let marginals: Vec<(&str, Marginal)> = vec![
        ("mu", cfg.mu.clone()),
        ("nu", cfg.nu.clone()),
        ("two_atom", Marginal::atoms(vec![(0.5, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap()),
    ];
    for (name, m) in &marginals {
        match involution_gap(m) {
            Ok(gap) => rec.bound(&format!("s_involution_{name}"), gap, 1e-9),
            Err(e) => rec.fail(&format!("s_involution_{name}"), &e),
        }
        match lemma_identity_gap(m) {
            Ok((gf, gg)) => {
                rec.bound(&format!("cdf_identity_{name}"), gf, 1e-9);
                rec.bound(&format!("g_identity_{name}"), gg, 1e-9);
            }
            Err(e) => rec.fail(&format!("cdf_identity_{name}"), &e),
        }
    }

    // convex order survives the transform
    let co = check_convex_order(&cfg.mu, &cfg.nu, 500)
        .map(|r| r.ok)
        .unwrap_or(false);
    let co_s = symmetrize_marginal(&cfg.mu)
        .and_then(|sm| {
            symmetrize_marginal(&cfg.nu).and_then(|sn| check_convex_order(&sm, &sn, 500))
        })
        .map(|r| r.ok)
        .unwrap_or(false);
    rec.push(
        "convex_order_preserved",
        co && co_s,
        format!("original {co}, transformed {co_s}"),
    );

    // extremizer reciprocity
    match (
        DeltaProfile::new(&cfg.mu, &cfg.nu),
        symmetrize_marginal(&cfg.mu),
        symmetrize_marginal(&cfg.nu),
    ) {
        (Ok(prof), Ok(sm), Ok(sn)) => match DeltaProfile::new(&sm, &sn) {
            Ok(sprof) => {
                rec.bound(
                    "extremizer_reciprocity",
                    (sprof.m_tilde - 1.0 / prof.m).abs(),
                    1e-6,
                );
            }
            Err(e) => rec.fail("extremizer_reciprocity", &e),
        },
        _ => rec.push("extremizer_reciprocity", false, "profile failed".into()),
    }

    // straddle exchange and payoff involution on a random grid
    let mut rng = SplitMix64::new(0x0a11_5eed);
    let mut worst_exchange = 0.0_f64;
    let mut worst_involution = 0.0_f64;
    let s2 = Payoff::straddle_type_ii(1.0).unwrap();
    let s1 = Payoff::straddle_type_i(1.0).unwrap();
    let s2t = s2.symmetrized();
    let s2tt = s2t.symmetrized();
    for _ in 0..300 {
        let x = rng.log_uniform(0.1, 10.0);
        let y = rng.log_uniform(0.1, 10.0);
        worst_exchange = worst_exchange.max((s2t.value(x, y) - s1.value(x, y)).abs());
        worst_involution = worst_involution.max((s2tt.value(x, y) - s2.value(x, y)).abs());
    }
    rec.bound("straddle_exchange", worst_exchange, 1e-12);
    rec.bound("payoff_transform_involution", worst_involution, 1e-12);

    // hedge transform identity for random decomposable payoffs
    let mut worst_hedge = 0.0_f64;
    for seed in 0..5u64 {
        worst_hedge = worst_hedge.max(hedge_identity_gap(seed));
    }
    rec.bound("hedge_transform_identity", worst_hedge, 1e-10);
}

/// Sup CDF gap of S(S(m)) against m.
pub fn involution_gap(m: &Marginal) -> Result<f64> {
    let ss = symmetrize_marginal(&symmetrize_marginal(m)?)?;
    let mut worst = 0.0_f64;
    for y in cdf_gap_grid(m) {
        worst = worst.max((ss.cdf(y)? - m.cdf(y)?).abs());
    }
    Ok(worst)
}

/// Sup gaps of the transform identities `F_S = 1 - G(1/.)` and
/// `G_S = 1 - F(1/.)`.
pub fn lemma_identity_gap(m: &Marginal) -> Result<(f64, f64)> {
    let s = symmetrize_marginal(m)?;
    let mut worst_f = 0.0_f64;
    let mut worst_g = 0.0_f64;
    for y in cdf_gap_grid(&s) {
        worst_f = worst_f.max((s.cdf(y)? - m.tail_expectation(1.0 / y)?).abs());
        worst_g = worst_g.max((s.cumulated_expectation(y)? - m.survival(1.0 / y)?).abs());
    }
    Ok((worst_f, worst_g))
}

/// Reconstruction gap of the hedge transform for one random decomposable
/// payoff: the transformed triple must reproduce the transformed payoff.
pub fn hedge_identity_gap(seed: u64) -> f64 {
    let mut rng = SplitMix64::new(0xbeef ^ seed.wrapping_mul(0x9e37_79b9));
    let (a, b, c) = (rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    let (d, e) = (rng.uniform(-1.0, 1.0), rng.uniform(0.1, 2.0));
    let phi: ScalarFn = Arc::new(move |x: f64| a * x * x + b * x.ln());
    let psi: ScalarFn = Arc::new(move |y: f64| c * y + d * (e * y).sin());
    let h: ScalarFn = Arc::new(move |x: f64| d * (x - 1.0) + a);
    let payoff = Payoff::decomposable(phi.clone(), psi.clone(), h.clone(), "random-decomposable");
    let transformed = payoff.symmetrized();
    let (pt, st, ht) = crate::numeraire::symmetrize_hedge(phi, psi, h);
    let mut worst = 0.0_f64;
    let mut probe = SplitMix64::new(seed.wrapping_add(17));
    for _ in 0..120 {
        let x = probe.log_uniform(0.2, 5.0);
        let y = probe.log_uniform(0.2, 5.0);
        let recon = pt(x) + st(y) + ht(x) * (y - x);
        worst = worst.max((recon - transformed.value(x, y)).abs());
    }
    worst
}

fn coupling_suite(rec: &mut Recorder, cfg: &VerifyConfig) {
    let grid = cfg.grid.max(32);
    // three-band plan
    match build_hk(&cfg.mu, &cfg.nu, grid) {
        Ok(k) => {
            let decreasing = k
                .rows()
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1].1 <= w[0].1 && w[1].2 <= w[0].2);
            rec.push("hk_maps_decreasing", decreasing, "p, q monotone".into());
            match validate_coupling(&CouplingKernel::ThreeBand(k.clone()), &cfg.mu, &cfg.nu) {
                Ok(rep) => {
                    rec.bound("hk_marginal_error", rep.marginal_err, 1e-4);
                    rec.bound("hk_martingale_error", rep.martingale_err, 1e-8);
                }
                Err(e) => rec.fail("hk_validate", &e),
            }
            // reflection symmetry: reflect the reciprocal-pair kernel and
            // compare the maps
            match hk_reflection_gap(&cfg.mu, &cfg.nu, &k) {
                Ok(gap) => rec.bound("hk_reflection_symmetry", gap, 1e-5),
                Err(e) => rec.fail("hk_reflection_symmetry", &e),
            }
            // negative control: a corrupted kernel must be caught
            match corrupted_kernel_defect(&k) {
                Ok(defect) => rec.push(
                    "corrupted_kernel_detected",
                    defect > 1e-3,
                    format!("martingale defect {defect:.3e} after corruption"),
                ),
                Err(e) => rec.fail("corrupted_kernel_detected", &e),
            }
        }
        Err(e) => rec.fail("hk_build", &e),
    }

    // left-monotone plan
    match build_left_monotone(&cfg.mu, &cfg.nu, grid) {
        Ok(k) => {
            match validate_coupling(&CouplingKernel::TwoBand(k.clone()), &cfg.mu, &cfg.nu) {
                Ok(rep) => {
                    rec.bound("left_marginal_error", rep.marginal_err, 1e-4);
                    rec.bound("left_martingale_error", rep.martingale_err, 1e-8);
                }
                Err(e) => rec.fail("left_validate", &e),
            }
            let id_atoms = k.kernel_at(k.x_star * 0.9);
            rec.push(
                "left_identity_region",
                matches!(&id_atoms, Ok(atoms) if atoms.len() == 1),
                "single atom below x_star".into(),
            );
        }
        Err(e) => rec.fail("left_build", &e),
    }

    // right-monotone: the two routes must agree
    match cross_check_right_monotone(&cfg.mu, &cfg.nu, grid, 1e-6) {
        Ok((k, sup)) => {
            rec.bound("right_methods_agree", sup, 1e-6);
            match validate_coupling(&CouplingKernel::TwoBand(k), &cfg.mu, &cfg.nu) {
                Ok(rep) => {
                    rec.bound("right_marginal_error", rep.marginal_err, 1e-4);
                    rec.bound("right_martingale_error", rep.martingale_err, 1e-8);
                }
                Err(e) => rec.fail("right_validate", &e),
            }
        }
        Err(e) => rec.fail("right_methods_agree", &e),
    }
}

/// Gap between the kernel maps and the reflected maps of the reciprocal
/// pair, probed at interior grid points.
pub fn hk_reflection_gap(
    mu: &Marginal,
    nu: &Marginal,
    direct: &crate::couplings::ThreeBandKernel,
) -> Result<f64> {
    let s_mu = symmetrize_marginal(mu)?;
    let s_nu = symmetrize_marginal(nu)?;
    let prof = DeltaProfile::new(&s_mu, &s_nu)?;
    // reciprocal of the direct grid keeps the comparison pointwise
    let mut grid: Vec<f64> = direct.rows().map(|(x, ..)| 1.0 / x).collect();
    grid.reverse();
    let s_kernel = crate::couplings::build_hk_on_grid(&prof, &grid)?;
    let reflected = s_kernel.reflect()?;
    let mut worst = 0.0_f64;
    for ((x, p, q, _, _), (xr, pr, qr, _, _)) in direct.rows().zip(reflected.rows()) {
        if (x - xr).abs() > 1e-9 * x {
            return Err(crate::Error::Internal("grids misaligned".into()));
        }
        worst = worst.max((p - pr).abs()).max((q - qr).abs());
    }
    Ok(worst)
}

/// Scales the upper map by 1.01 and reports the posterior martingale defect.
fn corrupted_kernel_defect(k: &crate::couplings::ThreeBandKernel) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (x, p, q, l, u) in k.rows() {
        let q_bad = q * 1.01;
        let stay = 1.0 - l - u;
        let mean = l * p + stay * x + u * q_bad;
        worst = worst.max((mean - x).abs());
    }
    Ok(worst)
}

fn oracle_suite(rec: &mut Recorder, cfg: &VerifyConfig) {
    // exact fixtures
    oracle_fixture(
        rec,
        "pointmass",
        DiscreteMotInstance::new(
            vec![1.0],
            vec![1.0],
            vec![0.5, 1.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            Some("straddle2:alpha=1".into()),
        ),
        0.5,
        0.5,
    );
    let xa: Vec<f64> = vec![0.5, 1.5];
    let ya: Vec<f64> = vec![0.25, 1.75];
    let cost: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y - x).abs()))
        .collect();
    oracle_fixture(
        rec,
        "2x2",
        DiscreteMotInstance::new(xa, vec![0.5, 0.5], ya, vec![0.5, 0.5], cost, None),
        5.0 / 12.0,
        5.0 / 12.0,
    );
    let xa: Vec<f64> = vec![0.9, 1.1];
    let ya: Vec<f64> = vec![0.5, 1.0, 1.5];
    let cost: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y / x - 1.0).abs()))
        .collect();
    oracle_fixture(
        rec,
        "2x3",
        DiscreteMotInstance::new(
            xa,
            vec![0.5, 0.5],
            ya,
            vec![0.25, 0.5, 0.25],
            cost,
            Some("straddle1:alpha=1".into()),
        ),
        134.0 / 495.0,
        146.0 / 495.0,
    );

    // numeraire invariance of bounds on a quantized instance
    let payoff = Payoff::call(1.1).unwrap();
    match DiscreteMotInstance::from_marginals(
        &cfg.mu,
        &cfg.nu,
        &payoff,
        &LpConfig { atoms: cfg.atoms, scheme: QuantScheme::Quantile },
    ) {
        Ok(inst) => match inst.symmetrized() {
            Ok(s) => {
                let mut worst = 0.0_f64;
                let mut failed = false;
                for dir in [Direction::Min, Direction::Max] {
                    match (solve_bounds(&inst, dir), solve_bounds(&s, dir)) {
                        (Ok(a), Ok(b)) => worst = worst.max((a.value - b.value).abs()),
                        _ => failed = true,
                    }
                }
                rec.push(
                    "numeraire_invariance_discrete",
                    !failed && worst <= 1e-9,
                    format!("bound drift {worst:.3e}"),
                );
            }
            Err(e) => rec.fail("numeraire_invariance_discrete", &e),
        },
        Err(e) => rec.fail("numeraire_invariance_discrete", &e),
    }

    // model-risk symmetry of the half-portfolio
    match model_risk_symmetry_gap(cfg) {
        Ok((gap, min_ok)) => {
            rec.bound("model_risk_alpha_symmetry", gap, 2e-8);
            rec.push("model_risk_half_minimal", min_ok, "R(C_1/2) <= R(C_alpha) + tol".into());
        }
        Err(e) => rec.fail("model_risk_alpha_symmetry", &e),
    }

    // user-supplied instance audit
    if let Some(inst) = &cfg.instance {
        for c in inst.check_invariants() {
            rec.push(&format!("instance_{}", c.name), c.pass, c.detail.clone());
        }
        for dir in [Direction::Min, Direction::Max] {
            let tag = match dir {
                Direction::Min => "min",
                Direction::Max => "max",
            };
            match solve_bounds(inst, dir) {
                Ok(sol) => {
                    let gap = (sol.hedge.value(inst) - sol.value).abs();
                    rec.bound(&format!("instance_duality_gap_{tag}"), gap, 1e-8);
                    let feas = check_hedge(inst, &sol.hedge, dir);
                    rec.bound(
                        &format!("instance_hedge_feasible_{tag}"),
                        feas.max_violation,
                        1e-8,
                    );
                }
                Err(e) => rec.fail(&format!("instance_solve_{tag}"), &e),
            }
        }
    }
}

fn oracle_fixture(
    rec: &mut Recorder,
    name: &str,
    inst: Result<DiscreteMotInstance>,
    want_min: f64,
    want_max: f64,
) {
    let inst = match inst {
        Ok(i) => i,
        Err(e) => {
            rec.fail(&format!("fixture_{name}"), &e);
            return;
        }
    };
    for (dir, want) in [(Direction::Min, want_min), (Direction::Max, want_max)] {
        let tag = match dir {
            Direction::Min => "min",
            Direction::Max => "max",
        };
        match solve_bounds(&inst, dir) {
            Ok(sol) => {
                rec.bound(&format!("fixture_{name}_{tag}"), (sol.value - want).abs(), 1e-9);
                let gap = (sol.hedge.value(&inst) - sol.value).abs();
                rec.bound(&format!("fixture_{name}_{tag}_duality"), gap, 1e-8);
                let feas = check_hedge(&inst, &sol.hedge, dir);
                rec.bound(
                    &format!("fixture_{name}_{tag}_hedge"),
                    feas.max_violation,
                    1e-8,
                );
            }
            Err(e) => rec.fail(&format!("fixture_{name}_{tag}"), &e),
        }
    }
}

/// Model-risk drift `max_alpha |R(C_alpha) - R(C_{1-alpha})|` and whether the
/// half-portfolio minimizes the risk, on a numeraire-symmetric quantization.
pub fn model_risk_symmetry_gap(cfg: &VerifyConfig) -> Result<(f64, bool)> {
    let base = Payoff::call(1.1)?;
    let lp_cfg = LpConfig { atoms: cfg.atoms, scheme: QuantScheme::SymmetricLog };
    let risk = |alpha: f64| -> Result<f64> {
        let c = alpha_portfolio(&base, alpha)?;
        crate::pricing::model_risk(&cfg.mu, &cfg.nu, &c, &lp_cfg)
    };
    let mut worst = 0.0_f64;
    for alpha in [0.0, 0.25, 0.5] {
        let r = risk(alpha)?;
        let r_mirror = risk(1.0 - alpha)?;
        worst = worst.max((r - r_mirror).abs());
    }
    let r_half = risk(0.5)?;
    let mut min_ok = true;
    for alpha in [0.0, 0.25, 0.75, 1.0] {
        if r_half > risk(alpha)? + 1e-8 {
            min_ok = false;
        }
    }
    Ok((worst, min_ok))
}

/// Relative agreement between a constructed plan's price and the LP bound.
pub fn plan_vs_lp_gap(
    kernel: &CouplingKernel,
    mu: &Marginal,
    nu: &Marginal,
    payoff: &Payoff,
    direction: Direction,
    atoms: usize,
) -> Result<f64> {
    let value = price(kernel, payoff, 1e-10)?.value;
    let inst = DiscreteMotInstance::from_marginals(
        mu,
        nu,
        payoff,
        &LpConfig { atoms, scheme: QuantScheme::Quantile },
    )?;
    let bound = solve_bounds(&inst, direction)?.value;
    Ok((value - bound).abs() / bound.abs().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_suite_passes_on_defaults() {
        let cfg = VerifyConfig::lognormal_default();
        let summary = run(Suite::Symmetry, &cfg);
        for c in &summary.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
    }
}
