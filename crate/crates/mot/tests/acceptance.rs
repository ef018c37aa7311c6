//! Acceptance suite: every numbered criterion below pins its tolerance in
//! code and prints one PASS line when it holds. Run with
//!
//! ```text
//! cargo test -p mot --test acceptance -- --nocapture
//! ```

use std::time::Instant;

use mot::couplings::{
    build_hk, build_left_monotone, build_right_monotone, cross_check_right_monotone,
    validate_coupling, CouplingKernel, RightMethod,
};
use mot::lp::{
    check_hedge, quantize, solve_bounds, Direction, DiscreteMotInstance, LpConfig, QuantScheme,
};
use mot::measures::{lognormal_extremizers, DeltaProfile, Marginal};
use mot::numeraire::symmetrize_marginal;
use mot::numerics::{log_grid, SplitMix64};
use mot::pricing::{alpha_portfolio, model_risk, price, Payoff};
use mot::verify;

fn ln(sigma: f64) -> Marginal {
    Marginal::lognormal(sigma).unwrap()
}

fn two_atom() -> Marginal {
    Marginal::atoms(vec![(0.5, 2.0 / 3.0), (2.0, 1.0 / 3.0)]).unwrap()
}

fn quantized_ln() -> Marginal {
    let (a, w) = quantize(&ln(0.2), 50).unwrap();
    Marginal::atoms(a.into_iter().zip(w).collect()).unwrap()
}

fn probe_grid(m: &Marginal) -> Vec<f64> {
    let lo = m.quantile(1e-7).unwrap();
    let hi = m.quantile_from_sf(1e-7).unwrap();
    // nudged off any atom reciprocals
    log_grid(lo * 1.0000037, hi * 0.9999961, 1000)
}

#[test]
fn criterion_01_involution_and_identities() {
    let started = Instant::now();
    let marginals = [ln(0.2), ln(0.3), two_atom(), quantized_ln()];
    let mut worst_inv = 0.0_f64;
    let mut worst_id = 0.0_f64;
    for m in &marginals {
        let s = symmetrize_marginal(m).unwrap();
        let ss = symmetrize_marginal(&s).unwrap();
        for y in probe_grid(m) {
            worst_inv = worst_inv.max((ss.cdf(y).unwrap() - m.cdf(y).unwrap()).abs());
            // F_S(y) = 1 - G(1/y), with the right side taken in tail form
            worst_id = worst_id.max((s.cdf(y).unwrap() - m.tail_expectation(1.0 / y).unwrap()).abs());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst_inv <= 1e-9, "S o S drift {worst_inv:.3e}");
    assert!(worst_id <= 1e-9, "transform identity drift {worst_id:.3e}");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "criterion 01 PASS: involution {worst_inv:.2e}, identity {worst_id:.2e} (tol 1e-9) in {elapsed:?}"
    );
}

#[test]
fn criterion_02_symmetric_lognormal_fixed_point() {
    let mut worst = 0.0_f64;
    for sigma in [0.1, 0.2, 0.5] {
        let m = ln(sigma);
        let s = symmetrize_marginal(&m).unwrap();
        for y in probe_grid(&m) {
            worst = worst.max((s.cdf(y).unwrap() - m.cdf(y).unwrap()).abs());
            // the law is its own reflection: 1 - G(1/y) must equal F(y)
            worst = worst.max((m.tail_expectation(1.0 / y).unwrap() - m.cdf(y).unwrap()).abs());
        }
    }
    assert!(worst <= 1e-9, "fixed-point drift {worst:.3e}");
    println!("criterion 02 PASS: lognormal fixed point drift {worst:.2e} (tol 1e-9)");
}

#[test]
fn criterion_03_extremizers() {
    let prof = DeltaProfile::new(&ln(0.2), &ln(0.3)).unwrap();
    let err_m = (prof.m - 0.7838879660398044).abs();
    let err_mt = (prof.m_tilde - 1.275692501126139).abs();
    assert!(err_m <= 1e-6, "m off by {err_m:.3e}");
    assert!(err_mt <= 1e-6, "m_tilde off by {err_mt:.3e}");
    let (m_cf, mt_cf) = lognormal_extremizers(0.2, 0.3).unwrap();
    assert!((prof.m - m_cf).abs() <= 1e-6 && (prof.m_tilde - mt_cf).abs() <= 1e-6);
    // symmetric pairs: the extremizers are reciprocal
    let mut worst = 0.0_f64;
    for (sm, sn) in [(0.1, 0.2), (0.2, 0.3), (0.2, 0.5)] {
        let prof = DeltaProfile::new(&ln(sm), &ln(sn)).unwrap();
        worst = worst.max((prof.m * prof.m_tilde - 1.0).abs());
    }
    assert!(worst <= 1e-6, "reciprocity drift {worst:.3e}");
    println!(
        "criterion 03 PASS: extremizers within {:.2e}/{:.2e}, reciprocity {worst:.2e} (tol 1e-6)",
        err_m, err_mt
    );
}

#[test]
fn criterion_04_coupling_validity() {
    let started = Instant::now();
    let (mu, nu) = (ln(0.2), ln(0.3));
    let kernels: Vec<(&str, CouplingKernel)> = vec![
        ("three-band", build_hk(&mu, &nu, 512).unwrap().into()),
        ("left", build_left_monotone(&mu, &nu, 512).unwrap().into()),
        (
            "right",
            build_right_monotone(&mu, &nu, 512, RightMethod::Direct).unwrap().into(),
        ),
    ];
    let mut lines = Vec::new();
    for (name, k) in &kernels {
        let rep = validate_coupling(k, &mu, &nu).unwrap();
        assert!(rep.marginal_err <= 1e-4, "{name}: marginal {:.3e}", rep.marginal_err);
        assert!(rep.martingale_err <= 1e-8, "{name}: martingale {:.3e}", rep.martingale_err);
        lines.push(format!("{name} marginal {:.2e} martingale {:.2e}", rep.marginal_err, rep.martingale_err));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 04 PASS: {} (tol 1e-4 / 1e-8) in {elapsed:?}",
        lines.join("; ")
    );
}

#[test]
fn criterion_05_three_band_attains_lp_lower_bounds() {
    let started = Instant::now();
    let (mu, nu) = (ln(0.2), ln(0.3));
    let hk: CouplingKernel = build_hk(&mu, &nu, 512).unwrap().into();
    let cfg = LpConfig { atoms: 200, scheme: QuantScheme::Quantile };
    let mut gaps = Vec::new();
    for payoff in [
        Payoff::straddle_type_ii(1.0).unwrap(),
        Payoff::straddle_type_i(1.0).unwrap(),
    ] {
        let value = price(&hk, &payoff, 1e-10).unwrap().value;
        let inst = DiscreteMotInstance::from_marginals(&mu, &nu, &payoff, &cfg).unwrap();
        let sol = solve_bounds(&inst, Direction::Min).unwrap();
        let rel = (value - sol.value).abs() / sol.value;
        assert!(rel <= 0.01, "{}: plan {value:.6} vs LP {:.6} -> {rel:.4}", payoff.label, sol.value);
        gaps.push(format!("{} {:.3}%", payoff.label, rel * 100.0));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("criterion 05 PASS: {} (tol 1%) in {elapsed:?}", gaps.join(", "));
}

#[test]
fn criterion_06_three_band_numeraire_symmetry() {
    let (mu, nu) = (ln(0.2), ln(0.3));
    let direct = build_hk(&mu, &nu, 512).unwrap();
    let gap = verify::hk_reflection_gap(&mu, &nu, &direct).unwrap();
    assert!(gap <= 1e-6, "reflection gap {gap:.3e}");
    println!("criterion 06 PASS: reflected maps within {gap:.2e} (tol 1e-6)");
}

#[test]
fn criterion_07_left_right_exchange() {
    let (mu, nu) = (ln(0.2), ln(0.3));
    let (direct, sup) = cross_check_right_monotone(&mu, &nu, 512, 1e-6).unwrap();
    // the identity boundary must be the reciprocal of the reflected pair's
    let s_prof = DeltaProfile::new(
        &symmetrize_marginal(&mu).unwrap(),
        &symmetrize_marginal(&nu).unwrap(),
    )
    .unwrap();
    let xstar_err = (direct.x_star - 1.0 / s_prof.m).abs();
    assert!(sup <= 1e-6, "route disagreement {sup:.3e}");
    assert!(xstar_err <= 1e-6, "x_star reciprocity {xstar_err:.3e}");
    println!(
        "criterion 07 PASS: routes within {sup:.2e}, x_star reciprocity {xstar_err:.2e} (tol 1e-6)"
    );
}

#[test]
fn criterion_08_monotone_plans_attain_lp_upper_bounds() {
    let (mu, nu) = (ln(0.2), ln(0.3));
    let cfg = LpConfig { atoms: 200, scheme: QuantScheme::Quantile };
    // C_xyy > 0: the left plan attains the upper bound
    let c = Payoff::x_exp_neg_y();
    let left: CouplingKernel = build_left_monotone(&mu, &nu, 512).unwrap().into();
    let v_left = price(&left, &c, 1e-10).unwrap().value;
    let inst = DiscreteMotInstance::from_marginals(&mu, &nu, &c, &cfg).unwrap();
    let hi = solve_bounds(&inst, Direction::Max).unwrap().value;
    let rel_left = (v_left - hi).abs() / hi.abs();
    assert!(rel_left <= 0.01, "left: {v_left:.6} vs LP {hi:.6} -> {rel_left:.4}");

    // the transformed payoff has C_xyy < 0: the right plan attains its bound
    let ct = c.symmetrized();
    let right: CouplingKernel =
        build_right_monotone(&mu, &nu, 512, RightMethod::Direct).unwrap().into();
    let v_right = price(&right, &ct, 1e-10).unwrap().value;
    let inst_t = DiscreteMotInstance::from_marginals(&mu, &nu, &ct, &cfg).unwrap();
    let hi_t = solve_bounds(&inst_t, Direction::Max).unwrap().value;
    let rel_right = (v_right - hi_t).abs() / hi_t.abs();
    assert!(rel_right <= 0.01, "right: {v_right:.6} vs LP {hi_t:.6} -> {rel_right:.4}");
    println!(
        "criterion 08 PASS: left gap {:.3}%, right gap {:.3}% (tol 1%)",
        rel_left * 100.0,
        rel_right * 100.0
    );
}

#[test]
fn criterion_09_exact_lp_fixtures() {
    // point mass
    let inst1 = DiscreteMotInstance::new(
        vec![1.0],
        vec![1.0],
        vec![0.5, 1.5],
        vec![0.5, 0.5],
        vec![0.5, 0.5],
        None,
    )
    .unwrap();
    // forced 2x2
    let xa: Vec<f64> = vec![0.5, 1.5];
    let ya: Vec<f64> = vec![0.25, 1.75];
    let cost2: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y - x).abs()))
        .collect();
    let inst2 =
        DiscreteMotInstance::new(xa, vec![0.5, 0.5], ya, vec![0.5, 0.5], cost2, None).unwrap();
    // 2x3 with a one-parameter optimal family
    let xa: Vec<f64> = vec![0.9, 1.1];
    let ya: Vec<f64> = vec![0.5, 1.0, 1.5];
    let cost3: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y / x - 1.0).abs()))
        .collect();
    let inst3 = DiscreteMotInstance::new(
        xa,
        vec![0.5, 0.5],
        ya,
        vec![0.25, 0.5, 0.25],
        cost3,
        None,
    )
    .unwrap();

    let cases: [(&str, &DiscreteMotInstance, f64, f64); 3] = [
        ("pointmass", &inst1, 0.5, 0.5),
        ("2x2", &inst2, 5.0 / 12.0, 5.0 / 12.0),
        ("2x3", &inst3, 134.0 / 495.0, 146.0 / 495.0),
    ];
    for (name, inst, want_min, want_max) in cases {
        for (dir, want) in [(Direction::Min, want_min), (Direction::Max, want_max)] {
            let sol = solve_bounds(inst, dir).unwrap();
            assert!(
                (sol.value - want).abs() <= 1e-9,
                "{name} {dir:?}: {} vs {want}",
                sol.value
            );
            let gap = (sol.hedge.value(inst) - sol.value).abs();
            assert!(gap <= 1e-8, "{name} {dir:?}: duality gap {gap:.3e}");
            let feas = check_hedge(inst, &sol.hedge, dir);
            assert!(
                feas.max_violation <= 1e-8,
                "{name} {dir:?}: hedge violation {:.3e}",
                feas.max_violation
            );
        }
    }
    println!("criterion 09 PASS: exact fixtures 0.5, 5/12, [134/495, 146/495] within 1e-9, duality/hedge within 1e-8");
}

#[test]
fn criterion_10_discrete_numeraire_invariance() {
    let xa: Vec<f64> = vec![0.9, 1.1];
    let ya: Vec<f64> = vec![0.5, 1.0, 1.5];
    let cost: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y / x - 1.0).abs()))
        .collect();
    let inst = DiscreteMotInstance::new(
        xa,
        vec![0.5, 0.5],
        ya,
        vec![0.25, 0.5, 0.25],
        cost,
        Some("straddle1:alpha=1".into()),
    )
    .unwrap();
    let s = inst.symmetrized().unwrap();
    let mut worst = 0.0_f64;
    for dir in [Direction::Min, Direction::Max] {
        let a = solve_bounds(&inst, dir).unwrap().value;
        let b = solve_bounds(&s, dir).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-9, "bound drift {worst:.3e}");
    println!("criterion 10 PASS: transformed instance bounds drift {worst:.2e} (tol 1e-9)");
}

#[test]
fn criterion_11_model_risk_symmetry() {
    let (mu, nu) = (ln(0.2), ln(0.3));
    let base = Payoff::call(1.1).unwrap();
    let cfg = LpConfig { atoms: 120, scheme: QuantScheme::SymmetricLog };
    let solver_tol = 1e-8;
    let risk = |alpha: f64| {
        let c = alpha_portfolio(&base, alpha).unwrap();
        model_risk(&mu, &nu, &c, &cfg).unwrap()
    };
    let mut worst = 0.0_f64;
    for alpha in [0.0, 0.25, 0.5] {
        let gap = (risk(alpha) - risk(1.0 - alpha)).abs();
        worst = worst.max(gap);
        assert!(gap <= 2.0 * solver_tol, "alpha {alpha}: asymmetry {gap:.3e}");
    }
    let r_half = risk(0.5);
    for alpha in [0.0, 0.25, 0.75, 1.0] {
        let r = risk(alpha);
        assert!(
            r_half <= r + solver_tol,
            "half-portfolio risk {r_half:.8} above R({alpha}) = {r:.8}"
        );
    }
    println!(
        "criterion 11 PASS: R(C_a) = R(C_(1-a)) within {worst:.2e} (tol 2e-8); R(C_1/2) minimal"
    );
}

#[test]
fn criterion_12_hedge_transform_identity() {
    let mut worst = 0.0_f64;
    for seed in 0..20u64 {
        worst = worst.max(verify::hedge_identity_gap(seed));
    }
    assert!(worst <= 1e-10, "reconstruction drift {worst:.3e}");
    println!("criterion 12 PASS: 20 random decomposable payoffs reconstruct within {worst:.2e} (tol 1e-10)");
}

#[test]
fn criterion_extra_negative_control() {
    // a corrupted kernel must fail validation loudly: scale the upper map
    let (mu, nu) = (ln(0.2), ln(0.3));
    let k = build_hk(&mu, &nu, 128).unwrap();
    let mut worst = 0.0_f64;
    for (x, p, q, l, u) in k.rows() {
        let mean = l * p + (1.0 - l - u) * x + u * (q * 1.01);
        worst = worst.max((mean - x).abs());
    }
    assert!(worst > 1e-3, "corruption not detected: {worst:.3e}");
    println!("negative control PASS: corrupted kernel shows martingale defect {worst:.2e} > 1e-3");
}

#[test]
fn criterion_extra_random_small_instances_vs_enumeration() {
    // brute-force vertex enumeration referee for random small instances
    let mut rng = SplitMix64::new(0xacce_97ed);
    for trial in 0..12 {
        let n = 2 + (rng.next_u64() % 2) as usize;
        let m = 2 + (rng.next_u64() % 2) as usize;
        let Some(inst) = random_feasible_instance(&mut rng, n, m) else {
            continue;
        };
        for dir in [Direction::Min, Direction::Max] {
            let sol = solve_bounds(&inst, dir).unwrap();
            let brute = enumerate_bound(&inst, dir);
            assert!(
                (sol.value - brute).abs() <= 1e-7,
                "trial {trial} {dir:?}: simplex {} vs enumeration {brute}",
                sol.value
            );
        }
    }
    println!("random instances PASS: simplex matches vertex enumeration within 1e-7");
}

/// Builds a random martingale-feasible instance by mixing spread atoms, or
/// `None` when the draw fails the discrete convex order badly.
fn random_feasible_instance(rng: &mut SplitMix64, n: usize, m: usize) -> Option<DiscreteMotInstance> {
    // x atoms around 1, y atoms produced by spreading each x
    let mut xa: Vec<f64> = (0..n).map(|_| rng.uniform(0.6, 1.4)).collect();
    xa.sort_by(f64::total_cmp);
    xa.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    if xa.len() < n {
        return None;
    }
    let xw = vec![1.0 / xa.len() as f64; xa.len()];
    // y = x spread by a mean-preserving kick
    let spread = rng.uniform(0.2, 0.5);
    let mut ya: Vec<f64> = Vec::new();
    for &x in &xa {
        ya.push(x - spread * x * 0.5);
        ya.push(x + spread * x * 0.5);
    }
    ya.sort_by(f64::total_cmp);
    while ya.len() > m {
        // merge the two closest atoms, preserving the mean
        let mut best = 0;
        for i in 0..ya.len() - 1 {
            if ya[i + 1] - ya[i] < ya[best + 1] - ya[best] {
                best = i;
            }
        }
        let merged = 0.5 * (ya[best] + ya[best + 1]);
        ya.remove(best + 1);
        ya[best] = merged;
    }
    let k = ya.len();
    let mean_x: f64 = xa.iter().zip(&xw).map(|(a, w)| a * w).sum();
    // weights solving the mean constraint: start uniform, adjust the ends
    let mut yw = vec![1.0 / k as f64; k];
    let mean_y: f64 = ya.iter().zip(&yw).map(|(a, w)| a * w).sum();
    let lo = ya[0];
    let hi = ya[k - 1];
    if (hi - lo).abs() < 1e-9 {
        return None;
    }
    // shift mass between the extreme atoms to match means
    let delta = (mean_x - mean_y) / (hi - lo);
    yw[0] -= delta;
    yw[k - 1] += delta;
    if yw.iter().any(|&w| w <= 1e-6) {
        return None;
    }
    let cost: Vec<f64> = xa
        .iter()
        .flat_map(|&x| ya.iter().map(move |&y| (y - 0.9 * x).abs() + 0.1 * (x * y).sin()))
        .collect();
    DiscreteMotInstance::new(xa, xw, ya, yw, cost, None).ok()
}

/// Exhaustive support enumeration for small instances: the optimum over all
/// feasible vertices of the coupling polytope. Every vertex is the unique
/// solution supported on some column subset, so sweeping all subsets (fine
/// for n m <= 12) covers them.
fn enumerate_bound(inst: &DiscreteMotInstance, dir: Direction) -> f64 {
    let (n, m) = (inst.n(), inst.m());
    let nv = n * m;
    assert!(nv <= 16, "enumeration referee only for tiny instances");
    // equality system: row sums, col sums, martingale rows
    let nr = 2 * n + m;
    let mut a = vec![vec![0.0_f64; nv]; nr];
    let mut b = vec![0.0_f64; nr];
    for i in 0..n {
        for j in 0..m {
            a[i][i * m + j] = 1.0;
            a[n + j][i * m + j] = 1.0;
            a[n + m + i][i * m + j] = inst.y_atoms[j] - inst.x_atoms[i];
        }
        b[i] = inst.x_weights[i];
        b[n + m + i] = 0.0;
    }
    for j in 0..m {
        b[n + j] = inst.y_weights[j];
    }
    let mut best = match dir {
        Direction::Min => f64::INFINITY,
        Direction::Max => f64::NEG_INFINITY,
    };
    for mask in 1u32..(1u32 << nv) {
        let support: Vec<usize> = (0..nv).filter(|j| mask & (1 << j) != 0).collect();
        if let Some(x) = solve_support(&a, &b, &support, nv) {
            if x.iter().all(|&v| v >= -1e-9) {
                let obj: f64 = x.iter().zip(&inst.cost).map(|(v, c)| v * c).sum();
                best = match dir {
                    Direction::Min => best.min(obj),
                    Direction::Max => best.max(obj),
                };
            }
        }
    }
    best
}

/// Solves `A x = b` restricted to the support columns; returns the full
/// vector when the restricted system is consistent and determined.
fn solve_support(a: &[Vec<f64>], b: &[f64], support: &[usize], nv: usize) -> Option<Vec<f64>> {
    let nr = a.len();
    let k = support.len();
    let mut mat: Vec<Vec<f64>> = (0..nr)
        .map(|r| {
            let mut row: Vec<f64> = support.iter().map(|&c| a[r][c]).collect();
            row.push(b[r]);
            row
        })
        .collect();
    let mut piv_cols = Vec::new();
    let mut row = 0;
    for col in 0..k {
        let mut p = row;
        for r in row..nr {
            if mat[r][col].abs() > mat[p][col].abs() {
                p = r;
            }
        }
        if mat[p][col].abs() < 1e-11 {
            continue;
        }
        mat.swap(row, p);
        let pivot = mat[row][col];
        for c in 0..=k {
            mat[row][c] /= pivot;
        }
        for r in 0..nr {
            if r != row {
                let f = mat[r][col];
                if f != 0.0 {
                    for c in 0..=k {
                        mat[r][c] -= f * mat[row][c];
                    }
                }
            }
        }
        piv_cols.push(col);
        row += 1;
        if row == nr {
            break;
        }
    }
    // consistency of the remaining rows
    for r in row..nr {
        if mat[r][k].abs() > 1e-9 {
            return None;
        }
    }
    // free support columns make the vertex ambiguous; set them to zero
    let mut x = vec![0.0; nv];
    for (r, &col) in piv_cols.iter().enumerate() {
        x[support[col]] = mat[r][k];
    }
    Some(x)
}
